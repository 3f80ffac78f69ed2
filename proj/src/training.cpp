#include "metapinn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metapinn {

void adam_step(AdamState& st, VectorXd& x, const VectorXd& g, double lr) {
    if (st.m.size() != x.size()) {
        st.m = VectorXd::Zero(x.size());
        st.v = VectorXd::Zero(x.size());
        st.t = 0;
    }
    if (g.size() != x.size())
        throw ValidationError("adam_step: gradient size mismatch");
    st.t += 1;
    st.m = st.beta1 * st.m + (1 - st.beta1) * g;
    st.v = st.beta2 * st.v + (1 - st.beta2) * g.cwiseProduct(g);
    double c1 = 1 - std::pow(st.beta1, double(st.t));
    double c2 = 1 - std::pow(st.beta2, double(st.t));
    x -= (lr / c1) * st.m.cwiseQuotient(
                         ((st.v / c2).cwiseSqrt().array() + st.eps).matrix());
}

std::vector<TaskConfig> sample_tasks(double vmax_nom, double km_nom, int n,
                                     double range_factor, uint64_t seed) {
    if (n < 1 || vmax_nom <= 0 || km_nom <= 0 || range_factor < 1)
        throw ValidationError("sample_tasks: bad arguments");
    SplitMix64 rng(seed);
    double lf = std::log(range_factor);
    std::vector<TaskConfig> out(n);
    for (int i = 0; i < n; ++i) {
        out[i].vmax = std::exp(rng.uniform(std::log(vmax_nom) - lf,
                                           std::log(vmax_nom) + lf));
        out[i].km = std::exp(
            rng.uniform(std::log(km_nom) - lf, std::log(km_nom) + lf));
    }
    return out;
}

double max_state_nmse(const MatrixXd& P, const MatrixXd& ref) {
    if (P.rows() != ref.rows() || P.cols() != ref.cols())
        throw ValidationError("max_state_nmse: shape mismatch");
    double worst = 0;
    for (int s = 0; s < P.cols(); ++s) {
        double den = ref.col(s).squaredNorm() + 1e-30;
        worst = std::max(worst, (P.col(s) - ref.col(s)).squaredNorm() / den);
    }
    return worst;
}

namespace {

// Residual of the adjoint pass: same linear operator applied to the
// adjoint field, no source.
MatrixXd adjoint_residual(const LinearSystem& sys, const VectorXd& adj,
                          MatrixXd& Pa) {
    const int n = sys.n_ode;
    Pa = fields(*sys.feats, sys.labels, adj, 0, n + 1);
    MatrixXd dPa = fields(*sys.feats, sys.labels, adj, 0, n + 1, true);
    return ode_residual(sys, Pa, dPa, false);
}

// Differentiating through M w = c: the primal residual couples to the
// adjoint weight block and the adjoint residual to the primal block.
// Adds the contributions of the ODE, IC and any data rows of M to the
// feature adjoints.
void add_implicit_field_terms(const OmegaSolution& sol, const MatrixXd& R,
                              const VectorXd& r0, const VectorXd& adj,
                              FieldAdjoints& out) {
    const LinearSystem& sys = sol.sys;
    const int n = sys.n_ode, S = sys.S, H = sys.H;
    const double lam2 = sys.w.lam_ode * sys.w.lam_ode;
    MatrixXd Pa;
    MatrixXd Q = adjoint_residual(sys, adj, Pa);
    MatrixXd W1 = -lam2 * R;
    MatrixXd W2 = -lam2 * Q;
    for (int s = 0; s < S; ++s) {
        int lab = sys.labels[s];
        VectorXd om_s = sol.omega.segment(s * H, H);
        VectorXd ad_s = adj.segment(s * H, H);
        out.dF[lab].middleRows(1, n).noalias() +=
            W1.col(s) * ad_s.transpose() + W2.col(s) * om_s.transpose();
        for (const auto& e : sys.tab.rows[s]) {
            int labj = sys.labels[e.col];
            VectorXd om_j = sol.omega.segment(e.col * H, H);
            VectorXd ad_j = adj.segment(e.col * H, H);
            VectorXd c1 = W1.col(s).cwiseProduct(e.coef);
            VectorXd c2 = W2.col(s).cwiseProduct(e.coef);
            out.F[labj].middleRows(1, n).noalias() -=
                c1 * ad_j.transpose() + c2 * om_j.transpose();
        }
        double li2 = sys.w.lam_ic * sys.w.lam_ic;
        out.F[lab].row(0) +=
            li2 * (-r0[s] * ad_s - Pa(0, s) * om_s).transpose();
    }
    for (const auto& d : sys.data) {
        int lab = sys.labels[d.state];
        int nb = int(d.y.size());
        VectorXd om_s = sol.omega.segment(d.state * H, H);
        VectorXd ad_s = adj.segment(d.state * H, H);
        auto Fd = sys.feats->branch[lab].F.middleRows(d.row_begin, nb);
        VectorXd rds = Fd * om_s - d.y;
        VectorXd pad = Fd * ad_s;
        out.F[lab].middleRows(d.row_begin, nb).noalias() -=
            d.lam * d.lam *
            (rds * ad_s.transpose() + pad * om_s.transpose());
    }
}

}  // namespace

LossBreakdown stage1_loss_adjoints(const OmegaSolution& sol,
                                   const MatrixXd& ysup, GradMode mode,
                                   FieldAdjoints& adj) {
    const LinearSystem& sys = sol.sys;
    const FeatureBundle& fb = *sys.feats;
    const int n = sys.n_ode, S = sys.S, H = sys.H;
    const int nb = int(fb.times.size());
    const int K = int(fb.branch.size());
    if (ysup.rows() != n + 1 || ysup.cols() != S)
        throw ValidationError("stage1_loss_adjoints: supervision shape");

    const MatrixXd& P = sol.P;
    MatrixXd dP = fields(fb, sys.labels, sol.omega, 0, n + 1, true);
    MatrixXd R = ode_residual(sys, P, dP);
    VectorXd r0 = P.row(0).transpose() - sys.u0;
    MatrixXd rd = P - ysup;

    LossBreakdown lb;
    lb.ode = sys.w.lam_ode * R.squaredNorm() / n;
    lb.ic = sys.w.lam_ic * r0.squaredNorm();
    lb.data = sys.w.lam_data * rd.squaredNorm() / (n + 1);
    lb.total = lb.ode + lb.ic + lb.data;

    adj.F.assign(K, MatrixXd::Zero(nb, H));
    adj.dF.assign(K, MatrixXd::Zero(nb, H));

    MatrixXd GR = (2.0 * sys.w.lam_ode / n) * R;
    double gic = 2.0 * sys.w.lam_ic;
    double gda = 2.0 * sys.w.lam_data / (n + 1);
    VectorXd gw = VectorXd::Zero(S * H);
    for (int s = 0; s < S; ++s) {
        int lab = sys.labels[s];
        VectorXd om_s = sol.omega.segment(s * H, H);
        adj.dF[lab].middleRows(1, n).noalias() +=
            GR.col(s) * om_s.transpose();
        for (const auto& e : sys.tab.rows[s]) {
            int labj = sys.labels[e.col];
            VectorXd om_j = sol.omega.segment(e.col * H, H);
            VectorXd c = GR.col(s).cwiseProduct(e.coef);
            adj.F[labj].middleRows(1, n).noalias() -= c * om_j.transpose();
        }
        adj.F[lab].row(0) += gic * r0[s] * om_s.transpose();
        adj.F[lab].topRows(n + 1).noalias() +=
            gda * rd.col(s) * om_s.transpose();
        if (mode == GradMode::Implicit) {
            const auto& sl = fb.branch[lab];
            gw.segment(s * H, H).noalias() +=
                sl.dF.middleRows(1, n).transpose() * GR.col(s);
            for (const auto& e : sys.tab.rows[s]) {
                int labj = sys.labels[e.col];
                VectorXd c = GR.col(s).cwiseProduct(e.coef);
                gw.segment(e.col * H, H).noalias() -=
                    fb.branch[labj].F.middleRows(1, n).transpose() * c;
            }
            gw.segment(s * H, H) +=
                gic * r0[s] * sl.F.row(0).transpose();
            gw.segment(s * H, H).noalias() +=
                gda * sl.F.topRows(n + 1).transpose() * rd.col(s);
        }
    }
    if (mode == GradMode::Implicit) {
        VectorXd a = sol.ridge.solve(gw);
        add_implicit_field_terms(sol, R, r0, a, adj);
    }
    return lb;
}

namespace {

int theta_size(const std::vector<BranchNet>& nets) {
    int n = 0;
    for (const auto& b : nets) n += b.n_params();
    return n;
}

void pack_all(const std::vector<BranchNet>& nets, VectorXd& th) {
    th.resize(theta_size(nets));
    int off = 0;
    for (const auto& b : nets) {
        b.pack(th.data() + off);
        off += b.n_params();
    }
}

void unpack_all(std::vector<BranchNet>& nets, const VectorXd& th) {
    int off = 0;
    for (auto& b : nets) {
        b.unpack(th.data() + off);
        off += b.n_params();
    }
}

VectorXd backprop_all(const std::vector<BranchNet>& nets,
                      const std::vector<BranchCache>& caches,
                      const FieldAdjoints& adj) {
    VectorXd g(theta_size(nets));
    int off = 0;
    for (size_t k = 0; k < nets.size(); ++k) {
        BranchGrads bg = nets[k].backprop(caches[k], adj.F[k], adj.dF[k]);
        nets[k].pack_grads(bg, g.data() + off);
        off += nets[k].n_params();
    }
    return g;
}

FeatureBundle forward_all(const std::vector<BranchNet>& nets,
                          const VectorXd& times,
                          std::vector<BranchCache>& caches) {
    FeatureBundle fb;
    fb.times = times;
    caches.resize(nets.size());
    for (size_t k = 0; k < nets.size(); ++k)
        fb.branch.push_back(nets[k].forward(times, caches[k]));
    return fb;
}

}  // namespace

Stage1Result stage1_meta_train(const PbpkModel& m, const CollocationGrid& grid,
                               const std::vector<int>& labels,
                               const Weights& w, std::vector<BranchNet> nets,
                               const std::vector<TaskConfig>& tasks,
                               const Stage1Config& cfg) {
    if (tasks.empty()) throw ValidationError("stage1: no tasks");
    const int NG = grid.n_ode();
    const int nT = int(tasks.size());
    const double horizon = grid.all[NG];
    VectorXd u0 = initial_state(m);

    // Term-style tasks: materialize each candidate as a source table
    // along its own reference trajectory. The reference itself comes
    // from a parameter-style sibling so the swapped values act inside
    // the full rate law.
    bool term = m.mask.kind == MaskKind::Term;
    PbpkModel ref_model =
        term ? build_model(m.drug.name, m.dose.route, m.dose,
                           MaskSpec{MaskKind::Parameter, m.mask.enzyme})
             : m;

    std::vector<MatrixXd> refs(nT);
    std::vector<VectorXd> gtab(nT);
    for (int k = 0; k < nT; ++k) {
        RhsOverride ov;
        ov.vk = std::array<double, 2>{tasks[k].vmax, tasks[k].km};
        Trajectory tr = integrate(ref_model, u0, horizon, grid.all, ov);
        refs[k] = tr.states;
        if (term) {
            gtab[k].resize(NG);
            for (int i = 0; i < NG; ++i)
                gtab[k][i] = hepatic_term_rate(m, tr.states(i + 1, m.liver),
                                               tasks[k].vmax, tasks[k].km);
        }
    }

    VectorXd theta;
    pack_all(nets, theta);
    AdamState opt(int(theta.size()));
    double lr = cfg.lr;
    int decay_at = int(cfg.lr_decay_frac * cfg.n_iters);

    std::vector<MatrixXd> warm(nT);
    Stage1Result res;
    res.log.resize(cfg.n_iters, 6);
    std::vector<BranchCache> caches;

    int it = 0;
    for (; it < cfg.n_iters; ++it) {
        int k = it % nT;
        unpack_all(nets, theta);
        auto fb = std::make_shared<FeatureBundle>(
            forward_all(nets, grid.all, caches));
        std::optional<std::array<double, 2>> vk;
        if (!term) vk = std::array<double, 2>{tasks[k].vmax, tasks[k].km};
        OmegaSolution sol = lagged_fixed_point(
            m, grid, fb, labels, w, vk, term ? &gtab[k] : nullptr, {},
            warm[k].size() ? &warm[k] : nullptr, cfg.lagged);
        warm[k] = sol.P.bottomRows(NG);

        FieldAdjoints adj;
        LossBreakdown lb =
            stage1_loss_adjoints(sol, refs[k], cfg.grad_mode, adj);
        VectorXd g = backprop_all(nets, caches, adj);

        if (it == decay_at && it > 0) lr *= cfg.lr_decay;
        adam_step(opt, theta, g, lr);
        res.log.row(it) << it, k, lb.total, lb.ode, lb.ic, lb.data;

        if (cfg.early_nmse > 0 && (it + 1) % cfg.check_every == 0) {
            unpack_all(nets, theta);
            auto fbc = std::make_shared<FeatureBundle>(
                forward_all(nets, grid.all, caches));
            std::optional<std::array<double, 2>> vk0;
            if (!term)
                vk0 = std::array<double, 2>{tasks[0].vmax, tasks[0].km};
            OmegaSolution s0 = lagged_fixed_point(
                m, grid, fbc, labels, w, vk0, term ? &gtab[0] : nullptr, {},
                warm[0].size() ? &warm[0] : nullptr, cfg.lagged);
            res.final_nmse = max_state_nmse(s0.P, refs[0]);
            if (res.final_nmse <= cfg.early_nmse) {
                ++it;
                break;
            }
        }
    }
    res.iters_run = it;
    res.log.conservativeResize(it, 6);
    unpack_all(nets, theta);
    res.nets = std::move(nets);
    return res;
}

CalObjective stage2_objective_params(const PbpkModel& m,
                                     const OmegaSolution& sol,
                                     const MatrixXd& Fven,
                                     const VectorXd& ehat,
                                     const VectorXd& yobs, double vmax,
                                     double km, GradMode mode) {
    const LinearSystem& sys = sol.sys;
    const int n = sys.n_ode, H = sys.H;
    const int nob = int(yobs.size());
    const double lam2 = sys.w.lam_ode * sys.w.lam_ode;

    MatrixXd dP = fields(*sys.feats, sys.labels, sol.omega, 0, n + 1, true);
    MatrixXd R = ode_residual(sys, sol.P, dP);
    VectorXd rd =
        Fven * sol.omega.segment(m.venous * H, H) - ehat - yobs;

    CalObjective out;
    out.parts.ode = sys.w.lam_ode * R.squaredNorm() / n;
    VectorXd r0 = sol.P.row(0).transpose() - sys.u0;
    out.parts.ic = sys.w.lam_ic * r0.squaredNorm();
    out.parts.data = rd.squaredNorm() / nob;

    VectorXd cliv = sol.P.col(m.liver).tail(n);
    VectorXd dcl(n), dck(n);
    for (int i = 0; i < n; ++i)
        metab_coef_dlog(m, cliv[i], vmax, km, dcl[i], dck[i]);

    if (mode == GradMode::Frozen) {
        // Residual objective with the output weights held fixed: only
        // the metabolic coupling rows respond to the parameters.
        out.value = out.parts.ode + out.parts.data;
        VectorXd wr = (2.0 * sys.w.lam_ode / n) *
                      (R.col(m.liver) - R.col(m.liver_met))
                          .cwiseProduct(cliv);
        out.grad[0] = wr.dot(dcl);
        out.grad[1] = wr.dot(dck);
        return out;
    }

    out.value = out.parts.data;
    VectorXd gw = VectorXd::Zero(sys.S * H);
    gw.segment(m.venous * H, H) = (2.0 / nob) * (Fven.transpose() * rd);
    VectorXd a = sol.ridge.solve(gw);
    MatrixXd Pa;
    MatrixXd Q = adjoint_residual(sys, a, Pa);
    VectorXd wimp =
        -lam2 *
        (Pa.col(m.liver)
             .tail(n)
             .cwiseProduct(R.col(m.liver) - R.col(m.liver_met)) +
         (Q.col(m.liver) - Q.col(m.liver_met)).cwiseProduct(cliv));
    out.grad[0] = wimp.dot(dcl);
    out.grad[1] = wimp.dot(dck);
    return out;
}

TermObjective stage2_objective_term(const PbpkModel& m,
                                    const OmegaSolution& sol,
                                    const MatrixXd& Fven,
                                    const VectorXd& ehat,
                                    const VectorXd& yobs,
                                    const MatrixXd& jac) {
    const LinearSystem& sys = sol.sys;
    const int n = sys.n_ode, H = sys.H;
    const int nob = int(yobs.size());
    const double lam2 = sys.w.lam_ode * sys.w.lam_ode;
    if (jac.rows() != n) throw ValidationError("term jacobian rows");

    VectorXd rd =
        Fven * sol.omega.segment(m.venous * H, H) - ehat - yobs;
    TermObjective out;
    out.value = rd.squaredNorm() / nob;

    VectorXd gw = VectorXd::Zero(sys.S * H);
    gw.segment(m.venous * H, H) = (2.0 / nob) * (Fven.transpose() * rd);
    VectorXd a = sol.ridge.solve(gw);
    MatrixXd Pa;
    MatrixXd Q = adjoint_residual(sys, a, Pa);
    // The source enters the right-hand side only: -g on the liver row,
    // +g on the metabolite row.
    VectorXd wsrc = lam2 * (Q.col(m.liver_met) - Q.col(m.liver));
    out.grad = jac.transpose() * wsrc;
    return out;
}

Stage2Result stage2_infer(const PbpkModel& m, const CollocationGrid& grid,
                          const std::vector<int>& labels, const Weights& w,
                          const std::vector<BranchNet>& nets,
                          const ObservationSet& obs,
                          const Stage2Config& cfg) {
    const int NG = grid.n_ode();
    const int NOB = int(obs.times.size());
    const int H = nets[0].H;
    if (NOB == 0) throw ValidationError("stage2: no observations");
    const double horizon = grid.all[NG];
    const bool term = m.mask.kind == MaskKind::Term;
    if (!term && m.mask.kind != MaskKind::Parameter)
        throw ValidationError("stage2: model has no masked unknown");
    VectorXd u0 = initial_state(m);

    VectorXd tall(NG + 1 + NOB);
    tall << grid.all, obs.times;
    auto fb = std::make_shared<FeatureBundle>(eval_bundle(nets, tall));
    MatrixXd Fven =
        fb->branch[labels[m.venous]].F.middleRows(NG + 1, NOB);

    // Surrogate error of the nominal task at the observation times; the
    // data misfit is measured relative to it so representation bias
    // cancels at first order.
    OmegaSolution nom =
        lagged_fixed_point(m, grid, fb, labels, w, {}, nullptr, {}, nullptr,
                           cfg.lagged);
    Trajectory ytr = integrate(m, u0, horizon, obs.times);
    VectorXd ehat = Fven * nom.omega.segment(m.venous * H, H) -
                    ytr.states.col(m.venous);

    Stage2Result res;
    MatrixXd warm = nom.P.bottomRows(NG);

    if (!term) {
        const auto& e = m.drug.enzymes[m.mask.enzyme];
        double lb_v = std::log(e.vmax / cfg.bounds_factor);
        double ub_v = std::log(e.vmax * cfg.bounds_factor);
        double lb_k = std::log(e.km / cfg.bounds_factor);
        double ub_k = std::log(e.km * cfg.bounds_factor);
        VectorXd x(2);
        x << std::log(cfg.init_factor * e.vmax),
            std::log(cfg.init_factor * e.km);
        VectorXd x_nom(2);
        x_nom << std::log(e.vmax), std::log(e.km);
        AdamState opt(2);
        res.trace.resize(cfg.n_iters, 7);
        double best = std::numeric_limits<double>::infinity();
        VectorXd x_best = x;
        for (int it = 0; it < cfg.n_iters; ++it) {
            std::array<double, 2> vk{std::exp(x[0]), std::exp(x[1])};
            OmegaSolution sol = lagged_fixed_point(
                m, grid, fb, labels, w, vk, nullptr, {}, &warm, cfg.lagged);
            warm = sol.P.bottomRows(NG);
            CalObjective co =
                stage2_objective_params(m, sol, Fven, ehat, obs.values,
                                        vk[0], vk[1], cfg.grad_mode);
            VectorXd g(2);
            g << co.grad[0], co.grad[1];
            double obj = co.value;
            if (cfg.prior_weight > 0) {
                obj += cfg.prior_weight * (x - x_nom).squaredNorm();
                g += 2.0 * cfg.prior_weight * (x - x_nom);
            }
            if (obj < best) {
                best = obj;
                x_best = x;
                res.P = sol.P;
                res.omega = sol.omega;
            }
            res.trace.row(it) << it, obj, co.parts.ode, co.parts.ic,
                co.parts.data, vk[0], vk[1];
            adam_step(opt, x, g, cfg.lr);
            x[0] = std::clamp(x[0], lb_v, ub_v);
            x[1] = std::clamp(x[1], lb_k, ub_k);
        }
        res.vmax = std::exp(x_best[0]);
        res.km = std::exp(x_best[1]);
        res.best_objective = best;
        res.dof = 2;
        return res;
    }

    AuxNet aux = AuxNet::init(cfg.aux_seed, cfg.gamma, horizon);
    VectorXd p(AuxNet::n_params());
    aux.pack(p.data());
    AdamState opt(AuxNet::n_params());
    res.trace.resize(cfg.n_iters, 5 + AuxNet::n_params());
    double best = std::numeric_limits<double>::infinity();
    VectorXd p_best = p;
    VectorXd ot = grid.ode_times();
    for (int it = 0; it < cfg.n_iters; ++it) {
        aux.unpack(p.data());
        MatrixXd jac;
        VectorXd g_ode = aux.eval(ot, &jac);
        OmegaSolution sol = lagged_fixed_point(
            m, grid, fb, labels, w, {}, &g_ode, {}, &warm, cfg.lagged);
        warm = sol.P.bottomRows(NG);
        TermObjective to =
            stage2_objective_term(m, sol, Fven, ehat, obs.values, jac);
        double obj = to.value + cfg.prior_weight * p.squaredNorm();
        VectorXd g = to.grad + 2.0 * cfg.prior_weight * p;
        if (obj < best) {
            best = obj;
            p_best = p;
            res.P = sol.P;
            res.omega = sol.omega;
        }
        res.trace.row(it).head(5) << it, obj, 0, 0, to.value;
        res.trace.row(it).tail(AuxNet::n_params()) = p.transpose();
        adam_step(opt, p, g, cfg.lr);
        for (int j = 0; j < p.size(); ++j)
            p[j] = std::clamp(p[j], -cfg.aux_box, cfg.aux_box);
    }
    aux.unpack(p_best.data());
    res.aux = aux;
    res.g_ode = aux.eval(ot);
    res.best_objective = best;
    res.dof = AuxNet::n_params();
    return res;
}

JointResult joint_train(const PbpkModel& m, const CollocationGrid& grid,
                        const std::vector<int>& labels, const Weights& w,
                        std::vector<BranchNet> nets, const ObservationSet& obs,
                        uint64_t seed, const JointConfig& cfg) {
    if (m.mask.kind != MaskKind::Parameter)
        throw ValidationError("joint: parameter mask required");
    const int NG = grid.n_ode();
    const int NOB = int(obs.times.size());
    const int S = m.n_states;
    const int H = nets[0].H;
    const int K = int(nets.size());
    VectorXd u0 = initial_state(m);
    const auto& e = m.drug.enzymes[m.mask.enzyme];

    VectorXd tall(NG + 1 + NOB);
    tall << grid.all, obs.times;
    VectorXd ot = grid.ode_times();

    VectorXd theta;
    pack_all(nets, theta);
    std::vector<BranchCache> caches;
    (void)seed;

    VectorXd omega = VectorXd::Zero(S * H);
    VectorXd x(2);
    x << std::log(cfg.init_factor * e.vmax),
        std::log(cfg.init_factor * e.km);
    double lb_v = std::log(e.vmax / cfg.bounds_factor);
    double ub_v = std::log(e.vmax * cfg.bounds_factor);
    double lb_k = std::log(e.km / cfg.bounds_factor);
    double ub_k = std::log(e.km * cfg.bounds_factor);

    // Output weights start from one physics solve at the initial basis
    // so the joint descent starts on a sensible surface.
    {
        unpack_all(nets, theta);
        auto fb0 = std::make_shared<FeatureBundle>(eval_bundle(nets, tall));
        OmegaSolution s0 = lagged_fixed_point(
            m, grid, fb0, labels, w,
            std::array<double, 2>{std::exp(x[0]), std::exp(x[1])});
        omega = s0.omega;
    }

    AdamState opt_t(int(theta.size())), opt_w(S * H), opt_a(2);
    JointResult res;
    MatrixXd P;

    for (int it = 0; it < cfg.n_iters; ++it) {
        unpack_all(nets, theta);
        auto fb =
            std::make_shared<FeatureBundle>(forward_all(nets, tall, caches));
        P = fields(*fb, labels, omega, 0, NG + 1);
        MatrixXd dP = fields(*fb, labels, omega, 0, NG + 1, true);
        std::array<double, 2> vk{std::exp(x[0]), std::exp(x[1])};

        LinearSystem sys;
        sys.S = S;
        sys.H = H;
        sys.n_ode = NG;
        sys.w = w;
        sys.labels = labels;
        sys.feats = fb;
        sys.u0 = u0;
        sys.tab = lagged_table(m, ot, P.bottomRows(NG), vk);

        MatrixXd R = ode_residual(sys, P, dP);
        VectorXd r0 = P.row(0).transpose() - u0;
        MatrixXd Fven = fb->branch[labels[m.venous]].F.middleRows(NG + 1, NOB);
        VectorXd rdo = Fven * omega.segment(m.venous * H, H) - obs.values;

        double loss = w.lam_ode * R.squaredNorm() / NG +
                      w.lam_ic * r0.squaredNorm() +
                      cfg.lam_obs * rdo.squaredNorm() / NOB;
        res.final_loss = loss;

        FieldAdjoints adj;
        adj.F.assign(K, MatrixXd::Zero(tall.size(), H));
        adj.dF.assign(K, MatrixXd::Zero(tall.size(), H));
        MatrixXd GR = (2.0 * w.lam_ode / NG) * R;
        VectorXd gw = VectorXd::Zero(S * H);
        for (int s = 0; s < S; ++s) {
            int lab = labels[s];
            VectorXd om_s = omega.segment(s * H, H);
            adj.dF[lab].middleRows(1, NG).noalias() +=
                GR.col(s) * om_s.transpose();
            gw.segment(s * H, H).noalias() +=
                fb->branch[lab].dF.middleRows(1, NG).transpose() * GR.col(s);
            for (const auto& en : sys.tab.rows[s]) {
                int labj = labels[en.col];
                VectorXd c = GR.col(s).cwiseProduct(en.coef);
                adj.F[labj].middleRows(1, NG).noalias() -=
                    c * omega.segment(en.col * H, H).transpose();
                gw.segment(en.col * H, H).noalias() -=
                    fb->branch[labj].F.middleRows(1, NG).transpose() * c;
            }
            adj.F[lab].row(0) += 2.0 * w.lam_ic * r0[s] * om_s.transpose();
            gw.segment(s * H, H) += 2.0 * w.lam_ic * r0[s] *
                                    fb->branch[lab].F.row(0).transpose();
        }
        {
            int lab = labels[m.venous];
            double c = 2.0 * cfg.lam_obs / NOB;
            adj.F[lab].middleRows(NG + 1, NOB).noalias() +=
                c * rdo * omega.segment(m.venous * H, H).transpose();
            gw.segment(m.venous * H, H).noalias() +=
                c * Fven.transpose() * rdo;
        }
        VectorXd gt = backprop_all(nets, caches, adj);

        VectorXd cliv = P.col(m.liver).tail(NG);
        VectorXd dcl(NG), dck(NG);
        for (int i = 0; i < NG; ++i)
            metab_coef_dlog(m, cliv[i], vk[0], vk[1], dcl[i], dck[i]);
        VectorXd wr = (2.0 * w.lam_ode / NG) *
                      (R.col(m.liver) - R.col(m.liver_met))
                          .cwiseProduct(cliv);
        VectorXd ga(2);
        ga << wr.dot(dcl), wr.dot(dck);

        adam_step(opt_t, theta, gt, cfg.lr_theta);
        adam_step(opt_w, omega, gw, cfg.lr_omega);
        adam_step(opt_a, x, ga, cfg.lr_alpha);
        x[0] = std::clamp(x[0], lb_v, ub_v);
        x[1] = std::clamp(x[1], lb_k, ub_k);
    }
    res.vmax = std::exp(x[0]);
    res.km = std::exp(x[1]);
    res.P = P;
    return res;
}

}  // namespace metapinn

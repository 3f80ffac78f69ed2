#include "metapinn/assembly.hpp"

#include "metapinn/csvio.hpp"
#include "metapinn/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace metapinn {

CollocationGrid CollocationGrid::uniform(double horizon, int n) {
    if (horizon <= 0 || n < 1)
        throw ValidationError("CollocationGrid: need horizon > 0, n >= 1");
    CollocationGrid g;
    g.all.resize(n + 1);
    for (int i = 0; i <= n; ++i) g.all[i] = horizon * i / n;
    return g;
}

long LinearSystem::n_rows() const {
    long r = long(S) * n_ode + S;
    for (const auto& d : data) r += d.y.size();
    return r;
}

namespace {

// Row-major list of the columns touched by state s's ODE rows, the self
// column always present (it carries dF).
std::vector<int> row_columns(const LaggedTable& tab, int s) {
    std::vector<int> cols;
    bool has_self = false;
    for (const auto& e : tab.rows[s]) {
        cols.push_back(e.col);
        if (e.col == s) has_self = true;
    }
    if (!has_self) {
        cols.push_back(s);
        std::sort(cols.begin(), cols.end());
    }
    return cols;
}

}  // namespace

LinearSystem assemble(std::shared_ptr<const FeatureBundle> feats,
                      const LaggedTable& tab, const std::vector<int>& labels,
                      const VectorXd& u0, const Weights& w,
                      const std::vector<DataBlock>& data) {
    if (!feats || feats->branch.empty())
        throw ValidationError("assemble: empty feature bundle");
    const int S = int(labels.size());
    const int H = int(feats->branch[0].F.cols());
    const int n = int(tab.src.rows());
    if (int(tab.rows.size()) != S)
        throw ValidationError("assemble: table/labels size mismatch");
    if (int(feats->times.size()) < n + 1)
        throw ValidationError("assemble: bundle too short for the grid");
    if (u0.size() != S) throw ValidationError("assemble: u0 size mismatch");
    for (int l : labels)
        if (l < 0 || l >= int(feats->branch.size()))
            throw ValidationError("assemble: label out of range");
    for (const auto& d : data) {
        if (d.state < 0 || d.state >= S)
            throw ValidationError("assemble: data state out of range");
        if (d.row_begin < 0 ||
            d.row_begin + d.y.size() > feats->times.size())
            throw ValidationError("assemble: data rows out of range");
    }

    LinearSystem sys;
    sys.S = S;
    sys.H = H;
    sys.n_ode = n;
    sys.w = w;
    sys.labels = labels;
    sys.feats = feats;
    sys.tab = tab;
    sys.u0 = u0;
    sys.data = data;
    sys.AtA = MatrixXd::Zero(S * H, S * H);
    sys.Atb = VectorXd::Zero(S * H);

    const double w2_ode = w.lam_ode * w.lam_ode;
    if (w.lam_ode > 0) {
        std::vector<MatrixXd> U;
        for (int s = 0; s < S; ++s) {
            auto cols = row_columns(tab, s);
            U.assign(cols.size(), MatrixXd());
            for (size_t a = 0; a < cols.size(); ++a) {
                int j = cols[a];
                U[a] = MatrixXd::Zero(n, H);
                for (const auto& e : tab.rows[s])
                    if (e.col == j)
                        U[a] -= e.coef.asDiagonal() *
                                feats->branch[labels[j]].F.middleRows(1, n);
                if (j == s)
                    U[a] += feats->branch[labels[s]].dF.middleRows(1, n);
            }
            for (size_t a = 0; a < cols.size(); ++a)
                for (size_t b = a; b < cols.size(); ++b) {
                    MatrixXd blk = w2_ode * (U[a].transpose() * U[b]);
                    sys.AtA.block(cols[a] * H, cols[b] * H, H, H) += blk;
                    if (b != a)
                        sys.AtA.block(cols[b] * H, cols[a] * H, H, H) +=
                            blk.transpose();
                }
            if ((tab.src.col(s).array() != 0).any()) {
                for (size_t a = 0; a < cols.size(); ++a)
                    sys.Atb.segment(cols[a] * H, H) +=
                        w2_ode * (U[a].transpose() * tab.src.col(s));
            }
        }
    }

    const double w2_ic = w.lam_ic * w.lam_ic;
    for (int s = 0; s < S; ++s) {
        VectorXd F0 = feats->branch[labels[s]].F.row(0).transpose();
        sys.AtA.block(s * H, s * H, H, H) += w2_ic * (F0 * F0.transpose());
        if (u0[s] != 0) sys.Atb.segment(s * H, H) += w2_ic * u0[s] * F0;
    }

    for (const auto& d : data) {
        double w2 = d.lam * d.lam;
        auto Fo = feats->branch[labels[d.state]].F.middleRows(d.row_begin,
                                                              d.y.size());
        sys.AtA.block(d.state * H, d.state * H, H, H) +=
            w2 * (Fo.transpose() * Fo);
        sys.Atb.segment(d.state * H, H) += w2 * (Fo.transpose() * d.y);
    }
    return sys;
}

void dense_system(const LinearSystem& sys, MatrixXd& A, VectorXd& b) {
    const int S = sys.S, H = sys.H, n = sys.n_ode;
    A = MatrixXd::Zero(sys.n_rows(), S * H);
    b = VectorXd::Zero(sys.n_rows());
    long r = 0;
    for (int s = 0; s < S; ++s) {
        A.block(r, s * H, n, H) =
            sys.w.lam_ode * sys.feats->branch[sys.labels[s]].dF.middleRows(1, n);
        for (const auto& e : sys.tab.rows[s])
            A.block(r, e.col * H, n, H) -=
                sys.w.lam_ode *
                (e.coef.asDiagonal() *
                 sys.feats->branch[sys.labels[e.col]].F.middleRows(1, n));
        b.segment(r, n) = sys.w.lam_ode * sys.tab.src.col(s);
        r += n;
    }
    for (int s = 0; s < S; ++s) {
        A.block(r, s * H, 1, H) =
            sys.w.lam_ic * sys.feats->branch[sys.labels[s]].F.row(0);
        b[r] = sys.w.lam_ic * sys.u0[s];
        ++r;
    }
    for (const auto& d : sys.data) {
        int nb = int(d.y.size());
        A.block(r, d.state * H, nb, H) =
            d.lam *
            sys.feats->branch[sys.labels[d.state]].F.middleRows(d.row_begin,
                                                                nb);
        b.segment(r, nb) = d.lam * d.y;
        r += nb;
    }
}

VectorXd RidgeSolution::solve(const VectorXd& rhs) const {
    if (svd_fallback) {
        if (!eig) throw NumericError("RidgeSolution: no factor stored");
        return eig->first *
               (eig->second.asDiagonal() * (eig->first.transpose() * rhs));
    }
    if (!llt) throw NumericError("RidgeSolution: no factor stored");
    return llt->solve(rhs);
}

RidgeSolution ridge_solve_normal(const MatrixXd& AtA, const VectorXd& Atb,
                                 double lambda) {
    if (AtA.rows() != AtA.cols() || AtA.rows() != Atb.size())
        throw ValidationError("ridge_solve_normal: shape mismatch");
    if (lambda < 0) throw ValidationError("ridge_solve_normal: lambda < 0");
    RidgeSolution out;
    out.lambda = lambda;
    MatrixXd M = AtA;
    M.diagonal().array() += lambda;
    out.llt = std::make_shared<Eigen::LLT<MatrixXd>>(M);
    if (out.llt->info() == Eigen::Success) {
        out.omega = out.llt->solve(Atb);
    } else {
        // Semidefinite edge (lambda=0 with rank-deficient system):
        // eigen-decompose and drop the null space.
        out.svd_fallback = true;
        out.llt.reset();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
        if (es.info() != Eigen::Success)
            throw NumericError("ridge_solve_normal: eigensolver failed");
        VectorXd d = es.eigenvalues();
        double cutoff = d.cwiseAbs().maxCoeff() * 1e-13;
        VectorXd inv = VectorXd::Zero(d.size());
        for (int i = 0; i < d.size(); ++i)
            if (d[i] > cutoff) inv[i] = 1.0 / d[i];
        out.eig = std::make_shared<std::pair<MatrixXd, VectorXd>>(
            es.eigenvectors(), inv);
        out.omega = out.solve(Atb);
    }
    double scale = Atb.norm();
    out.resid_rel = scale > 0 ? (M * out.omega - Atb).norm() / scale : 0.0;
    return out;
}

RidgeSolution ridge_solve(const MatrixXd& A, const VectorXd& b,
                          double lambda) {
    if (A.rows() != b.size())
        throw ValidationError("ridge_solve: shape mismatch");
    MatrixXd AtA = A.transpose() * A;
    VectorXd Atb = A.transpose() * b;
    return ridge_solve_normal(AtA, Atb, lambda);
}

MatrixXd fields(const FeatureBundle& fb, const std::vector<int>& labels,
                const VectorXd& omega, int row0, int n, bool deriv) {
    const int S = int(labels.size());
    const int H = int(fb.branch[0].F.cols());
    if (omega.size() != S * H)
        throw ValidationError("fields: omega size mismatch");
    if (row0 < 0 || row0 + n > fb.times.size())
        throw ValidationError("fields: rows out of range");
    MatrixXd out(n, S);
    for (int s = 0; s < S; ++s) {
        const MatrixXd& M =
            deriv ? fb.branch[labels[s]].dF : fb.branch[labels[s]].F;
        out.col(s) = M.middleRows(row0, n) * omega.segment(s * H, H);
    }
    return out;
}

MatrixXd ode_residual(const LinearSystem& sys, const MatrixXd& P,
                      const MatrixXd& dP, bool subtract_src) {
    const int n = sys.n_ode;
    MatrixXd R = dP.middleRows(1, n);
    for (int s = 0; s < sys.S; ++s)
        for (const auto& e : sys.tab.rows[s])
            R.col(s) -= e.coef.cwiseProduct(P.col(e.col).segment(1, n));
    if (subtract_src) R -= sys.tab.src;
    return R;
}

namespace {

LossBreakdown loss_terms(const LinearSystem& sys, const VectorXd& omega,
                         bool with_ic) {
    LossBreakdown lb;
    MatrixXd P = fields(*sys.feats, sys.labels, omega, 0, sys.n_ode + 1);
    MatrixXd dP =
        fields(*sys.feats, sys.labels, omega, 0, sys.n_ode + 1, true);
    MatrixXd R = ode_residual(sys, P, dP);
    lb.ode = sys.w.lam_ode * R.squaredNorm() / sys.n_ode;
    if (with_ic) {
        VectorXd r0 = P.row(0).transpose() - sys.u0;
        lb.ic = sys.w.lam_ic * r0.squaredNorm();
    }
    for (const auto& d : sys.data) {
        int nb = int(d.y.size());
        VectorXd ro = sys.feats->branch[sys.labels[d.state]].F.middleRows(
                          d.row_begin, nb) *
                          omega.segment(d.state * sys.H, sys.H) -
                      d.y;
        lb.data += d.lam * ro.squaredNorm() / nb;
    }
    lb.total = lb.ode + lb.ic + lb.data;
    return lb;
}

}  // namespace

LossBreakdown pinn_loss(const LinearSystem& sys, const VectorXd& omega) {
    return loss_terms(sys, omega, true);
}

LossBreakdown inverse_loss(const LinearSystem& sys, const VectorXd& omega) {
    return loss_terms(sys, omega, false);
}

OmegaSolution lagged_fixed_point(
    const PbpkModel& m, const CollocationGrid& grid,
    std::shared_ptr<const FeatureBundle> feats, const std::vector<int>& labels,
    const Weights& w, const std::optional<std::array<double, 2>>& vk,
    const VectorXd* g_ode, const std::vector<DataBlock>& data,
    const MatrixXd* warm, const LaggedOptions& opts) {
    const int S = m.n_states;
    const int n = grid.n_ode();
    if (int(labels.size()) != S)
        throw ValidationError("lagged_fixed_point: labels size mismatch");
    VectorXd u0 = initial_state(m);
    VectorXd ode_times = grid.ode_times();
    MatrixXd frozen;
    if (warm) {
        if (warm->rows() != n || warm->cols() != S)
            throw ValidationError("lagged_fixed_point: warm shape mismatch");
        frozen = *warm;
    } else {
        frozen = u0.transpose().replicate(n, 1);
    }

    double scale = std::max(1.0, u0.cwiseAbs().maxCoeff());
    OmegaSolution out;
    MatrixXd last;
    for (int it = 0; it < opts.max_iter; ++it) {
        LaggedTable tab = lagged_table(m, ode_times, frozen, vk, g_ode);
        out.sys = assemble(feats, tab, labels, u0, w, data);
        double lam = w.ridge_rel * out.sys.AtA.diagonal().mean();
        out.ridge = ridge_solve_normal(out.sys.AtA, out.sys.Atb, lam);
        out.omega = out.ridge.omega;
        out.P = fields(*feats, labels, out.omega, 0, n + 1);
        out.iterations = it + 1;
        if (!out.P.allFinite())
            throw NumericError("lagged_fixed_point: non-finite prediction");
        double pmax = out.P.cwiseAbs().maxCoeff();
        if (pmax > opts.divergence * scale)
            throw NumericError("lagged_fixed_point: diverged (|P| > " +
                               format_double(opts.divergence * scale) + ")");
        frozen = out.P.bottomRows(n);
        if (it > 0) {
            out.final_change = (out.P - last).cwiseAbs().maxCoeff() /
                               (pmax + 1e-30);
            if (out.final_change < opts.tol) {
                out.converged = true;
                break;
            }
        }
        last = out.P;
    }
    // Refresh coefficients at the returned trajectory so residuals and
    // gradients are evaluated at the fixed point itself.
    out.sys.tab = lagged_table(m, ode_times, frozen, vk, g_ode);
    return out;
}

}  // namespace metapinn

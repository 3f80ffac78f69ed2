#include "metapinn/baseline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace metapinn {

namespace {

VectorXd residual_at(const PbpkModel& m, const ObservationSet& obs,
                     double horizon, const Eigen::Vector2d& x,
                     const IntegrateOptions& opts) {
    RhsOverride ov;
    ov.vk = std::array<double, 2>{std::exp(x[0]), std::exp(x[1])};
    Trajectory tr =
        integrate(m, initial_state(m), horizon, obs.times, ov, opts);
    return tr.states.col(m.venous) - obs.values;
}

Eigen::Vector2d project(const Eigen::Vector2d& x, const Eigen::Vector2d& lo,
                        const Eigen::Vector2d& hi) {
    Eigen::Vector2d p;
    for (int i = 0; i < 2; ++i) p[i] = std::clamp(x[i], lo[i], hi[i]);
    return p;
}

// Gradient components pointing out of the box at an active bound carry
// no feasible descent and are zeroed.
double projected_grad_norm(const Eigen::Vector2d& g, const Eigen::Vector2d& x,
                           const Eigen::Vector2d& lo,
                           const Eigen::Vector2d& hi) {
    double s = 0;
    for (int i = 0; i < 2; ++i) {
        bool blocked = (x[i] <= lo[i] && g[i] > 0) ||
                       (x[i] >= hi[i] && g[i] < 0);
        if (!blocked) s += g[i] * g[i];
    }
    return std::sqrt(s);
}

}  // namespace

NlsResult nls_fit(const PbpkModel& m, const ObservationSet& obs,
                  double horizon, const NlsConfig& cfg) {
    if (m.mask.kind != MaskKind::Parameter)
        throw ValidationError("nls_fit: parameter mask required");
    const auto& e = m.drug.enzymes[m.mask.enzyme];
    Eigen::Vector2d lo(std::log(e.vmax / cfg.bounds_factor),
                       std::log(e.km / cfg.bounds_factor));
    Eigen::Vector2d hi(std::log(e.vmax * cfg.bounds_factor),
                       std::log(e.km * cfg.bounds_factor));
    Eigen::Vector2d x(std::log(cfg.init_factor * e.vmax),
                      std::log(cfg.init_factor * e.km));
    if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any())
        throw ValidationError("nls_fit: initial guess outside bounds");

    VectorXd r = residual_at(m, obs, horizon, x, cfg.integ);
    double cost = r.squaredNorm();
    NlsResult res;
    res.residual_history.push_back(cost);
    double mu = cfg.mu0;
    double g0 = -1;

    for (int it = 0; it < cfg.max_iters; ++it) {
        Eigen::Matrix<double, Eigen::Dynamic, 2> J(r.size(), 2);
        for (int j = 0; j < 2; ++j) {
            Eigen::Vector2d xh = x;
            xh[j] += cfg.fd_step;
            J.col(j) = (residual_at(m, obs, horizon, xh, cfg.integ) - r) /
                       cfg.fd_step;
        }
        Eigen::Matrix2d JtJ = J.transpose() * J;
        Eigen::Vector2d Jtr = J.transpose() * r;
        double pg = projected_grad_norm(2.0 * Jtr, x, lo, hi);
        if (g0 < 0) g0 = std::max(pg, 1e-300);
        res.grad_rel = pg / g0;

        bool accepted = false;
        for (int tries = 0; tries < 25; ++tries) {
            Eigen::Matrix2d A = JtJ;
            for (int d = 0; d < 2; ++d)
                A(d, d) += mu * std::max(JtJ(d, d), 1e-12);
            Eigen::Vector2d delta = A.ldlt().solve(-Jtr);
            Eigen::Vector2d xt = project(x + delta, lo, hi);
            VectorXd rt;
            bool ok = true;
            try {
                rt = residual_at(m, obs, horizon, xt, cfg.integ);
            } catch (const NumericError&) {
                ok = false;
            }
            double ct = ok ? rt.squaredNorm() : cost;
            if (ok && ct < cost) {
                double step = (xt - x).norm();
                x = xt;
                r = rt;
                cost = ct;
                res.residual_history.push_back(cost);
                mu = std::max(mu / 3.0, 1e-12);
                accepted = true;
                res.iters = it + 1;
                if (step < cfg.step_tol) res.converged = true;
                break;
            }
            mu *= 4.0;
            if (mu > 1e16)
                throw NumericError("nls_fit: damping exhausted");
        }
        if (!accepted || res.converged) {
            res.converged = res.converged || !accepted;
            break;
        }
    }
    res.vmax = std::exp(x[0]);
    res.km = std::exp(x[1]);
    {
        Eigen::Matrix<double, Eigen::Dynamic, 2> J(r.size(), 2);
        for (int j = 0; j < 2; ++j) {
            Eigen::Vector2d xh = x;
            xh[j] += cfg.fd_step;
            J.col(j) = (residual_at(m, obs, horizon, xh, cfg.integ) - r) /
                       cfg.fd_step;
        }
        Eigen::Vector2d g = 2.0 * (J.transpose() * r);
        res.grad_rel = projected_grad_norm(g, x, lo, hi) / std::max(g0, 1e-300);
    }
    return res;
}

}  // namespace metapinn

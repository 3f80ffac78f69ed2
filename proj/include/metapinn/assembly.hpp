#pragma once

#include "metapinn/common.hpp"
#include "metapinn/model.hpp"
#include "metapinn/representation.hpp"

#include <Eigen/Cholesky>

#include <memory>
#include <optional>
#include <vector>

namespace metapinn {

// Collocation times: t=0 carries the initial-condition rows, the n
// interior points carry ODE residual rows.
struct CollocationGrid {
    VectorXd all;  // [0, t_1 .. t_n], strictly increasing

    int n_ode() const { return int(all.size()) - 1; }
    VectorXd ode_times() const { return all.tail(n_ode()); }
    static CollocationGrid uniform(double horizon, int n);
};

struct Weights {
    double lam_ode = 1.0;
    double lam_ic = 100.0;
    double lam_data = 100.0;
    double ridge_rel = 1e-10;
};

// Observation rows included in the least-squares system: bundle rows
// [row_begin, row_begin+n) of the branch serving `state` against y.
struct DataBlock {
    int state = 0;
    int row_begin = 0;
    VectorXd y;
    double lam = 100.0;
};

// Normal equations of the stacked system. Unknowns are per-state weight
// blocks of size H over the shared cluster features; the dense matrix is
// (S*H)^2 with block sparsity given by the ODE coupling pattern.
struct LinearSystem {
    int S = 0, H = 0, n_ode = 0;
    Weights w;
    std::vector<int> labels;
    std::shared_ptr<const FeatureBundle> feats;
    LaggedTable tab;  // over ode times; src spans the same rows
    VectorXd u0;
    std::vector<DataBlock> data;
    MatrixXd AtA;
    VectorXd Atb;

    long n_rows() const;
};

LinearSystem assemble(std::shared_ptr<const FeatureBundle> feats,
                      const LaggedTable& tab, const std::vector<int>& labels,
                      const VectorXd& u0, const Weights& w,
                      const std::vector<DataBlock>& data = {});

// Explicit row form of the same system (small instances / tests).
void dense_system(const LinearSystem& sys, MatrixXd& A, VectorXd& b);

struct RidgeSolution {
    VectorXd omega;
    double lambda = 0;
    double resid_rel = 0;  // |M w - Atb| / |Atb|
    bool svd_fallback = false;
    std::shared_ptr<Eigen::LLT<MatrixXd>> llt;
    std::shared_ptr<std::pair<MatrixXd, VectorXd>> eig;  // fallback (V, 1/d)

    VectorXd solve(const VectorXd& rhs) const;  // apply M^{-1}
};

RidgeSolution ridge_solve_normal(const MatrixXd& AtA, const VectorXd& Atb,
                                 double lambda);
RidgeSolution ridge_solve(const MatrixXd& A, const VectorXd& b,
                          double lambda);

// Per-state predictions over bundle rows [row0, row0+n).
MatrixXd fields(const FeatureBundle& fb, const std::vector<int>& labels,
                const VectorXd& omega, int row0, int n, bool deriv = false);

// ODE residual operator on the interior rows: R = dP - L P - src.
MatrixXd ode_residual(const LinearSystem& sys, const MatrixXd& P,
                      const MatrixXd& dP, bool subtract_src = true);

struct LossBreakdown {
    double total = 0, ode = 0, ic = 0, data = 0;
};

LossBreakdown pinn_loss(const LinearSystem& sys, const VectorXd& omega);
LossBreakdown inverse_loss(const LinearSystem& sys, const VectorXd& omega);

struct LaggedOptions {
    double tol = 1e-6;
    int max_iter = 20;
    double divergence = 1e6;
};

struct OmegaSolution {
    VectorXd omega;
    MatrixXd P;  // (n_ode+1) x S over the grid rows of the bundle
    int iterations = 0;
    double final_change = 0;
    bool converged = false;
    RidgeSolution ridge;
    LinearSystem sys;
};

// Fixed point of the frozen-coefficient linearization: assemble at the
// previous trajectory, ridge-solve, repeat until the predicted states
// move less than tol (relative, max norm). The returned system carries
// coefficients refreshed at the returned trajectory; the factor is the
// one from the final solve (they differ by less than tol).
OmegaSolution lagged_fixed_point(
    const PbpkModel& m, const CollocationGrid& grid,
    std::shared_ptr<const FeatureBundle> feats, const std::vector<int>& labels,
    const Weights& w, const std::optional<std::array<double, 2>>& vk = {},
    const VectorXd* g_ode = nullptr, const std::vector<DataBlock>& data = {},
    const MatrixXd* warm = nullptr, const LaggedOptions& opts = {});

}  // namespace metapinn

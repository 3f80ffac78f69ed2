#pragma once

#include "metapinn/common.hpp"
#include "metapinn/model.hpp"
#include "metapinn/solver.hpp"

#include <vector>

namespace metapinn {

// Solver-in-the-loop bounded nonlinear least squares on the masked
// (vmax, km): Levenberg-Marquardt in log space with projection to a
// bounds box, Jacobian by forward differences of the integrated venous
// curve at the observation times.
struct NlsConfig {
    int max_iters = 200;
    double step_tol = 1e-8;
    double fd_step = 1e-6;     // log-space forward difference
    double mu0 = 1e-3;         // initial damping
    double bounds_factor = 100.0;
    double init_factor = 4.0;
    IntegrateOptions integ;
};

struct NlsResult {
    double vmax = 0, km = 0;
    std::vector<double> residual_history;  // accepted-step |r|^2
    int iters = 0;
    bool converged = false;
    double grad_rel = 0;  // projected gradient vs initial
};

NlsResult nls_fit(const PbpkModel& m, const ObservationSet& obs,
                  double horizon, const NlsConfig& cfg);

}  // namespace metapinn

#pragma once

#include "metapinn/common.hpp"
#include "metapinn/model.hpp"

#include <string>

namespace metapinn {

struct IntegrateOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    long max_steps = 2000000;
};

struct Trajectory {
    VectorXd times;
    MatrixXd states;  // times.size() x n_states
};

// Initial condition: all zero for IV; oral puts the dose into the
// stomach solid pool.
VectorXd initial_state(const PbpkModel& m);

// Adaptive 5(4) Runge-Kutta with 4th order dense output evaluated at
// `out_times` (ascending, within [0, horizon]). Integration restarts at
// source discontinuities (end of infusion) so no step straddles them.
Trajectory integrate(const PbpkModel& m, const VectorXd& u0, double horizon,
                     const VectorXd& out_times, const RhsOverride& ov = {},
                     const IntegrateOptions& opts = {});

// Fixed-step classic Runge-Kutta, for convergence-order checks.
VectorXd rk4_endpoint(const PbpkModel& m, const VectorXd& u0, double t0,
                      double t1, int n_steps, const RhsOverride& ov = {});

// Largest relative deviation of total mass from the dosing schedule
// (IV: dose*min(t/duration,1); oral: dose for all t).
double mass_balance_error(const PbpkModel& m, const Trajectory& traj);

struct ObservationSet {
    VectorXd times;
    VectorXd values;  // venous concentration, mg/L
    double sigma = 0;
    uint64_t seed = 0;
};

// Multiplicative noise: value = clean*(1 + sigma*z), z standard normal
// drawn in time order from the given seed. Clean values come from the
// trajectory, linearly interpolated when a time falls between grid
// points (exact when the trajectory was evaluated at these times).
ObservationSet sample_observations(const Trajectory& traj, int state,
                                   const VectorXd& times, double sigma,
                                   uint64_t seed);

void write_trajectory_csv(const PbpkModel& m, const Trajectory& traj,
                          const std::string& path);
Trajectory read_trajectory_csv(const PbpkModel& m, const std::string& path);

void write_observations_csv(const ObservationSet& obs,
                            const std::string& path);
ObservationSet read_observations_csv(const std::string& path);

}  // namespace metapinn

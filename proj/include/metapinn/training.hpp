#pragma once

#include "metapinn/assembly.hpp"
#include "metapinn/common.hpp"
#include "metapinn/model.hpp"
#include "metapinn/representation.hpp"
#include "metapinn/solver.hpp"

#include <optional>
#include <vector>

namespace metapinn {

struct AdamState {
    VectorXd m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(int n = 0)
        : m(VectorXd::Zero(n)), v(VectorXd::Zero(n)) {}
};

void adam_step(AdamState& st, VectorXd& x, const VectorXd& g, double lr);

// How the inner ridge solve participates in gradients: Implicit
// differentiates through it (reusing the factorization), Frozen treats
// the solved weights as constants.
enum class GradMode { Implicit, Frozen };

struct TaskConfig {
    double vmax = 0, km = 0;
};

// Log-uniform draws in [nominal/factor, nominal*factor] per slot.
std::vector<TaskConfig> sample_tasks(double vmax_nom, double km_nom, int n,
                                     double range_factor, uint64_t seed);

// Per-branch loss adjoints over all bundle rows.
struct FieldAdjoints {
    std::vector<MatrixXd> F, dF;
};

// Loss of one solved task instance with dense trajectory supervision,
// plus its adjoints with respect to the feature fields. `ysup` spans the
// grid rows (n_ode+1 x S).
LossBreakdown stage1_loss_adjoints(const OmegaSolution& sol,
                                   const MatrixXd& ysup, GradMode mode,
                                   FieldAdjoints& adj);

struct Stage1Config {
    int n_iters = 2000;
    double lr = 0.002;
    GradMode grad_mode = GradMode::Implicit;
    double lr_decay_frac = 0.6;
    double lr_decay = 0.25;
    double early_nmse = 0.0;  // >0 stops once task-0 NMSE drops below
    int check_every = 100;
    LaggedOptions lagged;
};

struct Stage1Result {
    std::vector<BranchNet> nets;
    MatrixXd log;  // iter, task, loss, loss_ode, loss_ic, loss_data
    int iters_run = 0;
    double final_nmse = -1;  // task-0 max per-state NMSE at the last check
};

// Worst per-state normalized squared error between a prediction and a
// reference over matching rows.
double max_state_nmse(const MatrixXd& P, const MatrixXd& ref);

Stage1Result stage1_meta_train(const PbpkModel& m, const CollocationGrid& grid,
                               const std::vector<int>& labels,
                               const Weights& w, std::vector<BranchNet> nets,
                               const std::vector<TaskConfig>& tasks,
                               const Stage1Config& cfg);

struct Stage2Config {
    int n_iters = 1000;
    double lr = 0.05;
    double bounds_factor = 100.0;
    double init_factor = 4.0;
    double prior_weight = 1e-2;
    GradMode grad_mode = GradMode::Implicit;
    LaggedOptions lagged;
    uint64_t aux_seed = 1;
    double gamma = 1.0;
    double aux_box = 50.0;
};

// Calibrated data objective of one solved instance in parameter mode,
// with its gradient in (ln vmax, ln km). Implicit mode differentiates
// through the ridge solve; Frozen scores the residual objective at
// fixed output weights instead.
struct CalObjective {
    double value = 0;
    Eigen::Vector2d grad = Eigen::Vector2d::Zero();
    LossBreakdown parts;
};

CalObjective stage2_objective_params(const PbpkModel& m,
                                     const OmegaSolution& sol,
                                     const MatrixXd& Fven,
                                     const VectorXd& ehat,
                                     const VectorXd& yobs, double vmax,
                                     double km, GradMode mode);

// Same objective in term mode; `jac` maps the 10 net parameters to the
// source values on the interior grid rows.
struct TermObjective {
    double value = 0;
    VectorXd grad;
};

TermObjective stage2_objective_term(const PbpkModel& m,
                                    const OmegaSolution& sol,
                                    const MatrixXd& Fven,
                                    const VectorXd& ehat,
                                    const VectorXd& yobs,
                                    const MatrixXd& jac);

struct Stage2Result {
    double vmax = 0, km = 0;  // parameter mode, best-objective iterate
    AuxNet aux;               // term mode
    VectorXd g_ode;           // recovered term on the interior grid times
    double best_objective = 0;
    int dof = 0;
    MatrixXd trace;  // iter, loss, loss_ode, loss_ic, loss_data, alpha...
    MatrixXd P;      // grid predictions at the best iterate
    VectorXd omega;
};

// Decoupled inverse stage: the branch nets are read-only; only the
// masked unknowns move. The data objective compares predicted venous
// observations, shifted by the nominal-task surrogate error, against the
// measurements; a weak log-space prior toward the nominal values
// regularizes the parameter mode.
Stage2Result stage2_infer(const PbpkModel& m, const CollocationGrid& grid,
                          const std::vector<int>& labels, const Weights& w,
                          const std::vector<BranchNet>& nets,
                          const ObservationSet& obs, const Stage2Config& cfg);

struct JointConfig {
    int n_iters = 2000;
    double lr_theta = 0.002;
    double lr_omega = 0.01;
    double lr_alpha = 0.05;
    double bounds_factor = 100.0;
    double init_factor = 4.0;
    double lam_obs = 100.0;
};

struct JointResult {
    double vmax = 0, km = 0;
    double final_loss = 0;
    MatrixXd P;
};

// Single-stage baseline PINN: network weights, output weights and the
// unknowns descend together on the residual + data loss; coefficients
// refreeze at the current prediction each step, there is no inner solve.
JointResult joint_train(const PbpkModel& m, const CollocationGrid& grid,
                        const std::vector<int>& labels, const Weights& w,
                        std::vector<BranchNet> nets, const ObservationSet& obs,
                        uint64_t seed, const JointConfig& cfg);

}  // namespace metapinn

#pragma once

#include "metapinn/common.hpp"
#include "metapinn/model.hpp"
#include "metapinn/training.hpp"

#include <string>
#include <vector>

namespace metapinn {

// Run configuration, sectioned key=value text. Unknown sections or keys
// are rejected with the full list of valid keys in the message, so a
// typo never silently falls back to a default.
struct RunConfig {
    // [model]
    std::string drug = "theophylline";
    Route route = Route::IV;
    double dose_mg = 300.0;
    double infusion_h = 2.0 / 3.0;
    double horizon_h = 24.0;
    int mask_enzyme = -1;  // -1: drug default slot

    // [grid]
    int grid_n = 200;

    // [net]
    int width = 256;
    std::vector<double> w0{240.0, 10.0};  // per cluster, or one broadcast
    uint64_t seed = 1;
    double gamma = 1.0;

    // [clusters]
    int k = 0;  // 0: route default (2 for IV, 3 for oral)

    // [weights]
    Weights weights;

    // [stage1]
    int s1_n_tasks = 20;
    int s1_n_iters = 2000;
    double s1_range_factor = 4.0;
    double s1_lr = 0.002;
    GradMode s1_grad_mode = GradMode::Implicit;
    double s1_early_nmse = 0.0;
    double s1_lr_decay_frac = 0.6;
    double s1_lr_decay = 0.25;

    // [stage2]
    int s2_n_iters = 1000;
    double s2_lr = 0.05;
    double s2_bounds_factor = 100.0;
    double s2_prior_weight = 1e-2;
    double s2_init_factor = 4.0;
    MaskKind mode = MaskKind::Parameter;  // params | term

    // [obs]
    int obs_n = 10;
    double obs_sigma = 0.05;
    uint64_t obs_seed = 0;  // 0: derived from the master seed
    double obs_t_first = 0.25;
    std::vector<double> obs_times;  // optional explicit schedule

    // [baseline]
    int bl_n_iters = 200;
    double bl_bounds_factor = 100.0;
    double bl_init_factor = 4.0;

    // [report]
    double param_tol = 0.20;
    double term_tol = 0.10;
    double pi_tol = 0.05;

    // [discovery]
    double y_floor = 0.01;

    // [paths]
    std::string output_dir = "out";
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Effective values, every key explicit; parses back to the same config.
std::string config_text(const RunConfig& cfg);
void write_config(const RunConfig& cfg, const std::string& path);

// Derived pieces.
int cluster_count(const RunConfig& cfg);          // resolves k=0
int masked_enzyme_slot(const RunConfig& cfg);     // resolves -1
VectorXd observation_times(const RunConfig& cfg); // explicit or geometric
DoseSchedule dose_schedule(const RunConfig& cfg);

}  // namespace metapinn

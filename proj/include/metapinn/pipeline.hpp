#pragma once

#include "metapinn/config.hpp"
#include "metapinn/training.hpp"

#include <limits>
#include <string>
#include <vector>

namespace metapinn {

// One line of a machine-readable report: informational rows carry a NaN
// threshold and pass=1.
struct ReportRow {
    std::string name;
    double value = 0;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    bool pass = true;
};

void write_report(const std::vector<ReportRow>& rows,
                  const std::string& path);
std::vector<ReportRow> read_report(const std::string& path);
bool all_pass(const std::vector<ReportRow>& rows);

// Command bodies shared by the CLI and the acceptance harness. Each
// writes its artifacts under `dir` and loads any inputs it needs from
// there, so the commands chain across processes. A failure is rethrown
// with the stage name and the artifacts written so far.
void run_simulate(const RunConfig& cfg, const std::string& dir);
void run_cluster(const RunConfig& cfg, const std::string& dir);
void run_train(const RunConfig& cfg, const std::string& dir);
bool run_infer(const RunConfig& cfg, const std::string& dir);
bool run_discover(const RunConfig& cfg, const std::string& dir);
void run_baseline(const RunConfig& cfg, const std::string& dir);
bool run_ablate(const RunConfig& cfg, const std::string& dir);
bool run_pipeline(const RunConfig& cfg, const std::string& dir);

// Synthetic measurements of the nominal (table-value) model at the
// configured times; truth equals the masked slot's table entry.
ObservationSet make_observations(const RunConfig& cfg, const PbpkModel& m);

// Shared plumbing the commands and tests both use.
PbpkModel masked_model(const RunConfig& cfg);
std::vector<TaskConfig> task_set(const RunConfig& cfg, const PbpkModel& m);
std::vector<int> compute_labels(const RunConfig& cfg, const PbpkModel& m,
                                const std::vector<TaskConfig>& tasks);
std::vector<BranchNet> init_nets(const RunConfig& cfg, int k);

}  // namespace metapinn

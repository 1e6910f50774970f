#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "load/app/config.hpp"

namespace load::app {

// Inverse of method_label: "aux[+attn_<policy>][+model_attn_off]". Throws ConfigError.
void apply_method(train::TrainConfig& cfg, const std::string& method);

// Makes cfg.out, writes config.json and trains to the budget. Errors propagate.
std::vector<train::MetricsRow> train_run(const Config& cfg, std::ostream* log);

// One config per task x method x seed; seeds count up from base.train.seed and each run writes
// to base.out/<task>/<method>/seed_<n>. Every config is validated before it is returned.
std::vector<Config> plan_matrix(const Config& base, const std::vector<std::string>& tasks,
                                const std::vector<std::string>& methods, int seeds);

// True when cfg.out holds the same config and a metrics.csv whose last row reached the budget.
bool run_complete(const Config& cfg);

struct MatrixOutcome {
    std::filesystem::path dir;
    int exit_code = 0;
    bool skipped = false;  // already complete
};

// Trains every run in its own child process, at most `jobs` at once, logging to <out>/train.log.
// Completed runs are skipped, so an interrupted matrix resumes where it stopped.
std::vector<MatrixOutcome> run_matrix(const std::vector<Config>& runs, int jobs, std::ostream& log);

}  // namespace load::app

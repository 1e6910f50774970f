#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "load/app/config.hpp"
#include "load/train/trainer.hpp"

namespace load::app {

// Runs of one task that do not share an evaluation grid.
class GridMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunData {
    std::filesystem::path dir;
    std::string task;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<train::MetricsRow> rows;
};

// Reads config.json and metrics.csv from a run directory written by `train`.
RunData load_run(const std::filesystem::path& dir);

// Mean and standard error of eval success over the seeds of one method on one task.
struct Curve {
    std::string task;
    std::string method;
    int seeds = 0;
    std::vector<double> steps;
    std::vector<double> mean;
    std::vector<double> std_error;  // 0 with a single seed
};

// Groups by (task, method), sorted by task then method. Throws GridMismatch when the runs of a
// task differ in their evaluation steps.
std::vector<Curve> aggregate(const std::vector<RunData>& runs);

struct AucEntry {
    std::string task;
    std::string method;
    double auc_percent = 0;
};

// %AUC of every curve against the mean curve of `reference` on the same task; tasks without
// the reference method are left out. NaN when the reference curve has zero area.
std::vector<AucEntry> auc_table(const std::vector<Curve>& curves, const std::string& reference);

std::string curves_svg(const std::string& task, const std::vector<Curve>& curves);
std::string auc_svg(const std::vector<AucEntry>& entries);

// Writes curves_<task>.svg, auc.svg, report.csv (task,method,seeds,step,mean,stderr) and
// auc.csv (task,method,auc_percent) into out_dir. Returns the written paths.
std::vector<std::filesystem::path> write_report(const std::vector<RunData>& runs, const std::filesystem::path& out_dir,
                                                const std::string& reference = "oracle");

}  // namespace load::app

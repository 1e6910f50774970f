#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "load/agent/net.hpp"
#include "load/core/params.hpp"
#include "load/probe/dataset.hpp"

namespace load::probe {

enum class ProbeTarget { Category, Properties, Containment };
inline constexpr ProbeTarget kAllTargets[] = {ProbeTarget::Category, ProbeTarget::Properties,
                                              ProbeTarget::Containment};
std::string to_string(ProbeTarget t);
ProbeTarget parse_probe_target(const std::string& s);

// Raised when a checkpoint has no object encoder or one of the wrong input width.
class EncoderMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Frozen object encoder. Patch encoders read the sample's patch; feature encoders read the
// ground-truth feature row of the target in the next state.
struct Encoder {
    enum class Input { Patch, Features };
    std::string name;
    Input input = Input::Patch;
    // Empty for the identity map over ground-truth features.
    core::ParamGroup params;

    int dim() const;
};

// Takes enc.oracle when present (oracle agents), else enc.obj.
Encoder checkpoint_encoder(std::string name, const core::ParamGroup& params);
Encoder ground_truth_encoder();
Encoder random_encoder(std::uint64_t seed, const agent::AgentConfig& cfg = {});

// n x dim encodings, row-major. Never writes to the encoder's parameters.
std::vector<double> encode(const Encoder& enc, std::span<const LabeledSample> data);

// Average precision of one class: mean over positives of precision at their rank. Ranks sort
// by descending score with ties broken by position. Throws without positives.
double average_precision(std::span<const double> scores, std::span<const char> labels);

// Mean AP over classes given column-wise scores and labels; classes without positives are
// skipped. Throws when no class has a positive.
double map_score(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<char>>& labels);

// Label matrix (n x classes, 0/1) of a target.
std::vector<std::vector<char>> label_columns(std::span<const LabeledSample> data, ProbeTarget target);
int num_classes(ProbeTarget target);

struct ProbeOptions {
    double lr = 0.05;
    int epochs = 2000;
    double train_fraction = 0.8;
    int max_resamples = 100;
};

struct ProbeResult {
    double map = 0;
    int resamples = 0;
    int n_train = 0;
    int n_test = 0;
    // Test-set AP per class; NaN where the test part has no positives.
    std::vector<double> class_ap;
};

// Linear probe on frozen features (n x dim, row-major): seeded split and initialisation,
// full-batch gradient descent on softmax cross-entropy (category) or per-feature binary
// cross-entropy, test-set mAP. A split that leaves some label value out of the training
// part is redrawn, with a warning on `warn`.
ProbeResult train_probe(std::span<const double> features, int dim, std::span<const LabeledSample> data,
                        ProbeTarget target, std::uint64_t seed, const ProbeOptions& opts = {},
                        std::ostream* warn = nullptr);

struct ReportRow {
    std::string encoder;
    ProbeTarget target = ProbeTarget::Category;
    std::uint64_t seed = 0;
    double map = 0;
};

// Every encoder x target x seed.
std::vector<ReportRow> probe_report(std::span<const Encoder> encoders, std::span<const LabeledSample> data,
                                    std::span<const std::uint64_t> seeds, const ProbeOptions& opts = {},
                                    std::ostream* warn = nullptr);

std::string report_header();
void write_report(std::ostream& out, std::span<const ReportRow> rows);

struct Summary {
    double mean = 0;
    double std_error = 0;
    int count = 0;
};
// Mean and standard error of the rows matching encoder and target.
Summary summarize(std::span<const ReportRow> rows, const std::string& encoder, ProbeTarget target);

}  // namespace load::probe

#include "load/probe/probe.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "load/core/graph.hpp"
#include "load/core/rng.hpp"
#include "load/objmodel/model.hpp"

namespace load::probe {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string to_string(ProbeTarget t) {
    switch (t) {
        case ProbeTarget::Category: return "category";
        case ProbeTarget::Properties: return "properties";
        case ProbeTarget::Containment: return "containment";
    }
    return "?";
}

ProbeTarget parse_probe_target(const std::string& s) {
    for (ProbeTarget t : kAllTargets)
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown probe target '" + s + "' (expected category, properties or containment)");
}

namespace {

const std::string kObjFirst = agent::names::kObjEncoder + ".w0";
const std::string kOracleFirst = agent::names::kOracleEncoder + ".w0";

}  // namespace

int Encoder::dim() const {
    if (params.values().empty()) return objmodel::kOracleDim;
    const std::string& prefix = input == Input::Patch ? agent::names::kObjEncoder : agent::names::kOracleEncoder;
    const int depth = agent::dense_stack_depth(params, prefix);
    return params.get(prefix + ".w" + std::to_string(depth - 1)).cols();
}

Encoder checkpoint_encoder(std::string name, const core::ParamGroup& params) {
    Encoder e;
    e.name = std::move(name);
    if (params.contains(kOracleFirst)) {
        e.input = Encoder::Input::Features;
        if (params.get(kOracleFirst).rows() != objmodel::kOracleDim) {
            throw EncoderMismatch("checkpoint " + e.name + ": enc.oracle expects " +
                                  std::to_string(params.get(kOracleFirst).rows()) + " inputs, features have " +
                                  std::to_string(objmodel::kOracleDim));
        }
    } else if (params.contains(kObjFirst)) {
        e.input = Encoder::Input::Patch;
        if (params.get(kObjFirst).rows() != kitchen::kPatchSize) {
            throw EncoderMismatch("checkpoint " + e.name + ": enc.obj expects " +
                                  std::to_string(params.get(kObjFirst).rows()) + " inputs, patches have " +
                                  std::to_string(kitchen::kPatchSize));
        }
    } else {
        throw EncoderMismatch("checkpoint " + e.name + " has no object encoder");
    }
    // Keep only the encoder; probing must not depend on the rest of the network.
    const std::string& prefix = e.input == Encoder::Input::Patch ? agent::names::kObjEncoder
                                                                 : agent::names::kOracleEncoder;
    for (const auto& [key, value] : params.values())
        if (key.rfind(prefix + ".", 0) == 0) e.params.add(key, value);
    return e;
}

Encoder ground_truth_encoder() {
    Encoder e;
    e.name = "ground_truth";
    e.input = Encoder::Input::Features;
    return e;
}

Encoder random_encoder(std::uint64_t seed, const agent::AgentConfig& cfg) {
    core::ParamGroup all;
    agent::init_agent_params(all, cfg, seed);
    Encoder e = checkpoint_encoder("random_init", all);
    return e;
}

std::vector<double> encode(const Encoder& enc, std::span<const LabeledSample> data) {
    const int n = static_cast<int>(data.size());
    if (n == 0) return {};
    const bool patches = enc.input == Encoder::Input::Patch;
    const int in_dim = patches ? kitchen::kPatchSize : objmodel::kOracleDim;
    core::Tensor x(core::Shape{n, in_dim});
    for (int i = 0; i < n; ++i) {
        const LabeledSample& s = data[static_cast<std::size_t>(i)];
        std::vector<core::Real> row;
        if (patches) {
            row = s.patch;
        } else {
            const int id = s.target;
            row = objmodel::oracle_features(s.after, std::span<const int>(&id, 1), false);
        }
        std::copy(row.begin(), row.end(), x.ptr() + static_cast<std::ptrdiff_t>(i) * in_dim);
    }
    if (enc.params.values().empty()) return {x.data().begin(), x.data().end()};
    core::Graph g(false);
    const core::Var in = g.constant(std::move(x));
    const core::Var z = patches ? agent::encode_objects(g, enc.params, in)
                                : agent::dense_stack(g, enc.params, agent::names::kOracleEncoder, in, true);
    const auto vals = z.value().data();
    return {vals.begin(), vals.end()};
}

double average_precision(std::span<const double> scores, std::span<const char> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("average_precision: size mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double sum = 0;
    int hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (!labels[order[k]]) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
    if (hits == 0) throw std::invalid_argument("average_precision: no positive labels");
    return sum / hits;
}

double map_score(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<char>>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("map_score: class count mismatch");
    double sum = 0;
    int classes = 0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        if (std::none_of(labels[c].begin(), labels[c].end(), [](char v) { return v != 0; })) continue;
        sum += average_precision(scores[c], labels[c]);
        ++classes;
    }
    if (classes == 0) throw std::invalid_argument("map_score: no class has a positive label");
    return sum / classes;
}

int num_classes(ProbeTarget target) {
    switch (target) {
        case ProbeTarget::Category: return kitchen::kNumCategories;
        case ProbeTarget::Properties: return kNumProperties;
        case ProbeTarget::Containment: return kNumContainment;
    }
    return 0;
}

std::vector<std::vector<char>> label_columns(std::span<const LabeledSample> data, ProbeTarget target) {
    const int c = num_classes(target);
    std::vector<std::vector<char>> cols(static_cast<std::size_t>(c), std::vector<char>(data.size(), 0));
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Labels& l = data[i].labels;
        switch (target) {
            case ProbeTarget::Category: cols[static_cast<std::size_t>(l.category)][i] = 1; break;
            case ProbeTarget::Properties:
                for (int k = 0; k < kNumProperties; ++k) cols[static_cast<std::size_t>(k)][i] = l.properties[k];
                break;
            case ProbeTarget::Containment:
                for (int k = 0; k < kNumContainment; ++k) cols[static_cast<std::size_t>(k)][i] = l.containment[k];
                break;
        }
    }
    return cols;
}

namespace {

// Every label value seen in the data must also be seen in the training part.
bool split_covers(const std::vector<std::vector<char>>& cols, std::span<const std::size_t> train, bool binary) {
    for (const auto& col : cols) {
        const bool any_pos = std::any_of(col.begin(), col.end(), [](char v) { return v != 0; });
        const bool any_neg = std::any_of(col.begin(), col.end(), [](char v) { return v == 0; });
        bool pos = false;
        bool neg = false;
        for (std::size_t i : train) (col[i] ? pos : neg) = true;
        if (any_pos && !pos) return false;
        if (binary && any_neg && !neg) return false;
    }
    return true;
}

Matrix gather(std::span<const double> features, int dim, std::span<const std::size_t> rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(r), j) = features[rows[r] * dim + j];
    return m;
}

Matrix gather_labels(const std::vector<std::vector<char>>& cols, std::span<const std::size_t> rows) {
    Matrix y(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            y(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cols[c][rows[r]];
    return y;
}

// Softmax over rows (category) or elementwise logistic (binary targets).
Matrix activate(const Matrix& logits, bool softmax) {
    if (!softmax) return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
    Matrix p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        p.row(r).array() -= p.row(r).maxCoeff();
        p.row(r) = p.row(r).array().exp().matrix();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

}  // namespace

ProbeResult train_probe(std::span<const double> features, int dim, std::span<const LabeledSample> data,
                        ProbeTarget target, std::uint64_t seed, const ProbeOptions& opts, std::ostream* warn) {
    const std::size_t n = data.size();
    if (dim <= 0 || features.size() != n * static_cast<std::size_t>(dim))
        throw std::invalid_argument("train_probe: features must be n x dim");
    if (n < 2) throw std::invalid_argument("train_probe: need at least two samples");
    const bool softmax = target == ProbeTarget::Category;
    const auto cols = label_columns(data, target);

    core::Rng split_rng(core::mix_seed(seed, 1));
    const std::size_t n_train =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(opts.train_fraction * static_cast<double>(n))),
                                1, n - 1);
    std::vector<std::size_t> order(n);
    ProbeResult result;
    for (;; ++result.resamples) {
        std::iota(order.begin(), order.end(), 0);
        split_rng.shuffle(order);
        if (split_covers(cols, std::span<const std::size_t>(order).first(n_train), !softmax)) break;
        if (result.resamples >= opts.max_resamples)
            throw std::runtime_error("train_probe: no split covers every label after " +
                                     std::to_string(opts.max_resamples) + " draws");
        if (warn)
            *warn << "warning: " << to_string(target) << " probe (seed " << seed
                  << "): split leaves a label out of training, resampling\n";
    }
    const std::span<const std::size_t> train_rows = std::span<const std::size_t>(order).first(n_train);
    const std::span<const std::size_t> test_rows = std::span<const std::size_t>(order).subspan(n_train);
    // Features are standardised with training statistics (constant columns are only centred).
    Matrix x = gather(features, dim, train_rows);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::RowVectorXd inv_std(dim);
    for (int j = 0; j < dim; ++j) {
        const double sd = std::sqrt((x.col(j).array() - mean(j)).square().mean());
        inv_std(j) = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
    auto standardise = [&](Matrix& m) {
        m.rowwise() -= mean;
        m.array().rowwise() *= inv_std.array();
    };
    standardise(x);
    const Matrix y = gather_labels(cols, train_rows);

    core::Rng init_rng(core::mix_seed(seed, 2));
    const Eigen::Index c = static_cast<Eigen::Index>(cols.size());
    Matrix w(dim, c);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.01 * init_rng.normal();
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(c);

    const double scale = 1.0 / static_cast<double>(n_train);
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Matrix logits = x * w;
        logits.rowwise() += b;
        const Matrix g = (activate(logits, softmax) - y) * scale;
        w.noalias() -= opts.lr * (x.transpose() * g);
        b -= opts.lr * g.colwise().sum();
    }

    Matrix x_test = gather(features, dim, test_rows);
    standardise(x_test);
    Matrix logits = x_test * w;
    logits.rowwise() += b;
    const Matrix p = activate(logits, softmax);
    std::vector<std::vector<double>> scores(cols.size());
    std::vector<std::vector<char>> test_labels(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
        for (std::size_t r = 0; r < test_rows.size(); ++r) {
            scores[k].push_back(p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
            test_labels[k].push_back(cols[k][test_rows[r]]);
        }
    }
    result.map = map_score(scores, test_labels);
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const bool any = std::any_of(test_labels[k].begin(), test_labels[k].end(), [](char v) { return v != 0; });
        result.class_ap.push_back(any ? average_precision(scores[k], test_labels[k])
                                      : std::numeric_limits<double>::quiet_NaN());
    }
    result.n_train = static_cast<int>(n_train);
    result.n_test = static_cast<int>(test_rows.size());
    return result;
}

std::vector<ReportRow> probe_report(std::span<const Encoder> encoders, std::span<const LabeledSample> data,
                                    std::span<const std::uint64_t> seeds, const ProbeOptions& opts,
                                    std::ostream* warn) {
    std::vector<ReportRow> rows;
    for (const Encoder& enc : encoders) {
        const std::vector<double> feats = encode(enc, data);
        for (ProbeTarget t : kAllTargets) {
            for (std::uint64_t s : seeds) {
                const ProbeResult r = train_probe(feats, enc.dim(), data, t, s, opts, warn);
                rows.push_back({enc.name, t, s, r.map});
            }
        }
    }
    return rows;
}

std::string report_header() { return "encoder,target,seed,map"; }

void write_report(std::ostream& out, std::span<const ReportRow> rows) {
    out << report_header() << '\n';
    std::ostringstream line;
    for (const auto& r : rows) {
        line.str("");
        line.precision(17);
        line << r.encoder << ',' << to_string(r.target) << ',' << r.seed << ',' << r.map;
        out << line.str() << '\n';
    }
}

Summary summarize(std::span<const ReportRow> rows, const std::string& encoder, ProbeTarget target) {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.encoder == encoder && r.target == target) v.push_back(r.map);
    Summary s;
    s.count = static_cast<int>(v.size());
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std_error = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    return s;
}

}  // namespace load::probe

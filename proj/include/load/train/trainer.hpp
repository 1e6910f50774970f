#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "load/agent/net.hpp"
#include "load/kitchen/env.hpp"
#include "load/objmodel/model.hpp"
#include "load/train/replay.hpp"

namespace load::train {

using core::Real;

struct TrainConfig {
    std::string task = "toast_bread";
    std::uint64_t seed = 0;
    objmodel::AuxMode aux = objmodel::AuxMode::None;
    agent::AgentConfig agent;
    objmodel::ModelConfig model;

    double lr = 1.8e-5;
    double eta2 = 0.00067;
    double gamma = 0.99;
    int regular_capacity = 150000;
    int sil_capacity = 50000;
    double sil_fraction = 0.125;  // 7:1 regular to SIL
    int batch_size = 50;
    double max_grad_norm = 0.076;
    double beta_model = 1e-3;
    double beta_cobra = 0.0032;
    double beta_ocn = 0.0047;

    double eps_start = 1.0;
    double eps_end = 0.1;
    int eps_anneal_steps = 50000;
    double eval_epsilon = 0.1;

    int warmup = 1000;
    int updates_per_step = 1;
    std::int64_t budget = 200000;
    int eval_every = 25000;
    int eval_frames = 5000;
    int eval_shards = 4;
    int checkpoint_every = 25000;
    int eval_threads = 4;
    // Off by default so metrics files are byte-reproducible.
    bool record_wall_time = false;

    // Agent config with the object input switched to oracle features when the aux mode needs it.
    agent::AgentConfig effective_agent() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

double epsilon_at(std::int64_t step, const TrainConfig& cfg);

// Observations (s_t rows then s_t+1 rows) rebuilt from a sampled batch.
struct PreparedBatch {
    std::vector<kitchen::ObservationBundle> obs;
    std::vector<std::vector<Real>> features;
    std::vector<agent::AgentInput> inputs;
    std::vector<kitchen::ActionSpec> actions;
    std::vector<double> rewards;
    std::vector<bool> dones;

    int size() const { return static_cast<int>(actions.size()); }
    PreparedBatch() = default;
    PreparedBatch(const PreparedBatch&) = delete;
    PreparedBatch& operator=(const PreparedBatch&) = delete;
};

std::unique_ptr<PreparedBatch> prepare_batch(std::span<const Transition* const> items, objmodel::AuxMode aux);

// Oracle rows for an observation's objects (empty when the mode does not use them).
std::vector<Real> features_for(const kitchen::WorldState& w, const kitchen::ObservationBundle& obs,
                               objmodel::AuxMode aux);

// Double-Q targets: y = r on terminal transitions, else r + gamma * Q_target(s', argmax_a Q_online(s', a)),
// with the argmax over the full action set of s'.
std::vector<Real> td_targets(std::span<const agent::QValues> online_next, std::span<const agent::QValues> target_next,
                             std::span<const double> rewards, const std::vector<bool>& dones, double gamma);

// Q(s_t, a_t) of the first B observations of a forward pass, as a length-B vector.
core::Var q_taken(const agent::AgentForward& f, std::span<const kitchen::ActionSpec> actions);

struct LossTerms {
    core::Var total;
    core::Var dqn;
    core::Var model;  // unscaled auxiliary loss (0 for modes without one)
    agent::AgentForward forward;  // stacked s_t / s_t+1 pass the losses were built on
};

// TD targets of a batch under the given online (argmax) and target (value) parameters.
std::vector<Real> batch_td_targets(const core::ParamGroup& online, const core::ParamGroup& target,
                                   const TrainConfig& cfg, const PreparedBatch& batch);

// The combined objective L_DQN + beta * L_aux on one graph. Reads online and target parameters;
// gradients reach only the online ones. The TD targets are constants of the graph; pass
// `frozen_targets` to reuse ones computed elsewhere (finite-difference checks hold them fixed
// while perturbing the online parameters, matching the stop-gradient).
LossTerms build_losses(core::Graph& g, const core::ParamGroup& online, const core::ParamGroup& target,
                       const TrainConfig& cfg, const PreparedBatch& batch, const objmodel::NegativePool& pool,
                       core::Rng& model_rng, const std::vector<Real>* frozen_targets = nullptr);

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StepLosses {
    double dqn = 0;
    double model = 0;
};

struct MetricsRow {
    std::int64_t step = 0;
    std::int64_t episodes = 0;
    double train_sr = 0;
    double eval_sr = 0;
    double loss_dqn = 0;
    double loss_model = 0;
    double epsilon = 0;
    double seconds = 0;
};

std::string metrics_header();
std::string to_csv(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

class Trainer {
public:
    explicit Trainer(TrainConfig cfg);

    const TrainConfig& config() const { return cfg_; }
    const core::ParamGroup& params() const { return online_; }
    const core::ParamGroup& target() const { return target_; }
    core::ParamGroup& mutable_params() { return online_; }
    const Buffers& buffers() const { return buffers_; }
    const objmodel::NegativePool& pool() const { return pool_; }

    // One optimisation step on a sampled batch: backward, clip, Adam, Polyak target update.
    StepLosses train_step(const SampledBatch& batch);

    // Interleaves acting and learning until the budget is spent. Writes metrics.csv and
    // checkpoints under out_dir when it is non-empty. Returns the metrics rows.
    std::vector<MetricsRow> run(const std::filesystem::path& out_dir, std::ostream* log = nullptr);

private:
    TrainConfig cfg_;
    core::ParamGroup online_;
    core::ParamGroup target_;
    Buffers buffers_;
    objmodel::NegativePool pool_;
    core::Rng act_rng_;
    core::Rng sample_rng_;
    core::Rng model_rng_;
};

// Per-episode decision maker used by evaluation.
class EpisodePolicy {
public:
    virtual ~EpisodePolicy() = default;
    virtual void begin(const kitchen::WorldState&) {}
    virtual kitchen::ActionSpec act(const kitchen::WorldState& w, const kitchen::ObservationBundle& obs,
                                    core::Rng& rng) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<EpisodePolicy>()>;

struct EvalResult {
    double success_rate = 0;
    int episodes = 0;
    int successes = 0;
};

// Runs `frames` environment steps split over `shards` independent streams (each with its own
// seed), counting only completed episodes. The result does not depend on `threads`.
EvalResult evaluate_policy(const PolicyFactory& factory, const std::string& task, int frames, std::uint64_t seed,
                           int shards = 4, int threads = 1);

// Epsilon-greedy agent on a frozen parameter snapshot.
PolicyFactory agent_policy(const core::ParamGroup& params, const agent::AgentConfig& cfg, objmodel::AuxMode aux,
                           double epsilon);
PolicyFactory scripted_policy();
PolicyFactory random_policy();

// Trapezoidal area of `method` over `oracle` on a shared step grid, in percent.
double auc_percent(std::span<const double> steps, std::span<const double> method, std::span<const double> oracle);
double trapezoid(std::span<const double> steps, std::span<const double> values);

}  // namespace load::train

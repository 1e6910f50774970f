#include "load/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "load/agent/policy.hpp"
#include "load/core/checkpoint.hpp"
#include "load/core/optim.hpp"
#include "load/kitchen/script.hpp"

namespace load::train {

namespace {

constexpr std::uint64_t kAgentSeedSalt = 1;
constexpr std::uint64_t kModelSeedSalt = 2;
constexpr std::uint64_t kActSalt = 3;
constexpr std::uint64_t kSampleSalt = 4;
constexpr std::uint64_t kModelRngSalt = 5;
constexpr std::uint64_t kEpisodeSalt = 6;
constexpr std::uint64_t kEvalSalt = 7;

core::ParamGroup init_online(const TrainConfig& cfg) {
    core::ParamGroup p;
    const agent::AgentConfig acfg = cfg.effective_agent();
    agent::init_agent_params(p, acfg, core::mix_seed(cfg.seed, kAgentSeedSalt));
    objmodel::init_model_params(p, acfg, cfg.model, cfg.aux, core::mix_seed(cfg.seed, kModelSeedSalt));
    return p;
}

double aux_coefficient(const TrainConfig& cfg) {
    switch (cfg.aux) {
        case objmodel::AuxMode::Load: return cfg.beta_model;
        case objmodel::AuxMode::Ocn: return cfg.beta_ocn;
        case objmodel::AuxMode::Cobra: return cfg.beta_cobra;
        default: return 0.0;
    }
}

bool has_aux_loss(objmodel::AuxMode m) {
    return m == objmodel::AuxMode::Load || m == objmodel::AuxMode::Ocn || m == objmodel::AuxMode::Cobra;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

agent::AgentConfig TrainConfig::effective_agent() const {
    agent::AgentConfig a = agent;
    a.oracle_dim = objmodel::uses_oracle_features(aux) ? objmodel::kOracleDim : 0;
    return a;
}

double epsilon_at(std::int64_t step, const TrainConfig& cfg) {
    if (cfg.eps_anneal_steps <= 0 || step >= cfg.eps_anneal_steps) return cfg.eps_end;
    if (step <= 0) return cfg.eps_start;
    const double frac = static_cast<double>(step) / cfg.eps_anneal_steps;
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
}

std::vector<Real> features_for(const kitchen::WorldState& w, const kitchen::ObservationBundle& obs,
                               objmodel::AuxMode aux) {
    if (!objmodel::uses_oracle_features(aux)) return {};
    return objmodel::oracle_features(w, obs.patch_ids, aux == objmodel::AuxMode::OracleCategoryOnly);
}

std::unique_ptr<PreparedBatch> prepare_batch(std::span<const Transition* const> items, objmodel::AuxMode aux) {
    auto b = std::make_unique<PreparedBatch>();
    const std::size_t n = items.size();
    if (n == 0) throw std::invalid_argument("prepare_batch: empty batch");
    b->obs.reserve(2 * n);
    b->features.reserve(2 * n);
    for (int half = 0; half < 2; ++half) {
        for (const Transition* t : items) {
            const kitchen::WorldState& w = half == 0 ? *t->before : *t->after;
            b->obs.push_back(kitchen::observe(w));
            b->features.push_back(features_for(w, b->obs.back(), aux));
        }
    }
    const bool oracle = objmodel::uses_oracle_features(aux);
    for (std::size_t i = 0; i < 2 * n; ++i) b->inputs.push_back({&b->obs[i], oracle ? &b->features[i] : nullptr});
    for (const Transition* t : items) {
        b->actions.push_back(t->action);
        b->rewards.push_back(t->reward);
        b->dones.push_back(t->done);
    }
    return b;
}

std::vector<Real> td_targets(std::span<const agent::QValues> online_next, std::span<const agent::QValues> target_next,
                             std::span<const double> rewards, const std::vector<bool>& dones, double gamma) {
    const std::size_t n = rewards.size();
    if (online_next.size() != n || target_next.size() != n || dones.size() != n)
        throw std::invalid_argument("td_targets: size mismatch");
    std::vector<Real> y(n);
    for (std::size_t b = 0; b < n; ++b) {
        if (dones[b]) {
            y[b] = static_cast<Real>(rewards[b]);
            continue;
        }
        const auto& on = online_next[b];
        const auto& tg = target_next[b];
        if (on.qi.size() != tg.qi.size()) throw std::invalid_argument("td_targets: online/target action sets differ");
        const int a = agent::greedy_flat(on.qi, on.qn);
        const Real q = a < agent::kNumQ ? tg.qn[static_cast<std::size_t>(a)] : tg.qi[static_cast<std::size_t>(a - agent::kNumQ)];
        y[b] = static_cast<Real>(rewards[b] + gamma * q);
    }
    return y;
}

core::Var q_taken(const agent::AgentForward& f, std::span<const kitchen::ActionSpec> actions) {
    const int nav_rows = f.q_nav.shape()[0];
    const int int_rows = f.q_int.shape()[0];
    const int nav_total = nav_rows * agent::kNumQ;
    std::vector<int> idx;
    idx.reserve(actions.size());
    for (std::size_t b = 0; b < actions.size(); ++b) {
        const auto& a = actions[b];
        const int bi = static_cast<int>(b);
        if (!a.interact) {
            idx.push_back(bi * agent::kNumQ + a.base);
            continue;
        }
        if (f.visible[b] == 0 || a.patch_index < 0 || a.patch_index >= f.segments.length(bi))
            throw std::invalid_argument("q_taken: action targets patch " + std::to_string(a.patch_index) +
                                        " outside observation " + std::to_string(b));
        idx.push_back(nav_total + (f.segments.begin(bi) + a.patch_index) * agent::kNumQ + a.base);
    }
    core::Var all = core::concat_rows({core::reshape(f.q_nav, {nav_total, 1}),
                                       core::reshape(f.q_int, {int_rows * agent::kNumQ, 1})});
    return core::gather_elements(all, std::move(idx));
}

std::vector<Real> batch_td_targets(const core::ParamGroup& online, const core::ParamGroup& target,
                                   const TrainConfig& cfg, const PreparedBatch& batch) {
    const int B = batch.size();
    const agent::AgentConfig acfg = cfg.effective_agent();
    const std::span<const agent::AgentInput> next_inputs(batch.inputs.data() + B, static_cast<std::size_t>(B));
    const std::vector<agent::QValues> online_next = agent::evaluate_q(online, acfg, next_inputs);
    const std::vector<agent::QValues> target_next = agent::evaluate_q(target, acfg, next_inputs);
    return td_targets(online_next, target_next, batch.rewards, batch.dones, cfg.gamma);
}

LossTerms build_losses(core::Graph& g, const core::ParamGroup& online, const core::ParamGroup& target,
                       const TrainConfig& cfg, const PreparedBatch& batch, const objmodel::NegativePool& pool,
                       core::Rng& model_rng, const std::vector<Real>* frozen_targets) {
    const int B = batch.size();
    const agent::AgentConfig acfg = cfg.effective_agent();
    LossTerms out;
    out.forward = agent::agent_forward(g, online, acfg, batch.inputs);
    const agent::AgentForward& f = out.forward;

    std::vector<Real> y;
    if (frozen_targets) {
        if (frozen_targets->size() != static_cast<std::size_t>(B))
            throw std::invalid_argument("build_losses: frozen target count differs from batch size");
        y = *frozen_targets;
    } else {
        // Online next-state values come from the stacked pass already on the tape.
        std::vector<agent::QValues> online_next;
        online_next.reserve(static_cast<std::size_t>(B));
        for (int b = B; b < 2 * B; ++b) online_next.push_back(agent::q_values_of(f, b));
        const std::span<const agent::AgentInput> next_inputs(batch.inputs.data() + B, static_cast<std::size_t>(B));
        const std::vector<agent::QValues> target_next = agent::evaluate_q(target, acfg, next_inputs);
        y = td_targets(online_next, target_next, batch.rewards, batch.dones, cfg.gamma);
    }

    const core::Var q = q_taken(f, batch.actions);
    const core::Var yv = g.constant(core::Tensor::vector(y));
    const core::Var dqn = core::scale(core::squared_error(q, yv), Real(1) / static_cast<Real>(B));

    out.total = dqn;
    out.dqn = dqn;
    out.model = g.constant(core::Tensor::scalar(0));
    if (!has_aux_loss(cfg.aux)) return out;

    objmodel::TransitionView view{&f, batch.inputs, batch.actions};
    switch (cfg.aux) {
        case objmodel::AuxMode::Load: {
            objmodel::ModelLossStats stats;
            out.model = objmodel::attentive_model_loss(g, online, cfg.model, view, pool, model_rng, &stats);
            break;
        }
        case objmodel::AuxMode::Ocn: out.model = objmodel::ocn_loss(g, cfg.model, view); break;
        case objmodel::AuxMode::Cobra: out.model = objmodel::cobra_loss(g, online, cfg.model, view, model_rng); break;
        default: break;
    }
    out.total = core::add(dqn, core::scale(out.model, static_cast<Real>(aux_coefficient(cfg))));
    return out;
}

std::string metrics_header() { return "step,episodes,train_sr,eval_sr,loss_dqn,loss_model,epsilon,seconds"; }

std::string to_csv(const MetricsRow& r) {
    std::ostringstream os;
    os << r.step << ',' << r.episodes << ',' << format_double(r.train_sr) << ',' << format_double(r.eval_sr) << ','
       << format_double(r.loss_dqn) << ',' << format_double(r.loss_model) << ',' << format_double(r.epsilon) << ','
       << format_double(r.seconds);
    return os.str();
}

MetricsRow parse_metrics_row(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::invalid_argument("metrics row needs 8 columns: '" + line + "'");
    MetricsRow r;
    try {
        r.step = std::stoll(cells[0]);
        r.episodes = std::stoll(cells[1]);
        r.train_sr = std::stod(cells[2]);
        r.eval_sr = std::stod(cells[3]);
        r.loss_dqn = std::stod(cells[4]);
        r.loss_model = std::stod(cells[5]);
        r.epsilon = std::stod(cells[6]);
        r.seconds = std::stod(cells[7]);
    } catch (const std::exception&) {
        throw std::invalid_argument("malformed metrics row: '" + line + "'");
    }
    return r;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != metrics_header())
        throw std::invalid_argument(path.string() + ": unexpected metrics header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(parse_metrics_row(line));
    }
    return rows;
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_(std::move(cfg)),
      online_(init_online(cfg_)),
      target_(online_.snapshot()),
      buffers_(static_cast<std::size_t>(cfg_.regular_capacity), static_cast<std::size_t>(cfg_.sil_capacity)),
      pool_(cfg_.model.pool_cap),
      act_rng_(core::mix_seed(cfg_.seed, kActSalt)),
      sample_rng_(core::mix_seed(cfg_.seed, kSampleSalt)),
      model_rng_(core::mix_seed(cfg_.seed, kModelRngSalt)) {
    kitchen::find_task(cfg_.task);
}

StepLosses Trainer::train_step(const SampledBatch& sampled) {
    const auto batch = prepare_batch(sampled.items, cfg_.aux);
    core::Graph g(true);
    const LossTerms terms = build_losses(g, online_, target_, cfg_, *batch, pool_, model_rng_);
    StepLosses out{terms.dqn.value().item(), terms.model.value().item()};
    if (!std::isfinite(terms.total.value().item())) {
        std::ostringstream os;
        os << "non-finite loss (dqn " << out.dqn << ", aux " << out.model << ") on batch [";
        for (std::size_t i = 0; i < sampled.items.size(); ++i) {
            if (i) os << ", ";
            os << (sampled.from_sil[i] ? "sil:" : "regular:") << sampled.indices[i];
        }
        os << "]";
        throw NonFiniteLoss(os.str());
    }
    g.backward(terms.total);
    core::GradMap grads = g.param_grads(online_);
    for (const auto& [name, grad] : grads) {
        if (!grad.all_finite()) throw NonFiniteLoss("non-finite gradient for '" + name + "'");
    }
    core::clip_global_norm(grads, static_cast<Real>(cfg_.max_grad_norm));
    core::adam_step(online_, grads, static_cast<Real>(cfg_.lr));
    target_.blend_from(online_, static_cast<Real>(cfg_.eta2));
    if (cfg_.aux == objmodel::AuxMode::Load) {
        // Encodings from before this update; the pool only supplies constant negatives.
        objmodel::remember_encodings(pool_, {&terms.forward, batch->inputs, batch->actions});
    }
    return out;
}

std::vector<MetricsRow> Trainer::run(const std::filesystem::path& out_dir, std::ostream* log) {
    const bool write = !out_dir.empty();
    std::ofstream metrics;
    if (write) {
        std::filesystem::create_directories(out_dir);
        metrics.open(out_dir / "metrics.csv", std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
        metrics << metrics_header() << '\n' << std::flush;
    }
    const auto started = std::chrono::steady_clock::now();
    const agent::AgentConfig acfg = cfg_.effective_agent();

    std::int64_t episode_index = 0;
    auto begin_episode = [&] {
        auto [w, obs] = kitchen::reset(cfg_.task, core::mix_seed(core::mix_seed(cfg_.seed, kEpisodeSalt), episode_index));
        return std::make_pair(std::make_shared<const kitchen::WorldState>(std::move(w)), std::move(obs));
    };
    auto [current, current_obs] = begin_episode();
    std::vector<Transition> episode;

    std::vector<MetricsRow> rows;
    std::int64_t window_episodes = 0, window_successes = 0, window_updates = 0;
    double window_dqn = 0, window_model = 0;

    for (std::int64_t step = 0; step < cfg_.budget; ++step) {
        const double eps = epsilon_at(step, cfg_);
        const std::vector<Real> feats = features_for(*current, current_obs, cfg_.aux);
        const agent::AgentInput in{&current_obs, feats.empty() ? nullptr : &feats};
        const auto q = agent::evaluate_q(online_, acfg, std::span<const agent::AgentInput>(&in, 1));
        const kitchen::ActionSpec action = agent::select_action(q[0], eps, act_rng_);
        kitchen::StepResult res = kitchen::step(*current, action);
        auto next = std::make_shared<const kitchen::WorldState>(std::move(res.world));
        episode.push_back({current, next, action, res.reward, res.done, episode_index});
        current = next;
        current_obs = std::move(res.obs);
        if (res.done) {
            buffers_.push_episode(episode, current->solved);
            ++window_episodes;
            window_successes += current->solved ? 1 : 0;
            episode.clear();
            ++episode_index;
            std::tie(current, current_obs) = begin_episode();
        }

        if (buffers_.regular.size() >= static_cast<std::size_t>(cfg_.warmup)) {
            for (int u = 0; u < cfg_.updates_per_step; ++u) {
                const SampledBatch batch = sample_mixed(buffers_, cfg_.batch_size, cfg_.sil_fraction, sample_rng_);
                StepLosses l;
                try {
                    l = train_step(batch);
                } catch (const NonFiniteLoss& e) {
                    throw NonFiniteLoss("env step " + std::to_string(step + 1) + ": " + e.what());
                }
                window_dqn += l.dqn;
                window_model += l.model;
                ++window_updates;
            }
        }

        const std::int64_t done_steps = step + 1;
        if ((cfg_.eval_every > 0 && done_steps % cfg_.eval_every == 0) || done_steps == cfg_.budget) {
            const EvalResult ev = evaluate_policy(agent_policy(online_, acfg, cfg_.aux, cfg_.eval_epsilon), cfg_.task,
                                                  cfg_.eval_frames, core::mix_seed(cfg_.seed + static_cast<std::uint64_t>(done_steps), kEvalSalt),
                                                  cfg_.eval_shards, cfg_.eval_threads);
            MetricsRow r;
            r.step = done_steps;
            r.episodes = episode_index;
            r.train_sr = window_episodes > 0 ? static_cast<double>(window_successes) / window_episodes : 0.0;
            r.eval_sr = ev.success_rate;
            r.loss_dqn = window_updates > 0 ? window_dqn / window_updates : 0.0;
            r.loss_model = window_updates > 0 ? window_model / window_updates : 0.0;
            r.epsilon = eps;
            r.seconds = cfg_.record_wall_time
                            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
                            : 0.0;
            rows.push_back(r);
            if (write) metrics << to_csv(r) << '\n' << std::flush;
            if (log)
                *log << "step " << r.step << " episodes " << r.episodes << " train_sr " << r.train_sr << " eval_sr "
                     << r.eval_sr << " loss_dqn " << r.loss_dqn << " loss_model " << r.loss_model << '\n';
            window_episodes = window_successes = window_updates = 0;
            window_dqn = window_model = 0;
        }
        if (write && cfg_.checkpoint_every > 0 && done_steps % cfg_.checkpoint_every == 0) {
            std::filesystem::create_directories(out_dir / "checkpoints");
            core::save_checkpoint(out_dir / "checkpoints" / ("step_" + std::to_string(done_steps) + ".ckpt"), online_);
        }
    }
    if (write) core::save_checkpoint(out_dir / "final.ckpt", online_);
    return rows;
}

namespace {

struct ShardTally {
    int episodes = 0;
    int successes = 0;
};

ShardTally run_shard(const PolicyFactory& factory, const std::string& task, int frames, std::uint64_t seed) {
    ShardTally t;
    core::Rng rng(core::mix_seed(seed, 0));
    std::uint64_t ep = 0;
    auto policy = factory();
    auto [w, obs] = kitchen::reset(task, core::mix_seed(seed, ++ep));
    policy->begin(w);
    for (int f = 0; f < frames; ++f) {
        const kitchen::ActionSpec a = policy->act(w, obs, rng);
        kitchen::StepResult res = kitchen::step(w, a);
        w = std::move(res.world);
        obs = std::move(res.obs);
        if (res.done) {
            ++t.episodes;
            t.successes += w.solved ? 1 : 0;
            std::tie(w, obs) = kitchen::reset(task, core::mix_seed(seed, ++ep));
            policy->begin(w);
        }
    }
    return t;
}

class AgentEpisodePolicy : public EpisodePolicy {
public:
    AgentEpisodePolicy(std::shared_ptr<const core::ParamGroup> params, agent::AgentConfig cfg, objmodel::AuxMode aux,
                       double eps)
        : params_(std::move(params)), cfg_(cfg), aux_(aux), eps_(eps) {}

    kitchen::ActionSpec act(const kitchen::WorldState& w, const kitchen::ObservationBundle& obs,
                            core::Rng& rng) override {
        const std::vector<Real> feats = features_for(w, obs, aux_);
        const agent::AgentInput in{&obs, feats.empty() ? nullptr : &feats};
        const auto q = agent::evaluate_q(*params_, cfg_, std::span<const agent::AgentInput>(&in, 1));
        return agent::select_action(q[0], eps_, rng);
    }

private:
    std::shared_ptr<const core::ParamGroup> params_;
    agent::AgentConfig cfg_;
    objmodel::AuxMode aux_;
    double eps_;
};

class ScriptedEpisodePolicy : public EpisodePolicy {
public:
    void begin(const kitchen::WorldState& w) override { script_.emplace(kitchen::task_plan(w)); }
    kitchen::ActionSpec act(const kitchen::WorldState& w, const kitchen::ObservationBundle&, core::Rng&) override {
        if (!script_) begin(w);
        return script_->act(w);
    }

private:
    std::optional<kitchen::ScriptedPolicy> script_;
};

class RandomEpisodePolicy : public EpisodePolicy {
public:
    kitchen::ActionSpec act(const kitchen::WorldState&, const kitchen::ObservationBundle& obs,
                            core::Rng& rng) override {
        const int n = kitchen::kNumNav + kitchen::kNumInteractions * obs.num_patches();
        return kitchen::ActionSpec::from_flat(rng.below(n));
    }
};

}  // namespace

EvalResult evaluate_policy(const PolicyFactory& factory, const std::string& task, int frames, std::uint64_t seed,
                           int shards, int threads) {
    if (frames < 0) throw std::invalid_argument("evaluate_policy: negative frame count");
    if (shards < 1) throw std::invalid_argument("evaluate_policy: shards must be positive");
    kitchen::find_task(task);
    std::vector<ShardTally> tallies(static_cast<std::size_t>(shards));
    auto frames_of = [&](int s) { return frames / shards + (s < frames % shards ? 1 : 0); };
    auto work = [&](int s) { tallies[static_cast<std::size_t>(s)] = run_shard(factory, task, frames_of(s), core::mix_seed(seed, static_cast<std::uint64_t>(s))); };
    const int n_threads = std::clamp(threads, 1, shards);
    if (n_threads == 1) {
        for (int s = 0; s < shards; ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (int s = t; s < shards; s += n_threads) work(s);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    EvalResult r;
    for (const auto& t : tallies) {
        r.episodes += t.episodes;
        r.successes += t.successes;
    }
    r.success_rate = r.episodes > 0 ? static_cast<double>(r.successes) / r.episodes : 0.0;
    return r;
}

PolicyFactory agent_policy(const core::ParamGroup& params, const agent::AgentConfig& cfg, objmodel::AuxMode aux,
                           double epsilon) {
    auto frozen = std::make_shared<const core::ParamGroup>(params.snapshot());
    return [frozen, cfg, aux, epsilon] { return std::make_unique<AgentEpisodePolicy>(frozen, cfg, aux, epsilon); };
}

PolicyFactory scripted_policy() {
    return [] { return std::make_unique<ScriptedEpisodePolicy>(); };
}

PolicyFactory random_policy() {
    return [] { return std::make_unique<RandomEpisodePolicy>(); };
}

double trapezoid(std::span<const double> steps, std::span<const double> values) {
    if (steps.size() != values.size()) throw std::invalid_argument("trapezoid: size mismatch");
    double area = 0;
    for (std::size_t i = 1; i < steps.size(); ++i) {
        if (!(steps[i] > steps[i - 1])) throw std::invalid_argument("trapezoid: steps must increase");
        area += 0.5 * (values[i] + values[i - 1]) * (steps[i] - steps[i - 1]);
    }
    return area;
}

double auc_percent(std::span<const double> steps, std::span<const double> method, std::span<const double> oracle) {
    if (method.size() != steps.size() || oracle.size() != steps.size())
        throw std::invalid_argument("auc_percent: curves must share the step grid");
    const double denom = trapezoid(steps, oracle);
    if (!(denom > 0)) throw std::invalid_argument("auc_percent: oracle curve has zero area");
    return 100.0 * trapezoid(steps, method) / denom;
}

}  // namespace load::train

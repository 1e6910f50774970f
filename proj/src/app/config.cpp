#include "load/app/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace load::app {

using json = nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : "; ") + p;
    return s;
}

struct Field {
    std::function<void(const json&, Config&)> read;  // throws std::string on a type error
    std::function<json(const Config&)> write;
};

template <typename T>
Field number_field(T train::TrainConfig::* member) {
    return {[member](const json& v, Config& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    if (!v.is_number()) throw std::string("expected a number");
                    c.train.*member = v.get<T>();
                } else if constexpr (std::is_unsigned_v<T>) {
                    if (!v.is_number_unsigned()) throw std::string("expected a non-negative integer");
                    c.train.*member = v.get<T>();
                } else {
                    if (!v.is_number_integer()) throw std::string("expected an integer");
                    const auto x = v.get<std::int64_t>();
                    if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
                        throw std::string("integer out of range");
                    c.train.*member = static_cast<T>(x);
                }
            },
            [member](const Config& c) { return json(c.train.*member); }};
}

template <typename S, typename T>
Field nested_field(S train::TrainConfig::* outer, T S::* member) {
    return {[outer, member](const json& v, Config& c) {
                if constexpr (std::is_floating_point_v<T>) {
                    if (!v.is_number()) throw std::string("expected a number");
                    (c.train.*outer).*member = v.get<T>();
                } else {
                    if (!v.is_number_integer()) throw std::string("expected an integer");
                    const auto x = v.get<std::int64_t>();
                    if (x < std::numeric_limits<T>::min() || x > std::numeric_limits<T>::max())
                        throw std::string("integer out of range");
                    (c.train.*outer).*member = static_cast<T>(x);
                }
            },
            [outer, member](const Config& c) { return json((c.train.*outer).*member); }};
}

std::string expect_string(const json& v) {
    if (!v.is_string()) throw std::string("expected a string");
    return v.get<std::string>();
}

const std::map<std::string, Field>& fields() {
    using TC = train::TrainConfig;
    using AC = agent::AgentConfig;
    using MC = objmodel::ModelConfig;
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        f["task"] = {[](const json& v, Config& c) { c.train.task = expect_string(v); },
                     [](const Config& c) { return json(c.train.task); }};
        f["aux"] = {[](const json& v, Config& c) {
                        try {
                            c.train.aux = objmodel::parse_aux_mode(expect_string(v));
                        } catch (const std::invalid_argument& e) {
                            throw std::string(e.what());
                        }
                    },
                    [](const Config& c) { return json(objmodel::to_string(c.train.aux)); }};
        f["attention_policy"] = {[](const json& v, Config& c) {
                                     try {
                                         c.train.agent.attention_policy = agent::parse_attention_policy(expect_string(v));
                                     } catch (const std::invalid_argument& e) {
                                         throw std::string(e.what());
                                     }
                                 },
                                 [](const Config& c) { return json(agent::to_string(c.train.agent.attention_policy)); }};
        f["attention_model"] = {[](const json& v, Config& c) {
                                    const std::string s = expect_string(v);
                                    if (s != "on" && s != "off") throw std::string("expected \"on\" or \"off\"");
                                    c.train.model.attention_model = s == "on";
                                },
                                [](const Config& c) { return json(c.train.model.attention_model ? "on" : "off"); }};
        f["out"] = {[](const json& v, Config& c) { c.out = expect_string(v); },
                    [](const Config& c) { return json(c.out); }};
        f["record_wall_time"] = {[](const json& v, Config& c) {
                                     if (!v.is_boolean()) throw std::string("expected true or false");
                                     c.train.record_wall_time = v.get<bool>();
                                 },
                                 [](const Config& c) { return json(c.train.record_wall_time); }};
        f["seed"] = number_field(&TC::seed);
        f["lr"] = number_field(&TC::lr);
        f["eta2"] = number_field(&TC::eta2);
        f["gamma"] = number_field(&TC::gamma);
        f["regular_capacity"] = number_field(&TC::regular_capacity);
        f["sil_capacity"] = number_field(&TC::sil_capacity);
        f["sil_fraction"] = number_field(&TC::sil_fraction);
        f["batch_size"] = number_field(&TC::batch_size);
        f["max_grad_norm"] = number_field(&TC::max_grad_norm);
        f["beta_model"] = number_field(&TC::beta_model);
        f["beta_cobra"] = number_field(&TC::beta_cobra);
        f["beta_ocn"] = number_field(&TC::beta_ocn);
        f["eps_start"] = number_field(&TC::eps_start);
        f["eps_end"] = number_field(&TC::eps_end);
        f["eps_anneal_steps"] = number_field(&TC::eps_anneal_steps);
        f["eval_epsilon"] = number_field(&TC::eval_epsilon);
        f["warmup"] = number_field(&TC::warmup);
        f["updates_per_step"] = number_field(&TC::updates_per_step);
        f["budget"] = number_field(&TC::budget);
        f["eval_every"] = number_field(&TC::eval_every);
        f["eval_frames"] = number_field(&TC::eval_frames);
        f["eval_shards"] = number_field(&TC::eval_shards);
        f["eval_threads"] = number_field(&TC::eval_threads);
        f["checkpoint_every"] = number_field(&TC::checkpoint_every);
        f["d_o"] = nested_field(&TC::agent, &AC::d_o);
        f["d_ego"] = nested_field(&TC::agent, &AC::d_ego);
        f["d_loc"] = nested_field(&TC::agent, &AC::d_loc);
        f["d_k"] = nested_field(&TC::agent, &AC::d_k);
        f["hidden"] = nested_field(&TC::agent, &AC::hidden);
        f["loc_hidden"] = nested_field(&TC::agent, &AC::loc_hidden);
        f["d_a"] = nested_field(&TC::model, &MC::d_a);
        f["model_hidden"] = nested_field(&TC::model, &MC::hidden);
        f["negatives"] = nested_field(&TC::model, &MC::negatives);
        f["tau"] = nested_field(&TC::model, &MC::tau);
        f["pool_cap"] = nested_field(&TC::model, &MC::pool_cap);
        f["tau_ocn"] = nested_field(&TC::model, &MC::tau_ocn);
        f["beta_kl"] = nested_field(&TC::model, &MC::beta_kl);
        return f;
    }();
    return table;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::invalid_argument("invalid config: " + join(problems)), problems_(std::move(problems)) {}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, f] : fields()) keys.push_back(k);
    return keys;
}

Config parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError({std::string("not valid JSON: ") + e.what()});
    }
    if (!j.is_object()) throw ConfigError({"top level must be a JSON object"});
    Config cfg;
    std::vector<std::string> problems;
    for (const auto& [key, value] : j.items()) {
        const auto it = fields().find(key);
        if (it == fields().end()) {
            problems.push_back(key + ": unknown key");
            continue;
        }
        try {
            it->second.read(value, cfg);
        } catch (const std::string& msg) {
            problems.push_back(key + ": " + msg);
        }
    }
    try {
        validate(cfg);
    } catch (const ConfigError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
    }
    if (!problems.empty()) throw ConfigError(problems);
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({"config: cannot read " + path.string()});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const Config& cfg) {
    json j = json::object();
    for (const auto& [key, f] : fields()) j[key] = f.write(cfg);
    return j.dump(2) + "\n";
}

void validate(const Config& c) {
    const auto& t = c.train;
    std::vector<std::string> p;
    auto need = [&p](bool ok, const std::string& key, const std::string& rule) {
        if (!ok) p.push_back(key + ": must be " + rule);
    };
    auto finite = [](double x) { return std::isfinite(x); };
    {
        const auto names = kitchen::task_names();
        if (std::find(names.begin(), names.end(), t.task) == names.end()) {
            std::string all;
            for (const auto& n : names) all += (all.empty() ? "" : ", ") + n;
            p.push_back("task: unknown task '" + t.task + "' (one of " + all + ")");
        }
    }
    need(!c.out.empty(), "out", "a non-empty path");
    need(finite(t.lr) && t.lr > 0, "lr", "> 0");
    need(finite(t.eta2) && t.eta2 > 0 && t.eta2 <= 1, "eta2", "in (0, 1]");
    need(finite(t.gamma) && t.gamma >= 0 && t.gamma < 1, "gamma", "in [0, 1)");
    need(t.regular_capacity >= 1, "regular_capacity", ">= 1");
    need(t.sil_capacity >= 1, "sil_capacity", ">= 1");
    need(finite(t.sil_fraction) && t.sil_fraction >= 0 && t.sil_fraction < 1, "sil_fraction", "in [0, 1)");
    need(t.batch_size >= 1, "batch_size", ">= 1");
    need(finite(t.max_grad_norm) && t.max_grad_norm > 0, "max_grad_norm", "> 0");
    need(finite(t.beta_model) && t.beta_model >= 0, "beta_model", ">= 0");
    need(finite(t.beta_cobra) && t.beta_cobra >= 0, "beta_cobra", ">= 0");
    need(finite(t.beta_ocn) && t.beta_ocn >= 0, "beta_ocn", ">= 0");
    need(finite(t.eps_start) && t.eps_start >= 0 && t.eps_start <= 1, "eps_start", "in [0, 1]");
    need(finite(t.eps_end) && t.eps_end >= 0 && t.eps_end <= 1, "eps_end", "in [0, 1]");
    need(t.eps_anneal_steps >= 0, "eps_anneal_steps", ">= 0");
    need(finite(t.eval_epsilon) && t.eval_epsilon >= 0 && t.eval_epsilon <= 1, "eval_epsilon", "in [0, 1]");
    need(t.warmup >= 0, "warmup", ">= 0");
    need(t.updates_per_step >= 1, "updates_per_step", ">= 1");
    need(t.budget >= 1, "budget", ">= 1");
    need(t.eval_every >= 1, "eval_every", ">= 1");
    need(t.eval_frames >= 1, "eval_frames", ">= 1");
    need(t.eval_shards >= 1 && t.eval_shards <= t.eval_frames, "eval_shards", "in [1, eval_frames]");
    need(t.eval_threads >= 1, "eval_threads", ">= 1");
    need(t.checkpoint_every >= 0, "checkpoint_every", ">= 0 (0 keeps only the final checkpoint)");
    const auto& a = t.agent;
    need(a.d_o >= 1, "d_o", ">= 1");
    need(a.d_ego >= 1, "d_ego", ">= 1");
    need(a.d_loc >= 1, "d_loc", ">= 1");
    need(a.d_k >= 1, "d_k", ">= 1");
    need(a.hidden >= 1, "hidden", ">= 1");
    need(a.loc_hidden >= 1, "loc_hidden", ">= 1");
    need(a.oracle_dim == 0, "oracle_dim", "0 (derived from aux)");
    const auto& m = t.model;
    need(m.d_a >= 1, "d_a", ">= 1");
    need(m.hidden >= 1, "model_hidden", ">= 1");
    need(m.negatives >= 1, "negatives", ">= 1");
    need(finite(m.tau) && m.tau > 0, "tau", "> 0");
    need(m.pool_cap >= 0, "pool_cap", ">= 0");
    need(finite(m.tau_ocn) && m.tau_ocn > 0, "tau_ocn", "> 0");
    need(finite(m.beta_kl) && m.beta_kl >= 0, "beta_kl", ">= 0");
    if (!p.empty()) throw ConfigError(p);
}

std::string method_label(const train::TrainConfig& cfg) {
    std::string s = objmodel::to_string(cfg.aux);
    if (cfg.agent.attention_policy != agent::AttentionPolicy::Full)
        s += "+attn_" + agent::to_string(cfg.agent.attention_policy);
    if (!cfg.model.attention_model) s += "+model_attn_off";
    return s;
}

}  // namespace load::app

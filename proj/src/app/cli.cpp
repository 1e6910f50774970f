#include "load/app/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "load/app/config.hpp"
#include "load/app/matrix.hpp"
#include "load/app/report.hpp"
#include "load/core/checkpoint.hpp"
#include "load/kitchen/tasks.hpp"
#include "load/probe/probe.hpp"

namespace load::app {

namespace fs = std::filesystem;

namespace {

// Overrides shared by the subcommands that build a training config.
struct ConfigFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::int64_t> budget;
    std::optional<std::string> task;
    std::optional<std::string> aux;
    std::optional<std::string> attention_policy;
    std::optional<std::string> attention_model;
    bool wall_time = false;

    void attach(CLI::App* cmd, bool training) {
        cmd->add_option("--config", config, "JSON config file (defaults apply when omitted)");
        cmd->add_option("--seed", seed, "master seed");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--task", task, "task name");
        cmd->add_option("--aux", aux, "auxiliary mode: none, load, ocn, cobra, oracle, oracle_category_only");
        cmd->add_option("--attention-policy", attention_policy, "full, average or none");
        cmd->add_option("--attention-model", attention_model, "on or off");
        if (training) {
            cmd->add_option("--budget", budget, "environment steps");
            cmd->add_flag("--wall-time", wall_time, "record elapsed seconds in metrics.csv");
        }
    }

    Config resolve() const {
        Config c = config.empty() ? Config{} : load_config(config);
        std::vector<std::string> problems;
        auto guarded = [&problems](const std::string& flag, auto&& fn) {
            try {
                fn();
            } catch (const std::invalid_argument& e) {
                problems.push_back(flag + ": " + e.what());
            }
        };
        if (seed) c.train.seed = *seed;
        if (out) c.out = *out;
        if (budget) c.train.budget = *budget;
        if (task) c.train.task = *task;
        if (aux) guarded("--aux", [&] { c.train.aux = objmodel::parse_aux_mode(*aux); });
        if (attention_policy)
            guarded("--attention-policy",
                    [&] { c.train.agent.attention_policy = agent::parse_attention_policy(*attention_policy); });
        if (attention_model) {
            if (*attention_model == "on" || *attention_model == "off")
                c.train.model.attention_model = *attention_model == "on";
            else
                problems.push_back("--attention-model: must be on or off (got '" + *attention_model + "')");
        }
        if (wall_time) c.train.record_wall_time = true;
        if (!problems.empty()) throw ConfigError(problems);
        validate(c);
        return c;
    }
};

// LOAD_KITCHEN_THREADS caps evaluation workers.
int eval_threads(int configured) {
    const char* env = std::getenv("LOAD_KITCHEN_THREADS");
    if (env == nullptr || *env == '\0') return configured;
    int cap = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, cap);
    if (ec != std::errc() || ptr != end || cap < 1)
        throw ConfigError({std::string("LOAD_KITCHEN_THREADS: must be a positive integer (got '") + env + "')"});
    return std::min(configured, cap);
}

void make_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw PathError("cannot create output directory " + dir.string());
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::is_regular_file(p)) throw PathError(what + " " + p.string() + " does not exist");
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    f << text;
    if (!f) throw PathError("cannot write " + p.string());
}

int cmd_train(const ConfigFlags& flags, std::ostream& out) {
    Config cfg = flags.resolve();
    cfg.train.eval_threads = eval_threads(cfg.train.eval_threads);
    out << "train " << method_label(cfg.train) << " on " << cfg.train.task << ", seed " << cfg.train.seed << ", "
        << cfg.train.budget << " steps -> " << cfg.out << '\n';
    const auto rows = train_run(cfg, &out);
    out << "final eval success " << (rows.empty() ? 0.0 : rows.back().eval_sr) << '\n';
    return kExitOk;
}

struct MatrixFlags {
    bool enabled = false;
    std::vector<std::string> tasks;
    std::vector<std::string> methods{"none", "load", "ocn", "cobra", "oracle"};
    int seeds = 1;
    int jobs = 1;
};

int cmd_train_matrix(const ConfigFlags& flags, const MatrixFlags& m, std::ostream& out) {
    if (m.jobs < 1) throw ConfigError({"--jobs: must be >= 1"});
    Config base = flags.resolve();
    base.train.eval_threads = eval_threads(base.train.eval_threads);
    const std::vector<std::string> tasks = m.tasks.empty() ? kitchen::task_names() : m.tasks;
    const auto runs = plan_matrix(base, tasks, m.methods, m.seeds);
    make_out_dir(base.out);
    out << "matrix: " << runs.size() << " runs (" << tasks.size() << " tasks x " << m.methods.size() << " methods x "
        << m.seeds << " seeds), " << m.jobs << " at a time -> " << base.out << '\n';
    const auto outcomes = run_matrix(runs, m.jobs, out);
    int code = kExitOk;
    for (const auto& o : outcomes)
        if (o.exit_code != kExitOk && code == kExitOk) code = o.exit_code;
    return code;
}

// Shapes of the parameters a config expects against those of a checkpoint.
void check_compatible(const core::ParamGroup& ckpt, const train::TrainConfig& cfg, const fs::path& path) {
    core::ParamGroup expected;
    const agent::AgentConfig acfg = cfg.effective_agent();
    agent::init_agent_params(expected, acfg, 0);
    std::vector<std::string> problems;
    for (const auto& [name, t] : expected.values()) {
        if (!ckpt.contains(name)) {
            problems.push_back(path.string() + ": missing parameter " + name);
        } else if (ckpt.get(name).shape() != t.shape()) {
            problems.push_back(path.string() + ": " + name + " has shape " + core::shape_str(ckpt.get(name).shape()) +
                               ", config expects " + core::shape_str(t.shape()));
        }
    }
    if (!problems.empty()) throw probe::EncoderMismatch(problems.front() + (problems.size() > 1 ? " (and more)" : ""));
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& policy,
             std::optional<int> frames, std::ostream& out) {
    Config cfg = flags.resolve();
    const int threads = eval_threads(cfg.train.eval_threads);
    const int n_frames = frames.value_or(cfg.train.eval_frames);
    if (n_frames < cfg.train.eval_shards) throw ConfigError({"--frames: must be at least eval_shards"});
    train::PolicyFactory factory;
    std::string label = policy;
    if (policy == "agent") {
        if (checkpoint.empty()) throw ConfigError({"--checkpoint: required for the agent policy"});
        require_file(checkpoint, "checkpoint");
        const core::ParamGroup params = core::load_checkpoint(checkpoint);
        check_compatible(params, cfg.train, checkpoint);
        factory = train::agent_policy(params, cfg.train.effective_agent(), cfg.train.aux, cfg.train.eval_epsilon);
        label = fs::path(checkpoint).filename().string();
    } else if (policy == "scripted") {
        factory = train::scripted_policy();
    } else if (policy == "random") {
        factory = train::random_policy();
    } else {
        throw ConfigError({"--policy: must be agent, scripted or random (got '" + policy + "')"});
    }
    const fs::path dir = cfg.out;
    make_out_dir(dir);
    const auto r = train::evaluate_policy(factory, cfg.train.task, n_frames, cfg.train.seed, cfg.train.eval_shards,
                                          threads);
    std::ostringstream csv;
    csv << std::setprecision(17) << "task,policy,seed,frames,episodes,successes,success_rate\n"
        << cfg.train.task << ',' << label << ',' << cfg.train.seed << ',' << n_frames << ',' << r.episodes << ','
        << r.successes << ',' << r.success_rate << '\n';
    write_text(dir / "eval.csv", csv.str());
    out << cfg.train.task << ' ' << label << ": " << r.successes << '/' << r.episodes << " episodes succeeded ("
        << r.success_rate << ")\n";
    return kExitOk;
}

int cmd_dataset(const std::string& kind, std::uint64_t seed, const std::string& out_dir, int n, std::ostream& out) {
    probe::Dataset data;
    if (kind == "programmatic") {
        data = probe::gen_programmatic(seed);
    } else if (kind == "random") {
        if (n < 1) throw ConfigError({"--n: must be >= 1"});
        data = probe::gen_random(seed, n);
    } else {
        throw ConfigError({"--kind: must be programmatic or random (got '" + kind + "')"});
    }
    make_out_dir(out_dir);
    const fs::path path = fs::path(out_dir) / (kind + ".jsonl");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw PathError("cannot write " + path.string());
    probe::write_dataset(f, data);
    if (!f) throw PathError("failed writing " + path.string());
    out << data.size() << " tuples -> " << path.string() << '\n';
    return kExitOk;
}

int cmd_probe(const std::vector<std::string>& checkpoints, const std::string& dataset, std::uint64_t seed, int seeds,
              int epochs, const std::string& out_dir, std::ostream& out, std::ostream& err) {
    if (seeds < 1) throw ConfigError({"--seeds: must be >= 1"});
    if (epochs < 1) throw ConfigError({"--epochs: must be >= 1"});
    require_file(dataset, "dataset");
    std::vector<probe::Encoder> encoders;
    for (const auto& spec : checkpoints) {
        const auto eq = spec.find('=');
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
        require_file(path, "checkpoint");
        encoders.push_back(probe::checkpoint_encoder(name, core::load_checkpoint(path)));
    }
    encoders.push_back(probe::ground_truth_encoder());
    encoders.push_back(probe::random_encoder(seed));
    const probe::Dataset data = probe::load_dataset(dataset);
    make_out_dir(out_dir);
    std::vector<std::uint64_t> seed_list;
    for (int i = 0; i < seeds; ++i) seed_list.push_back(seed + static_cast<std::uint64_t>(i));
    probe::ProbeOptions opts;
    opts.epochs = epochs;
    const auto rows = probe::probe_report(encoders, data, seed_list, opts, &err);
    std::ostringstream csv;
    probe::write_report(csv, rows);
    write_text(fs::path(out_dir) / "probe_report.csv", csv.str());
    for (const auto& e : encoders) {
        for (probe::ProbeTarget t : probe::kAllTargets) {
            const auto s = probe::summarize(rows, e.name, t);
            out << std::left << std::setw(16) << e.name << std::setw(12) << probe::to_string(t) << std::fixed
                << std::setprecision(1) << 100 * s.mean << " +- " << 100 * s.std_error << '\n';
        }
    }
    out.unsetf(std::ios::fixed);
    return kExitOk;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir, const std::string& reference,
               std::ostream& out) {
    if (run_dirs.empty()) throw ConfigError({"report: at least one run directory is required"});
    std::vector<RunData> runs;
    for (const auto& d : run_dirs) runs.push_back(load_run(d));
    make_out_dir(out_dir);
    for (const auto& p : write_report(runs, out_dir, reference)) out << p.string() << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Object-interaction agents in a procedural kitchen", "load_kitchen"};
    app.require_subcommand(1);

    ConfigFlags train_flags;
    MatrixFlags matrix;
    auto* train = app.add_subcommand("train", "train an agent and write metrics.csv and checkpoints");
    train_flags.attach(train, true);
    auto* matrix_flag = train->add_flag(
        "--matrix", matrix.enabled,
        "train every task x method x seed, each in its own process under <out>/<task>/<method>/seed_<n>");
    train->add_option("--tasks", matrix.tasks, "matrix tasks (default: every task)")->delimiter(',')->needs(matrix_flag);
    train->add_option("--methods", matrix.methods, "matrix methods, as aux[+attn_<policy>][+model_attn_off]")
        ->delimiter(',')
        ->needs(matrix_flag);
    train->add_option("--seeds", matrix.seeds, "matrix seeds, counting up from --seed")->needs(matrix_flag);
    train->add_option("--jobs", matrix.jobs, "matrix runs in parallel")->needs(matrix_flag);

    ConfigFlags eval_flags;
    std::string eval_ckpt;
    std::string eval_policy = "agent";
    std::optional<int> eval_frames;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint (or a reference policy)");
    eval_flags.attach(eval, false);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file");
    eval->add_option("--policy", eval_policy, "agent, scripted or random");
    eval->add_option("--frames", eval_frames, "environment steps (default: eval_frames of the config)");

    std::vector<std::string> probe_ckpts;
    std::string probe_dataset;
    std::uint64_t probe_seed = 0;
    int probe_seeds = 5;
    int probe_epochs = 2000;
    std::string probe_out = "probe";
    auto* probe_cmd = app.add_subcommand("probe", "linear probes on frozen encoders");
    probe_cmd->add_option("--checkpoint", probe_ckpts, "encoder checkpoint, as PATH or NAME=PATH (repeatable)");
    probe_cmd->add_option("--dataset", probe_dataset, "JSON-lines dataset")->required();
    probe_cmd->add_option("--seed", probe_seed, "first probe seed; also seeds the random-init control");
    probe_cmd->add_option("--seeds", probe_seeds, "number of probe seeds");
    probe_cmd->add_option("--epochs", probe_epochs, "gradient descent epochs");
    probe_cmd->add_option("--out", probe_out, "output directory");

    std::string ds_kind;
    std::uint64_t ds_seed = 0;
    std::string ds_out = "datasets";
    int ds_n = 4000;
    auto* dataset = app.add_subcommand("dataset", "generate an interaction dataset");
    dataset->add_option("--kind", ds_kind, "programmatic or random")->required();
    dataset->add_option("--seed", ds_seed, "seed");
    dataset->add_option("--out", ds_out, "output directory");
    dataset->add_option("--n", ds_n, "samples for the random kind");

    std::vector<std::string> report_runs;
    std::string report_out = "report";
    std::string report_ref = "oracle";
    std::uint64_t report_seed = 0;
    auto* report = app.add_subcommand("report", "learning curves, %AUC bars and a combined CSV");
    report->add_option("runs", report_runs, "run directories written by train")->required();
    report->add_option("--out", report_out, "output directory");
    report->add_option("--reference", report_ref, "method the %AUC is relative to");
    report->add_option("--seed", report_seed, "accepted for uniformity; the report is deterministic");

    std::vector<std::string> argv_store;
    argv_store.push_back("load_kitchen");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        if (*train) return matrix.enabled ? cmd_train_matrix(train_flags, matrix, out) : cmd_train(train_flags, out);
        if (*eval) return cmd_eval(eval_flags, eval_ckpt, eval_policy, eval_frames, out);
        if (*probe_cmd)
            return cmd_probe(probe_ckpts, probe_dataset, probe_seed, probe_seeds, probe_epochs, probe_out, out, err);
        if (*dataset) return cmd_dataset(ds_kind, ds_seed, ds_out, ds_n, out);
        if (*report) return cmd_report(report_runs, report_out, report_ref, out);
    } catch (const ConfigError& e) {
        for (const auto& p : e.problems()) err << "config error: " << p << '\n';
        return kExitInvalid;
    } catch (const probe::EncoderMismatch& e) {
        err << "dimension error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const GridMismatch& e) {
        err << "grid error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const PathError& e) {
        err << "path error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const fs::filesystem_error& e) {
        err << "path error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const train::NonFiniteLoss& e) {
        err << "non-finite loss: " << e.what() << '\n';
        return kExitNonFinite;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace load::app

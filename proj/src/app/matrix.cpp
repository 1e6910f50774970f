#include "load/app/matrix.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "load/app/cli.hpp"

namespace load::app {

namespace fs = std::filesystem;

void apply_method(train::TrainConfig& cfg, const std::string& method) {
    std::vector<std::string> parts;
    std::stringstream ss(method);
    for (std::string p; std::getline(ss, p, '+');) parts.push_back(p);
    if (parts.empty() || parts.front().empty()) throw ConfigError({"method: empty method name"});
    std::vector<std::string> problems;
    try {
        cfg.aux = objmodel::parse_aux_mode(parts.front());
    } catch (const std::invalid_argument& e) {
        problems.push_back("method '" + method + "': " + e.what());
    }
    cfg.agent.attention_policy = agent::AttentionPolicy::Full;
    cfg.model.attention_model = true;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const std::string& p = parts[i];
        if (p == "model_attn_off") {
            cfg.model.attention_model = false;
        } else if (p.rfind("attn_", 0) == 0) {
            try {
                cfg.agent.attention_policy = agent::parse_attention_policy(p.substr(5));
            } catch (const std::invalid_argument& e) {
                problems.push_back("method '" + method + "': " + e.what());
            }
        } else {
            problems.push_back("method '" + method + "': unknown modifier '" + p + "'");
        }
    }
    if (!problems.empty()) throw ConfigError(problems);
}

std::vector<train::MetricsRow> train_run(const Config& cfg, std::ostream* log) {
    const fs::path dir = cfg.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw PathError("cannot create output directory " + dir.string());
    {
        std::ofstream f(dir / "config.json", std::ios::binary);
        f << serialize_config(cfg);
        if (!f) throw PathError("cannot write " + (dir / "config.json").string());
    }
    train::Trainer trainer(cfg.train);
    return trainer.run(dir, log);
}

std::vector<Config> plan_matrix(const Config& base, const std::vector<std::string>& tasks,
                                const std::vector<std::string>& methods, int seeds) {
    if (tasks.empty() || methods.empty() || seeds < 1)
        throw ConfigError({"matrix: needs at least one task, one method and one seed"});
    std::vector<Config> runs;
    std::vector<std::string> problems;
    for (const auto& task : tasks) {
        for (const auto& method : methods) {
            for (int s = 0; s < seeds; ++s) {
                Config c = base;
                c.train.task = task;
                c.train.seed = base.train.seed + static_cast<std::uint64_t>(s);
                try {
                    apply_method(c.train, method);
                    validate(c);
                } catch (const ConfigError& e) {
                    for (const auto& p : e.problems())
                        if (std::find(problems.begin(), problems.end(), p) == problems.end()) problems.push_back(p);
                    continue;
                }
                c.out = (fs::path(base.out) / task / method_label(c.train) / ("seed_" + std::to_string(c.train.seed)))
                            .string();
                runs.push_back(std::move(c));
            }
        }
    }
    if (!problems.empty()) throw ConfigError(problems);
    return runs;
}

bool run_complete(const Config& cfg) {
    const fs::path dir = cfg.out;
    try {
        if (!fs::exists(dir / "metrics.csv") || !fs::exists(dir / "final.ckpt")) return false;
        if (!(load_config(dir / "config.json") == cfg)) return false;
        const auto rows = train::read_metrics(dir / "metrics.csv");
        return !rows.empty() && rows.back().step == cfg.train.budget;
    } catch (const std::exception&) {
        return false;
    }
}

namespace {

int child_main(const Config& cfg) {
    std::ofstream log(fs::path(cfg.out) / "train.log");
    int code = kExitOk;
    try {
        train_run(cfg, &log);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        code = kExitInvalid;
    } catch (const PathError& e) {
        log << "path error: " << e.what() << '\n';
        code = kExitInvalid;
    } catch (const train::NonFiniteLoss& e) {
        log << "non-finite loss: " << e.what() << '\n';
        code = kExitNonFinite;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        code = kExitFailure;
    }
    log.close();
    return code;
}

}  // namespace

std::vector<MatrixOutcome> run_matrix(const std::vector<Config>& runs, int jobs, std::ostream& log) {
    if (jobs < 1) throw ConfigError({"--jobs: must be >= 1"});
    std::vector<MatrixOutcome> outcomes(runs.size());
    std::map<pid_t, std::size_t> active;

    auto reap_one = [&] {
        int status = 0;
        const pid_t pid = ::waitpid(-1, &status, 0);
        if (pid < 0) throw std::runtime_error("waitpid failed");
        const auto it = active.find(pid);
        if (it == active.end()) return;
        MatrixOutcome& o = outcomes[it->second];
        o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitFailure;
        log << (o.exit_code == kExitOk ? "done " : "FAILED ") << o.dir.string() << " (exit " << o.exit_code << ")\n"
            << std::flush;
        active.erase(it);
    };

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const Config& cfg = runs[i];
        outcomes[i].dir = cfg.out;
        if (run_complete(cfg)) {
            outcomes[i].skipped = true;
            log << "skip " << cfg.out << " (complete)\n";
            continue;
        }
        std::error_code ec;
        fs::create_directories(cfg.out, ec);
        if (ec) throw PathError("cannot create output directory " + cfg.out);
        while (static_cast<int>(active.size()) >= jobs) reap_one();
        log << "start " << cfg.out << '\n' << std::flush;
        std::cout.flush();
        std::cerr.flush();
        const pid_t pid = ::fork();
        if (pid < 0) throw std::runtime_error("fork failed");
        if (pid == 0) std::_Exit(child_main(cfg));
        active.emplace(pid, i);
    }
    while (!active.empty()) reap_one();
    return outcomes;
}

}  // namespace load::app

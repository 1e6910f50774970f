#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "load/train/trainer.hpp"

namespace load::app {

struct Config {
    train::TrainConfig train;
    std::string out = "runs/default";

    friend bool operator==(const Config&, const Config&) = default;
};

// Carries one message per offending field.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const { return problems_; }

private:
    std::vector<std::string> problems_;
};

// Strict JSON: unknown keys and wrongly typed values are rejected, missing keys keep their
// defaults, and every value is checked against its legal range.
Config parse_config(const std::string& text);
Config load_config(const std::filesystem::path& path);
// Every field, one per line, keys sorted.
std::string serialize_config(const Config& cfg);

// Throws ConfigError listing every field outside its legal set.
void validate(const Config& cfg);

// Keys accepted by parse_config.
std::vector<std::string> config_keys();

// Short name of the method a run trains: the aux mode plus any ablation switches.
std::string method_label(const train::TrainConfig& cfg);

}  // namespace load::app

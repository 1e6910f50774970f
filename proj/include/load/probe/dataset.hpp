#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "load/kitchen/env.hpp"

namespace load::probe {

using core::Real;

inline constexpr int kNumProperties = 6;
inline constexpr int kNumContainment = 2;

// Property order: is_on, is_open, is_cooked, is_filled, is_sliced, is_picked_up.
std::string_view property_name(int i);
// Containment order: inside something, has something inside.
std::string_view containment_name(int i);

struct Labels {
    int category = 0;
    std::array<bool, kNumProperties> properties{};
    std::array<bool, kNumContainment> containment{};
    friend bool operator==(const Labels&, const Labels&) = default;
};

// Ground-truth labels of object `id` in `w`.
Labels labels_of(const kitchen::WorldState& w, int id);

// One (state, action, next state) tuple, described through the interaction's target object.
struct LabeledSample {
    kitchen::WorldState before;
    kitchen::ActionSpec action;
    kitchen::WorldState after;
    int target = 0;             // simulator id of the object the action addressed
    bool applied = false;       // whether the interaction changed anything
    std::vector<Real> patch;    // 256 values: the target as seen after the action
    Labels labels;              // of the target after the action

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

using Dataset = std::vector<LabeledSample>;

// Builds a sample from a pre-step world and an interaction on one of its visible patches.
LabeledSample make_sample(const kitchen::WorldState& before, const kitchen::ActionSpec& action);

// Scripted interaction sequences over every task layout with the agent teleported in front of
// each target. Both successful and failing manifestations are recorded.
struct ProgrammaticStats {
    int sequences = 0;
    int fill_sequences = 0;
    int sink_instances = 0;
    int skipped_unreachable = 0;
};
Dataset gen_programmatic(std::uint64_t seed, ProgrammaticStats* stats = nullptr);

// Uniform-random policy over 500-step episodes (cycling through the task layouts); keeps the
// first n steps whose action was an interaction.
Dataset gen_random(std::uint64_t seed, int n = 4000);

// Re-executes every tuple and returns the index of the first one whose next state or labels
// differ from the record, or -1.
int first_replay_mismatch(std::span<const LabeledSample> data);

// JSON-lines codec. Tensors are base64 of little-endian float64 values.
std::string to_jsonl(const LabeledSample& s);
LabeledSample from_jsonl(const std::string& line);
void write_dataset(std::ostream& out, std::span<const LabeledSample> data);
void save_dataset(const std::filesystem::path& path, std::span<const LabeledSample> data);
Dataset read_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);

std::string encode_reals(std::span<const Real> values);
std::vector<Real> decode_reals(const std::string& text);

}  // namespace load::probe

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "load/kitchen/render.hpp"
#include "load/kitchen/tasks.hpp"
#include "load/kitchen/world.hpp"

namespace load::kitchen {

// Position of `cell` in the agent's view frame: forward and lateral (right positive) offsets.
struct ConeOffset {
    int forward = 0;
    int lateral = 0;
};
std::optional<ConeOffset> cone_offset(const Pose& pose, Cell cell);

// Visible ids ordered by (distance, held subtree first, id), capped at 20.
std::vector<int> visible_objects(const WorldState& w);

// Own cell or the faced adjacent cell.
bool within_reach(const WorldState& w, int id);

struct StepResult {
    WorldState world;
    ObservationBundle obs;
    double reward = 0.0;
    bool done = false;
    // Objects whose state differs from the pre-step world, ascending.
    std::vector<int> changed;
    // Whether an interaction changed anything.
    bool interaction_applied = false;
};

std::pair<WorldState, ObservationBundle> reset(const std::string& task, std::uint64_t seed);

// Pure transition. Throws std::logic_error after done and std::out_of_range for a patch index
// not in the current observation.
StepResult step(const WorldState& w, const ActionSpec& action);

// Applies the interaction rules only (no timing, no step counter); returns true if state changed.
bool apply_interaction(WorldState& w, Interaction kind, int target);
void apply_navigation(WorldState& w, NavAction a);
void tick_timers(const WorldState& before, WorldState& after);

}  // namespace load::kitchen

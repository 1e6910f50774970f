#pragma once

#include <optional>
#include <vector>

#include "load/kitchen/env.hpp"

namespace load::kitchen {

// Pose from which `target` is both visible and within reach, with the current held subtree.
bool can_interact_from(const WorldState& w, const Pose& pose, int target);

// First navigation action of a shortest path to a pose where `target` can be interacted with;
// nullopt if already there or unreachable.
std::optional<NavAction> next_nav_toward(const WorldState& w, int target);

// Closest (by BFS order) pose with `target` in reach; nullopt if none.
std::optional<Pose> interaction_pose(const WorldState& w, int target);

// Index of `id` in the current visible list, or -1.
int patch_index_of(const WorldState& w, int id);

struct Subgoal {
    Interaction kind;
    int target;
};

// Hand-written solution plan for a task's reset layout. Empty for unknown tasks.
std::vector<Subgoal> task_plan(const WorldState& w);

// Reactive executor of a task plan. Advances a subgoal each time it issues the interaction;
// once the plan is exhausted it idles with LookUp until the episode ends.
class ScriptedPolicy {
public:
    explicit ScriptedPolicy(std::vector<Subgoal> plan) : plan_(std::move(plan)) {}
    ActionSpec act(const WorldState& w);
    bool finished() const { return stage_ >= plan_.size(); }

private:
    std::vector<Subgoal> plan_;
    std::size_t stage_ = 0;
};

}  // namespace load::kitchen

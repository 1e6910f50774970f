#include "load/kitchen/script.hpp"

#include <algorithm>
#include <array>
#include <deque>

namespace load::kitchen {

namespace {

constexpr int kNumPoses = kGridSize * kGridSize * 4 * 2;

int pose_key(const Pose& p) {
    return ((p.cell.row * kGridSize + p.cell.col) * 4 + static_cast<int>(p.yaw)) * 2 + static_cast<int>(p.pitch);
}

WorldState with_pose(const WorldState& w, const Pose& pose) {
    WorldState copy = w;
    copy.agent = pose;
    propagate_positions(copy);
    return copy;
}

struct Search {
    std::optional<Pose> goal;
    std::optional<NavAction> first;
};

Search bfs(const WorldState& w, int target) {
    std::array<int, kNumPoses> first_action;
    first_action.fill(-2);
    std::deque<Pose> queue;
    first_action[pose_key(w.agent)] = -1;
    queue.push_back(w.agent);
    while (!queue.empty()) {
        const Pose cur = queue.front();
        queue.pop_front();
        if (can_interact_from(w, cur, target)) {
            const int a = first_action[pose_key(cur)];
            return {cur, a < 0 ? std::nullopt : std::optional<NavAction>(static_cast<NavAction>(a))};
        }
        for (int a = 0; a < kNumNav; ++a) {
            WorldState probe;
            probe.agent = cur;
            apply_navigation(probe, static_cast<NavAction>(a));
            const int key = pose_key(probe.agent);
            if (first_action[key] != -2) continue;
            const int inherited = first_action[pose_key(cur)];
            first_action[key] = inherited < 0 ? a : inherited;
            queue.push_back(probe.agent);
        }
    }
    return {};
}

int first_of(const WorldState& w, Category c) {
    for (const auto& o : w.objects) {
        if (o.category == c) return o.id;
    }
    return -1;
}

}  // namespace

bool can_interact_from(const WorldState& w, const Pose& pose, int target) {
    const WorldState probe = with_pose(w, pose);
    if (!within_reach(probe, target)) return false;
    const auto vis = visible_objects(probe);
    return std::find(vis.begin(), vis.end(), target) != vis.end();
}

std::optional<NavAction> next_nav_toward(const WorldState& w, int target) { return bfs(w, target).first; }

std::optional<Pose> interaction_pose(const WorldState& w, int target) { return bfs(w, target).goal; }

int patch_index_of(const WorldState& w, int id) {
    const auto vis = visible_objects(w);
    const auto it = std::find(vis.begin(), vis.end(), id);
    return it == vis.end() ? -1 : static_cast<int>(it - vis.begin());
}

std::vector<Subgoal> task_plan(const WorldState& w) {
    using C = Category;
    using I = Interaction;
    const std::string& t = w.task;
    const int knife = first_of(w, C::Knife);
    if (t == "slice_bread") return {{I::Pickup, knife}, {I::Slice, first_of(w, C::Bread)}};
    if (t == "slice_lettuce_tomato") {
        return {{I::Pickup, knife}, {I::Slice, first_of(w, C::Lettuce)}, {I::Slice, first_of(w, C::Tomato)}};
    }
    if (t == "slice_apple_potato_lettuce") {
        return {{I::Pickup, knife},
                {I::Slice, first_of(w, C::Lettuce)},
                {I::Slice, first_of(w, C::Apple)},
                {I::Slice, first_of(w, C::Potato)}};
    }
    if (t == "cook_potato") {
        const int pot = first_of(w, C::Pot);
        const int burner = w.object(pot).parent;
        return {{I::Pickup, first_of(w, C::Potato)}, {I::Put, pot}, {I::TurnOn, w.object(burner).linked}};
    }
    if (t == "fill_cup") {
        const int cup = first_of(w, C::Cup);
        return {{I::Pickup, cup}, {I::Put, first_of(w, C::SinkBasin)}, {I::Fill, cup}};
    }
    if (t == "toast_bread") {
        const int toaster = first_of(w, C::Toaster);
        return {{I::Pickup, first_of(w, C::BreadSliced)}, {I::Put, toaster}, {I::TurnOn, toaster}};
    }
    if (t == "apple_plate_table") {
        const int plate = first_of(w, C::Plate);
        return {{I::Pickup, first_of(w, C::Apple)},
                {I::Put, plate},
                {I::Pickup, plate},
                {I::Put, first_of(w, C::DiningTable)}};
    }
    if (t == "salad") {
        const int plate = first_of(w, C::Plate);
        return {{I::Pickup, first_of(w, C::TomatoSliced)},
                {I::Put, plate},
                {I::Pickup, first_of(w, C::LettuceSliced)},
                {I::Put, plate}};
    }
    return {};
}

ActionSpec ScriptedPolicy::act(const WorldState& w) {
    if (finished()) return ActionSpec::navigate(NavAction::LookUp);
    const Subgoal& g = plan_[stage_];
    if (can_interact_from(w, w.agent, g.target)) {
        ++stage_;
        return ActionSpec::interaction(g.kind, patch_index_of(w, g.target));
    }
    const auto nav = next_nav_toward(w, g.target);
    // Unreachable targets cannot happen for registered layouts; idle rather than fail.
    return ActionSpec::navigate(nav.value_or(NavAction::LookUp));
}

}  // namespace load::kitchen

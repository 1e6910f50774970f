#include "load/kitchen/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <tuple>

namespace load::kitchen {

namespace {

int required_height(Pitch p) { return p == Pitch::Level ? 1 : 0; }

bool held_subtree(const WorldState& w, int id) { return w.held >= 0 && w.in_subtree(id, w.held); }

// An object sits in a heated slot: directly inside a running Toaster/Microwave, or inside a
// Pot/Pan resting on a burner whose knob is on.
bool heated(const WorldState& w, int id) {
    const int p = w.object(id).parent;
    if (p < 0) return false;
    const ObjectState& parent = w.object(p);
    if ((parent.category == Category::Toaster || parent.category == Category::Microwave) && parent.is_on) return true;
    if (parent.category != Category::Pot && parent.category != Category::Pan) return false;
    if (parent.parent < 0) return false;
    const ObjectState& burner = w.object(parent.parent);
    return burner.category == Category::StoveBurner && burner.linked >= 0 && w.object(burner.linked).is_on;
}

}  // namespace

std::optional<ConeOffset> cone_offset(const Pose& pose, Cell cell) {
    const Cell f = yaw_forward(pose.yaw);
    const Cell r = yaw_right(pose.yaw);
    const int dc = cell.col - pose.cell.col;
    const int dr = cell.row - pose.cell.row;
    ConeOffset off{dc * f.col + dr * f.row, dc * r.col + dr * r.row};
    if (off.forward < 0 || off.forward > 2 || std::abs(off.lateral) > 1) return std::nullopt;
    return off;
}

std::vector<int> visible_objects(const WorldState& w) {
    struct Entry {
        int distance;
        int not_held;
        int id;
    };
    std::vector<Entry> entries;
    const int want_height = required_height(w.agent.pitch);
    for (const auto& o : w.objects) {
        if (held_subtree(w, o.id)) {
            entries.push_back({0, 0, o.id});
            continue;
        }
        if (o.height != want_height || w.inside_closed(o.id)) continue;
        const auto off = cone_offset(w.agent, o.cell);
        if (!off) continue;
        entries.push_back({off->forward + std::abs(off->lateral), 1, o.id});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.distance, a.not_held, a.id) < std::tie(b.distance, b.not_held, b.id);
    });
    std::vector<int> ids;
    for (std::size_t i = 0; i < entries.size() && i < static_cast<std::size_t>(kMaxVisible); ++i) ids.push_back(entries[i].id);
    return ids;
}

bool within_reach(const WorldState& w, int id) {
    const Cell c = w.object(id).cell;
    const Cell a = w.agent.cell;
    const Cell f = yaw_forward(w.agent.yaw);
    return c == a || (c.col == a.col + f.col && c.row == a.row + f.row);
}

void apply_navigation(WorldState& w, NavAction a) {
    Pose& p = w.agent;
    const Cell f = yaw_forward(p.yaw);
    const Cell r = yaw_right(p.yaw);
    auto move = [&p](Cell d) {
        const Cell next{p.cell.col + d.col, p.cell.row + d.row};
        if (on_grid(next)) p.cell = next;
    };
    switch (a) {
        case NavAction::MoveAhead: move(f); break;
        case NavAction::MoveBack: move({-f.col, -f.row}); break;
        case NavAction::MoveRight: move(r); break;
        case NavAction::MoveLeft: move({-r.col, -r.row}); break;
        case NavAction::LookUp: p.pitch = Pitch::Level; break;
        case NavAction::LookDown: p.pitch = Pitch::Down; break;
        case NavAction::RotateRight: p.yaw = static_cast<Yaw>((static_cast<int>(p.yaw) + 1) % 4); break;
        case NavAction::RotateLeft: p.yaw = static_cast<Yaw>((static_cast<int>(p.yaw) + 3) % 4); break;
    }
}

bool apply_interaction(WorldState& w, Interaction kind, int target) {
    if (!within_reach(w, target)) return false;
    ObjectState& t = w.object(target);
    const CategoryInfo& ci = info(t.category);
    switch (kind) {
        case Interaction::Pickup:
            if (!ci.pickupable || w.held != kNoParent || w.inside_closed(target)) return false;
            t.parent = kAgentParent;
            t.is_picked_up = true;
            w.held = target;
            return true;
        case Interaction::Put: {
            if (w.held == kNoParent || !ci.receptacle) return false;
            if (w.in_subtree(target, w.held)) return false;
            if (ci.openable && !t.is_open) return false;
            ObjectState& x = w.object(w.held);
            if (!put_allowed(t.category, x.category)) return false;
            x.parent = target;
            x.is_picked_up = false;
            w.held = kNoParent;
            return true;
        }
        case Interaction::Open:
        case Interaction::Close: {
            const bool want = kind == Interaction::Open;
            if (!ci.openable || t.is_open == want) return false;
            t.is_open = want;
            return true;
        }
        case Interaction::TurnOn:
        case Interaction::TurnOff: {
            const bool want = kind == Interaction::TurnOn;
            if (!ci.toggleable || t.is_on == want) return false;
            t.is_on = want;
            return true;
        }
        case Interaction::Slice:
            if (w.held == kNoParent || w.object(w.held).category != Category::Knife) return false;
            if (!ci.sliced_variant || held_subtree(w, target)) return false;
            t.category = *ci.sliced_variant;
            t.is_sliced = true;
            return true;
        case Interaction::Fill:
            if (!ci.fillable || t.is_filled || t.parent < 0 || w.object(t.parent).category != Category::SinkBasin) {
                return false;
            }
            t.is_filled = true;
            return true;
    }
    return false;
}

void tick_timers(const WorldState& before, WorldState& after) {
    for (auto& o : after.objects) {
        if (!info(o.category).cookable || o.is_cooked) continue;
        // Heat must hold across the whole step: before the action and after it.
        if (!heated(before, o.id) || !heated(after, o.id)) continue;
        if (++o.cook_timer >= kCookDelay) {
            o.is_cooked = true;
            o.temperature = Temperature::Hot;
        }
    }
}

std::pair<WorldState, ObservationBundle> reset(const std::string& task, std::uint64_t seed) {
    const TaskSpec& spec = find_task(task);
    WorldState w = spec.build(seed);
    std::mt19937_64 rng(seed);
    const int cell = static_cast<int>(rng() % (kGridSize * kGridSize));
    w.agent = Pose{{cell % kGridSize, cell / kGridSize}, Yaw::N, Pitch::Level};
    w.rng_seed = seed;
    propagate_positions(w);
    check_invariants(w);
    ObservationBundle obs = observe(w);
    return {std::move(w), std::move(obs)};
}

StepResult step(const WorldState& w, const ActionSpec& action) {
    if (w.done) throw std::logic_error("step() called on a finished episode");
    StepResult r{w, {}, kStepPenalty, false, {}, false};
    WorldState& next = r.world;
    if (action.interact) {
        if (action.base < 0 || action.base >= kNumInteractions) throw std::out_of_range("bad interaction index");
        const std::vector<int> vis = visible_objects(w);
        if (action.patch_index < 0 || action.patch_index >= static_cast<int>(vis.size())) {
            throw std::out_of_range("patch index " + std::to_string(action.patch_index) + " but only " +
                                    std::to_string(vis.size()) + " objects visible");
        }
        r.interaction_applied =
            apply_interaction(next, static_cast<Interaction>(action.base), vis[static_cast<std::size_t>(action.patch_index)]);
    } else {
        if (action.base < 0 || action.base >= kNumNav) throw std::out_of_range("bad navigation index");
        apply_navigation(next, static_cast<NavAction>(action.base));
    }
    propagate_positions(next);
    tick_timers(w, next);
    ++next.step_count;
    const bool success = find_task(next.task).success(next);
    if (success && !w.solved) r.reward += kSuccessReward;
    next.solved = success;
    next.done = success || next.step_count >= kMaxSteps;
    r.done = next.done;
    check_invariants(next);
    for (std::size_t i = 0; i < next.objects.size(); ++i) {
        if (!(next.objects[i] == w.objects[i])) r.changed.push_back(static_cast<int>(i));
    }
    r.obs = observe(next);
    return r;
}

}  // namespace load::kitchen

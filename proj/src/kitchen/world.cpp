#include "load/kitchen/world.hpp"

#include <stdexcept>

namespace load::kitchen {

namespace {

constexpr std::array<std::string_view, kNumNav> kNavNames = {"MoveAhead",  "MoveBack", "MoveRight",   "MoveLeft",
                                                             "LookUp",     "LookDown", "RotateRight", "RotateLeft"};
constexpr std::array<std::string_view, kNumInteractions> kInteractionNames = {"Pickup", "Put",     "Open",  "Close",
                                                                              "TurnOn", "TurnOff", "Slice", "Fill"};

[[noreturn]] void violated(const std::string& what) { throw std::logic_error("world invariant violated: " + what); }

}  // namespace

std::string_view nav_name(NavAction a) { return kNavNames.at(static_cast<std::size_t>(a)); }
std::string_view interaction_name(Interaction a) { return kInteractionNames.at(static_cast<std::size_t>(a)); }

ActionSpec ActionSpec::from_flat(int flat) {
    if (flat < 0) throw std::out_of_range("negative flat action index");
    if (flat < kNumNav) return {false, flat, 0};
    const int rest = flat - kNumNav;
    return {true, rest % kNumInteractions, rest / kNumInteractions};
}

std::string ActionSpec::str() const {
    if (!interact) return std::string(nav_name(static_cast<NavAction>(base)));
    return std::string(interaction_name(static_cast<Interaction>(base))) + "@" + std::to_string(patch_index);
}

const ObjectState& WorldState::object(int id) const {
    if (id < 0 || id >= static_cast<int>(objects.size())) throw std::out_of_range("no object with id " + std::to_string(id));
    return objects[static_cast<std::size_t>(id)];
}

ObjectState& WorldState::object(int id) {
    return const_cast<ObjectState&>(static_cast<const WorldState&>(*this).object(id));
}

int WorldState::root_of(int id) const {
    int cur = id;
    for (std::size_t guard = 0; guard <= objects.size(); ++guard) {
        const int p = object(cur).parent;
        if (p < 0) return cur;
        cur = p;
    }
    violated("containment cycle through object " + std::to_string(id));
}

bool WorldState::in_subtree(int id, int ancestor) const {
    int cur = id;
    for (std::size_t guard = 0; guard <= objects.size(); ++guard) {
        if (cur == ancestor) return true;
        cur = object(cur).parent;
        if (cur < 0) return false;
    }
    violated("containment cycle through object " + std::to_string(id));
}

bool WorldState::has_children(int id) const {
    for (const auto& o : objects) {
        if (o.parent == id) return true;
    }
    return false;
}

std::vector<int> WorldState::children(int id) const {
    std::vector<int> out;
    for (const auto& o : objects) {
        if (o.parent == id) out.push_back(o.id);
    }
    return out;
}

bool WorldState::inside_closed(int id) const {
    int cur = object(id).parent;
    while (cur >= 0) {
        const ObjectState& p = object(cur);
        if (info(p.category).openable && !p.is_open) return true;
        cur = p.parent;
    }
    return false;
}

int WorldState::depth(int id) const {
    int d = 0;
    for (int cur = object(id).parent; cur >= 0; cur = object(cur).parent) ++d;
    return d;
}

void propagate_positions(WorldState& w) {
    for (auto& o : w.objects) {
        const int root = w.root_of(o.id);
        const ObjectState& r = w.object(root);
        if (r.parent == kAgentParent) {
            o.cell = w.agent.cell;
            o.height = 1;
        } else if (root != o.id) {
            o.cell = r.cell;
            o.height = r.height;
        }
    }
}

void check_invariants(const WorldState& w) {
    int held_count = 0;
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
        const ObjectState& o = w.objects[i];
        const std::string tag = std::string(name_of(o.category)) + "#" + std::to_string(o.id);
        if (o.id != static_cast<int>(i)) violated("object ids must be dense, found " + tag + " at slot " + std::to_string(i));
        if (o.parent != kNoParent && o.parent != kAgentParent && (o.parent < 0 || o.parent >= static_cast<int>(w.objects.size()))) {
            violated(tag + " has dangling parent");
        }
        if (o.is_picked_up != (o.parent == kAgentParent)) violated(tag + " is_picked_up disagrees with parent");
        if (o.parent == kAgentParent) ++held_count;
        const int root = w.root_of(o.id);
        const ObjectState& r = w.object(root);
        const Cell expect = r.parent == kAgentParent ? w.agent.cell : r.cell;
        if (!(o.cell == expect)) violated(tag + " cell differs from its root");
        if (!on_grid(o.cell)) violated(tag + " off grid");
        if (o.height != 0 && o.height != 1) violated(tag + " bad height");
        const CategoryInfo& ci = info(o.category);
        if (o.is_open && !ci.openable) violated(tag + " open but not openable");
        if (o.is_on && !ci.toggleable) violated(tag + " on but not toggleable");
        if (o.is_filled && !ci.fillable) violated(tag + " filled but not fillable");
        if (o.is_cooked && !ci.cookable) violated(tag + " cooked but not cookable");
        if (o.cook_timer < 0 || o.cook_timer > kCookDelay) violated(tag + " cook_timer out of range");
    }
    if (held_count > 1) violated("more than one held object");
    if (held_count == 1 ? w.held < 0 || w.object(w.held).parent != kAgentParent : w.held != kNoParent) {
        violated("held slot disagrees with object parents");
    }
    if (w.step_count < 0 || w.step_count > kMaxSteps) violated("step_count out of range");
    if (!on_grid(w.agent.cell)) violated("agent off grid");
}

Cell yaw_forward(Yaw y) {
    switch (y) {
        case Yaw::N: return {0, -1};
        case Yaw::E: return {1, 0};
        case Yaw::S: return {0, 1};
        case Yaw::W: return {-1, 0};
    }
    return {0, 0};
}

Cell yaw_right(Yaw y) { return yaw_forward(static_cast<Yaw>((static_cast<int>(y) + 1) % 4)); }

bool on_grid(Cell c) { return c.col >= 0 && c.col < kGridSize && c.row >= 0 && c.row < kGridSize; }

}  // namespace load::kitchen

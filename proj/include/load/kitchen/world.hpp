#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "load/kitchen/category.hpp"

namespace load::kitchen {

inline constexpr int kGridSize = 9;
inline constexpr int kMaxSteps = 500;
inline constexpr int kMaxVisible = 20;
inline constexpr int kCookDelay = 3;
inline constexpr double kStepPenalty = -0.04;
inline constexpr double kSuccessReward = 1.0;

// Parent sentinels.
inline constexpr int kNoParent = -1;
inline constexpr int kAgentParent = -2;

enum class Temperature : int { Cold, Room, Hot };
enum class Yaw : int { N, E, S, W };
enum class Pitch : int { Down, Level };

struct Cell {
    int col = 0;
    int row = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct ObjectState {
    int id = 0;
    Category category = Category::CounterTop;
    Cell cell;
    int height = 0;
    bool is_on = false;
    bool is_open = false;
    bool is_cooked = false;
    bool is_filled = false;
    bool is_sliced = false;
    bool is_picked_up = false;
    Temperature temperature = Temperature::Room;
    int parent = kNoParent;
    int cook_timer = 0;
    // Burner <-> knob pairing; kNoParent when unpaired.
    int linked = kNoParent;

    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct Pose {
    Cell cell;
    Yaw yaw = Yaw::N;
    Pitch pitch = Pitch::Level;
    friend bool operator==(const Pose&, const Pose&) = default;
};

enum class NavAction : int { MoveAhead, MoveBack, MoveRight, MoveLeft, LookUp, LookDown, RotateRight, RotateLeft };
enum class Interaction : int { Pickup, Put, Open, Close, TurnOn, TurnOff, Slice, Fill };

inline constexpr int kNumNav = 8;
inline constexpr int kNumInteractions = 8;

std::string_view nav_name(NavAction a);
std::string_view interaction_name(Interaction a);

struct ActionSpec {
    bool interact = false;
    int base = 0;
    int patch_index = 0;

    static ActionSpec navigate(NavAction a) { return {false, static_cast<int>(a), 0}; }
    static ActionSpec interaction(Interaction a, int patch) { return {true, static_cast<int>(a), patch}; }

    // Flat layout: navigation 0..7, then 8 + 8 * patch + interaction.
    int flat() const { return interact ? kNumNav + kNumInteractions * patch_index + base : base; }
    static ActionSpec from_flat(int flat);
    std::string str() const;

    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

// Objects are stored densely by id: objects[i].id == i.
struct WorldState {
    std::vector<ObjectState> objects;
    Pose agent;
    int held = kNoParent;
    int step_count = 0;
    std::uint64_t rng_seed = 0;
    std::string task;
    bool done = false;
    bool solved = false;

    const ObjectState& object(int id) const;
    ObjectState& object(int id);
    int root_of(int id) const;
    bool in_subtree(int id, int ancestor) const;
    bool has_children(int id) const;
    // Direct children in ascending id order.
    std::vector<int> children(int id) const;
    // True if any proper ancestor is an openable receptacle that is closed.
    bool inside_closed(int id) const;
    int depth(int id) const;

    friend bool operator==(const WorldState&, const WorldState&) = default;
};

// Re-derives cell and height of every non-root object from its root (held subtrees follow the agent).
void propagate_positions(WorldState& w);

// Throws std::logic_error describing the first violated invariant.
void check_invariants(const WorldState& w);

Cell yaw_forward(Yaw y);
Cell yaw_right(Yaw y);
bool on_grid(Cell c);

}  // namespace load::kitchen

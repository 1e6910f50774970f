#pragma once

// Stand-alone re-statement of the kitchen rules, used to audit the simulator. It shares no
// code with load::kitchen beyond converting the reset world into its own representation.

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "load/kitchen/world.hpp"

namespace oracle {

struct Item {
    std::string kind;
    int col = 0, row = 0, level = 0;
    bool on = false, open = false, cooked = false, filled = false, sliced = false, held = false;
    int temp = 1;  // 0 cold, 1 room, 2 hot
    int holder = -1;  // -1 none, -2 agent
    int timer = 0;
    int partner = -1;

    bool operator==(const Item&) const = default;
};

struct State {
    std::vector<Item> items;
    int col = 0, row = 0, facing = 0;  // facing: 0 N, 1 E, 2 S, 3 W
    bool looking_down = false;
    int carrying = -1;
    int t = 0;

    bool operator==(const State&) const = default;
};

inline const std::set<std::string>& kinds_with(const std::string& flag) {
    static const std::map<std::string, std::set<std::string>> flags = {
        {"pickup",
         {"Bread", "BreadSliced", "Knife", "Cup", "Pot", "Pan", "Potato", "PotatoSliced", "Apple", "AppleSliced",
          "Plate", "Tomato", "TomatoSliced", "Lettuce", "LettuceSliced", "Egg"}},
        {"receptacle",
         {"Toaster", "SinkBasin", "StoveBurner", "Pot", "Pan", "Plate", "DiningTable", "CounterTop", "Fridge",
          "Microwave"}},
        {"openable", {"Fridge", "Microwave"}},
        {"toggle", {"Toaster", "Faucet", "StoveKnob", "Microwave", "CoffeeMachine"}},
        {"fill", {"Cup", "Pot"}},
        {"cook", {"BreadSliced", "Potato", "PotatoSliced", "Egg"}},
    };
    return flags.at(flag);
}

inline bool has(const std::string& flag, const std::string& kind) { return kinds_with(flag).count(kind) > 0; }

inline std::string sliced_form(const std::string& kind) {
    static const std::map<std::string, std::string> m = {{"Bread", "BreadSliced"},
                                                         {"Potato", "PotatoSliced"},
                                                         {"Apple", "AppleSliced"},
                                                         {"Tomato", "TomatoSliced"},
                                                         {"Lettuce", "LettuceSliced"}};
    auto it = m.find(kind);
    return it == m.end() ? "" : it->second;
}

inline bool may_hold(const std::string& rec, const std::string& x) {
    if (rec == "Plate") return x == "Apple" || x == "AppleSliced" || x == "TomatoSliced" || x == "LettuceSliced";
    if (rec == "Toaster") return x == "BreadSliced";
    if (rec == "Pot" || rec == "Pan") return x == "Potato" || x == "PotatoSliced" || x == "Egg";
    if (rec == "SinkBasin") return x == "Cup" || x == "Pot" || x == "Plate";
    if (rec == "StoveBurner") return x == "Pot" || x == "Pan";
    if (rec == "DiningTable" || rec == "CounterTop" || rec == "Fridge" || rec == "Microwave") return has("pickup", x);
    return false;
}

inline State from_world(const load::kitchen::WorldState& w) {
    State s;
    for (const auto& o : w.objects) {
        Item it;
        it.kind = std::string(load::kitchen::name_of(o.category));
        it.col = o.cell.col;
        it.row = o.cell.row;
        it.level = o.height;
        it.on = o.is_on;
        it.open = o.is_open;
        it.cooked = o.is_cooked;
        it.filled = o.is_filled;
        it.sliced = o.is_sliced;
        it.held = o.is_picked_up;
        it.temp = static_cast<int>(o.temperature);
        it.holder = o.parent;
        it.timer = o.cook_timer;
        it.partner = o.linked;
        s.items.push_back(it);
    }
    s.col = w.agent.cell.col;
    s.row = w.agent.cell.row;
    s.facing = static_cast<int>(w.agent.yaw);
    s.looking_down = w.agent.pitch == load::kitchen::Pitch::Down;
    s.carrying = w.held;
    s.t = w.step_count;
    return s;
}

inline void heading(int facing, int& dc, int& dr) {
    static const int cols[4] = {0, 1, 0, -1};
    static const int rows[4] = {-1, 0, 1, 0};
    dc = cols[facing];
    dr = rows[facing];
}

inline int top(const State& s, int i) {
    while (s.items[i].holder >= 0) i = s.items[i].holder;
    return i;
}

inline bool under(const State& s, int i, int anc) {
    for (int cur = i; cur >= 0; cur = s.items[cur].holder) {
        if (cur == anc) return true;
    }
    return false;
}

inline bool sealed(const State& s, int i) {
    for (int cur = s.items[i].holder; cur >= 0; cur = s.items[cur].holder) {
        if (has("openable", s.items[cur].kind) && !s.items[cur].open) return true;
    }
    return false;
}

inline int depth_of(const State& s, int i) {
    int d = 0;
    for (int cur = s.items[i].holder; cur >= 0; cur = s.items[cur].holder) ++d;
    return d;
}

inline void settle(State& s) {
    for (std::size_t i = 0; i < s.items.size(); ++i) {
        const int r = top(s, static_cast<int>(i));
        if (s.items[r].holder == -2) {
            s.items[i].col = s.col;
            s.items[i].row = s.row;
            s.items[i].level = 1;
        } else {
            s.items[i].col = s.items[r].col;
            s.items[i].row = s.items[r].row;
            s.items[i].level = s.items[r].level;
        }
    }
}

inline std::vector<int> seen(const State& s) {
    int fc, fr, rc, rr;
    heading(s.facing, fc, fr);
    heading((s.facing + 1) % 4, rc, rr);
    std::vector<std::tuple<int, int, int>> keyed;
    for (std::size_t i = 0; i < s.items.size(); ++i) {
        const int id = static_cast<int>(i);
        if (s.carrying >= 0 && under(s, id, s.carrying)) {
            keyed.emplace_back(0, 0, id);
            continue;
        }
        const Item& it = s.items[i];
        if (it.level != (s.looking_down ? 0 : 1) || sealed(s, id)) continue;
        const int dc = it.col - s.col, dr = it.row - s.row;
        const int ahead = dc * fc + dr * fr, side = dc * rc + dr * rr;
        if (ahead < 0 || ahead > 2 || side < -1 || side > 1) continue;
        keyed.emplace_back(ahead + std::abs(side), 1, id);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<int> out;
    for (std::size_t k = 0; k < keyed.size() && k < 20; ++k) out.push_back(std::get<2>(keyed[k]));
    return out;
}

inline bool reachable(const State& s, int i) {
    int fc, fr;
    heading(s.facing, fc, fr);
    const Item& it = s.items[i];
    return (it.col == s.col && it.row == s.row) || (it.col == s.col + fc && it.row == s.row + fr);
}

inline bool warm(const State& s, int i) {
    const int h = s.items[i].holder;
    if (h < 0) return false;
    const Item& p = s.items[h];
    if ((p.kind == "Toaster" || p.kind == "Microwave") && p.on) return true;
    if (p.kind != "Pot" && p.kind != "Pan") return false;
    if (p.holder < 0) return false;
    const Item& b = s.items[p.holder];
    return b.kind == "StoveBurner" && b.partner >= 0 && s.items[b.partner].on;
}

// Applies action (flat index) and returns the next state. Assumes the action is legal.
inline State advance(const State& s, int flat) {
    State n = s;
    if (flat < 8) {
        int fc, fr, rc, rr;
        heading(s.facing, fc, fr);
        heading((s.facing + 1) % 4, rc, rr);
        auto go = [&n](int dc, int dr) {
            const int c = n.col + dc, r = n.row + dr;
            if (c >= 0 && c < 9 && r >= 0 && r < 9) {
                n.col = c;
                n.row = r;
            }
        };
        switch (flat) {
            case 0: go(fc, fr); break;
            case 1: go(-fc, -fr); break;
            case 2: go(rc, rr); break;
            case 3: go(-rc, -rr); break;
            case 4: n.looking_down = false; break;
            case 5: n.looking_down = true; break;
            case 6: n.facing = (n.facing + 1) % 4; break;
            case 7: n.facing = (n.facing + 3) % 4; break;
        }
    } else {
        const int verb = (flat - 8) % 8;
        const int slot = (flat - 8) / 8;
        const int target = seen(s)[static_cast<std::size_t>(slot)];
        Item& x = n.items[target];
        if (reachable(s, target)) {
            switch (verb) {
                case 0:  // pickup
                    if (has("pickup", x.kind) && n.carrying < 0 && !sealed(n, target)) {
                        x.holder = -2;
                        x.held = true;
                        n.carrying = target;
                    }
                    break;
                case 1:  // put
                    if (n.carrying >= 0 && has("receptacle", x.kind) && !under(n, target, n.carrying) &&
                        !(has("openable", x.kind) && !x.open) && may_hold(x.kind, n.items[n.carrying].kind)) {
                        n.items[n.carrying].holder = target;
                        n.items[n.carrying].held = false;
                        n.carrying = -1;
                    }
                    break;
                case 2:
                    if (has("openable", x.kind)) x.open = true;
                    break;
                case 3:
                    if (has("openable", x.kind)) x.open = false;
                    break;
                case 4:
                    if (has("toggle", x.kind)) x.on = true;
                    break;
                case 5:
                    if (has("toggle", x.kind)) x.on = false;
                    break;
                case 6:  // slice
                    if (n.carrying >= 0 && n.items[n.carrying].kind == "Knife" && !sliced_form(x.kind).empty() &&
                        !under(n, target, n.carrying)) {
                        x.kind = sliced_form(x.kind);
                        x.sliced = true;
                    }
                    break;
                case 7:  // fill
                    if (has("fill", x.kind) && x.holder >= 0 && n.items[x.holder].kind == "SinkBasin") x.filled = true;
                    break;
            }
        }
    }
    settle(n);
    for (std::size_t i = 0; i < n.items.size(); ++i) {
        Item& it = n.items[i];
        const int id = static_cast<int>(i);
        if (has("cook", it.kind) && !it.cooked && warm(s, id) && warm(n, id)) {
            it.timer += 1;
            if (it.timer == 3) {
                it.cooked = true;
                it.temp = 2;
            }
        }
    }
    n.t += 1;
    return n;
}

// Structural checks: acyclic containment, held bookkeeping, positions follow roots.
inline std::string audit(const State& s) {
    int carried = 0;
    for (std::size_t i = 0; i < s.items.size(); ++i) {
        int steps = 0;
        for (int cur = static_cast<int>(i); cur >= 0; cur = s.items[cur].holder) {
            if (++steps > static_cast<int>(s.items.size()) + 1) return "cycle at " + std::to_string(i);
        }
        const Item& it = s.items[i];
        if (it.held != (it.holder == -2)) return "held flag mismatch at " + std::to_string(i);
        if (it.holder == -2) ++carried;
        const Item& r = s.items[top(s, static_cast<int>(i))];
        const int c = r.holder == -2 ? s.col : r.col;
        const int rw = r.holder == -2 ? s.row : r.row;
        if (it.col != c || it.row != rw) return "position drift at " + std::to_string(i);
        if (it.open && !has("openable", it.kind)) return "open flag on " + it.kind;
        if (it.on && !has("toggle", it.kind)) return "on flag on " + it.kind;
        if (it.filled && !has("fill", it.kind)) return "filled flag on " + it.kind;
        if (it.cooked && !has("cook", it.kind)) return "cooked flag on " + it.kind;
    }
    if (carried > 1) return "more than one carried item";
    return "";
}

// Frame property: every field that changed between `before` and `after` must be one the
// action's rule entry names (plus cooking effects and positions of moved subtrees).
inline std::string frame_violation(const State& before, const State& after, int flat) {
    const bool interact = flat >= 8;
    const int verb = interact ? (flat - 8) % 8 : -1;
    const int target = interact ? seen(before)[static_cast<std::size_t>((flat - 8) / 8)] : -1;
    auto carried = [](const State& s, int i) { return s.carrying >= 0 && under(s, i, s.carrying); };
    for (std::size_t k = 0; k < before.items.size(); ++k) {
        const int i = static_cast<int>(k);
        const Item& a = before.items[k];
        const Item& b = after.items[k];
        const std::string tag = a.kind + "#" + std::to_string(i);
        const bool moved = carried(before, i) || carried(after, i);
        if ((a.col != b.col || a.row != b.row || a.level != b.level) && !moved) return tag + " moved";
        const bool relinked = (verb == 0 && i == target) || (verb == 1 && i == before.carrying);
        if ((a.holder != b.holder || a.held != b.held) && !relinked) return tag + " parent changed";
        if (a.open != b.open && !((verb == 2 || verb == 3) && i == target)) return tag + " open changed";
        if (a.on != b.on && !((verb == 4 || verb == 5) && i == target)) return tag + " on changed";
        if ((a.kind != b.kind || a.sliced != b.sliced) && !(verb == 6 && i == target)) return tag + " sliced";
        if (a.filled != b.filled && !(verb == 7 && i == target)) return tag + " filled changed";
        if ((a.timer != b.timer || a.cooked != b.cooked || a.temp != b.temp) && !has("cook", b.kind)) {
            return tag + " cooking state changed";
        }
        if (a.partner != b.partner) return tag + " pairing changed";
    }
    if (!interact && (before.carrying != after.carrying)) return "navigation changed the held slot";
    return "";
}

}  // namespace oracle

#include "load/kitchen/tasks.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace load::kitchen {

namespace {

using C = Category;

class Builder {
public:
    explicit Builder(std::uint64_t seed) { w_.rng_seed = seed; }

    int root(C c, Cell cell, int height) {
        ObjectState o;
        o.id = static_cast<int>(w_.objects.size());
        o.category = c;
        o.cell = cell;
        o.height = height;
        w_.objects.push_back(o);
        return o.id;
    }

    int inside(C c, int parent) {
        const ObjectState& p = w_.object(parent);
        const int id = root(c, p.cell, p.height);
        w_.object(id).parent = parent;
        if (p.category == C::Fridge) w_.object(id).temperature = Temperature::Cold;
        return id;
    }

    void link(int burner, int knob) {
        w_.object(burner).linked = knob;
        w_.object(knob).linked = burner;
    }

    WorldState take(const std::string& task) {
        w_.task = task;
        return std::move(w_);
    }

private:
    WorldState w_;
};

// Furniture shared by most layouts. Counters sit on the north wall and are seen at level
// pitch; the table and sink are low and need a downward look.
struct Kitchen {
    int counter_a = -1, counter_b = -1, counter_c = -1, table = -1, fridge = -1, microwave = -1, coffee = -1;
};

Kitchen furnish(Builder& b, bool counters = true) {
    Kitchen k;
    if (counters) {
        k.counter_a = b.root(C::CounterTop, {0, 2}, 1);
        k.counter_b = b.root(C::CounterTop, {4, 0}, 1);
        k.counter_c = b.root(C::CounterTop, {8, 2}, 1);
    }
    k.table = b.root(C::DiningTable, {4, 5}, 0);
    k.fridge = b.root(C::Fridge, {0, 8}, 1);
    k.microwave = b.root(C::Microwave, {8, 8}, 1);
    k.coffee = b.root(C::CoffeeMachine, {8, 5}, 1);
    b.inside(C::Egg, k.fridge);
    return k;
}

bool any_of_category(const WorldState& w, C c, const std::function<bool(const ObjectState&)>& pred) {
    return std::any_of(w.objects.begin(), w.objects.end(),
                       [&](const ObjectState& o) { return o.category == c && pred(o); });
}

bool exists(const WorldState& w, C c) {
    return any_of_category(w, c, [](const ObjectState&) { return true; });
}

bool parent_is(const WorldState& w, const ObjectState& o, C c) {
    return o.parent >= 0 && w.object(o.parent).category == c;
}

bool burner_active(const WorldState& w, int burner) {
    const ObjectState& b = w.object(burner);
    return b.category == C::StoveBurner && b.linked >= 0 && w.object(b.linked).is_on;
}

std::vector<Category> categories_in(const WorldState& w) {
    std::set<int> seen;
    for (const auto& o : w.objects) seen.insert(index_of(o.category));
    for (const auto& o : w.objects) {
        if (const auto v = info(o.category).sliced_variant) seen.insert(index_of(*v));
    }
    std::vector<Category> out;
    for (int i : seen) out.push_back(category_from_index(i));
    return out;
}

WorldState build_slice_bread(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.inside(C::Plate, k.table);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_a);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Tomato, k.table);
    b.inside(C::Knife, k.counter_a);
    return b.take("slice_bread");
}

WorldState build_slice_lettuce_tomato(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.inside(C::Plate, k.counter_c);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_b);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Tomato, k.table);
    b.inside(C::Lettuce, k.table);
    b.inside(C::Knife, k.counter_a);
    return b.take("slice_lettuce_tomato");
}

WorldState build_slice_apple_potato_lettuce(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.inside(C::Plate, k.counter_c);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_b);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Potato, k.table);
    b.inside(C::Lettuce, k.table);
    b.inside(C::Apple, k.table);
    b.inside(C::Tomato, k.counter_b);
    b.inside(C::Knife, k.counter_a);
    return b.take("slice_apple_potato_lettuce");
}

WorldState build_cook_potato(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b, false);
    const int burner0 = b.root(C::StoveBurner, {3, 0}, 1);
    const int knob0 = b.root(C::StoveKnob, {3, 0}, 1);
    const int burner1 = b.root(C::StoveBurner, {5, 0}, 1);
    const int knob1 = b.root(C::StoveKnob, {5, 0}, 1);
    b.link(burner0, knob0);
    b.link(burner1, knob1);
    b.inside(C::Pot, burner0);
    b.inside(C::Pan, burner1);
    b.inside(C::Plate, k.table);
    b.inside(C::Bread, k.table);
    b.inside(C::Potato, k.table);
    b.inside(C::Cup, k.table);
    b.inside(C::Tomato, k.table);
    b.inside(C::Knife, k.table);
    return b.take("cook_potato");
}

WorldState build_fill_cup(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.root(C::SinkBasin, {2, 0}, 0);
    b.root(C::Faucet, {2, 0}, 1);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_a);
    b.inside(C::Pot, k.counter_c);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Tomato, k.table);
    b.inside(C::Knife, k.counter_b);
    return b.take("fill_cup");
}

WorldState build_toast_bread(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.root(C::Toaster, {6, 0}, 1);
    b.inside(C::BreadSliced, k.counter_a);
    b.inside(C::BreadSliced, k.counter_a);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_b);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Tomato, k.table);
    b.inside(C::Knife, k.table);
    return b.take("toast_bread");
}

WorldState build_apple_plate_table(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.inside(C::Plate, k.counter_a);
    b.inside(C::Apple, k.counter_b);
    b.inside(C::Bread, k.counter_c);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_b);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Knife, k.table);
    return b.take("apple_plate_table");
}

WorldState build_salad(std::uint64_t seed) {
    Builder b(seed);
    Kitchen k = furnish(b);
    b.inside(C::Plate, k.table);
    b.inside(C::TomatoSliced, k.table);
    b.inside(C::TomatoSliced, k.table);
    b.inside(C::LettuceSliced, k.table);
    b.inside(C::LettuceSliced, k.table);
    b.inside(C::Bread, k.counter_b);
    b.inside(C::Cup, k.counter_c);
    b.inside(C::Pot, k.counter_b);
    b.inside(C::Pan, k.counter_c);
    b.inside(C::Tomato, k.counter_a);
    b.inside(C::Lettuce, k.counter_a);
    b.inside(C::Knife, k.counter_a);
    return b.take("salad");
}

TaskSpec make_task(std::string name, std::function<WorldState(std::uint64_t)> build,
                   std::function<bool(const WorldState&)> success) {
    TaskSpec t{std::move(name), std::move(build), std::move(success), {}};
    t.interactable = categories_in(t.build(0));
    return t;
}

std::vector<TaskSpec> make_registry() {
    std::vector<TaskSpec> r;
    r.push_back(make_task("slice_bread", build_slice_bread, [](const WorldState& w) { return exists(w, C::BreadSliced); }));
    r.push_back(make_task("slice_lettuce_tomato", build_slice_lettuce_tomato, [](const WorldState& w) {
        return exists(w, C::LettuceSliced) && exists(w, C::TomatoSliced);
    }));
    r.push_back(make_task("slice_apple_potato_lettuce", build_slice_apple_potato_lettuce, [](const WorldState& w) {
        return exists(w, C::AppleSliced) && exists(w, C::PotatoSliced) && exists(w, C::LettuceSliced);
    }));
    r.push_back(make_task("cook_potato", build_cook_potato, [](const WorldState& w) {
        auto cooked_in_pot = [&w](const ObjectState& o) {
            if (!o.is_cooked || !parent_is(w, o, C::Pot)) return false;
            const ObjectState& pot = w.object(o.parent);
            return pot.parent >= 0 && burner_active(w, pot.parent);
        };
        return any_of_category(w, C::Potato, cooked_in_pot) || any_of_category(w, C::PotatoSliced, cooked_in_pot);
    }));
    r.push_back(make_task("fill_cup", build_fill_cup, [](const WorldState& w) {
        return any_of_category(w, C::Cup, [](const ObjectState& o) { return o.is_filled; });
    }));
    r.push_back(make_task("toast_bread", build_toast_bread, [](const WorldState& w) {
        return any_of_category(w, C::BreadSliced,
                               [&w](const ObjectState& o) { return o.is_cooked && parent_is(w, o, C::Toaster); });
    }));
    r.push_back(make_task("apple_plate_table", build_apple_plate_table, [](const WorldState& w) {
        return any_of_category(w, C::Apple, [&w](const ObjectState& o) {
            return parent_is(w, o, C::Plate) && parent_is(w, w.object(o.parent), C::DiningTable);
        });
    }));
    r.push_back(make_task("salad", build_salad, [](const WorldState& w) {
        auto on_plate = [&w](const ObjectState& o) { return parent_is(w, o, C::Plate); };
        return any_of_category(w, C::TomatoSliced, on_plate) && any_of_category(w, C::LettuceSliced, on_plate);
    }));
    return r;
}

}  // namespace

const std::vector<TaskSpec>& task_registry() {
    static const std::vector<TaskSpec> registry = make_registry();
    return registry;
}

std::vector<std::string> task_names() {
    std::vector<std::string> names;
    for (const auto& t : task_registry()) names.push_back(t.name);
    return names;
}

const TaskSpec& find_task(const std::string& name) {
    for (const auto& t : task_registry()) {
        if (t.name == name) return t;
    }
    std::string known;
    for (const auto& n : task_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown task '" + name + "'; registered tasks: " + known);
}

}  // namespace load::kitchen

#include "load/kitchen/category.hpp"

#include <stdexcept>

namespace load::kitchen {

namespace {

using C = Category;

CategoryInfo entry(std::string_view name, bool pickupable = false, bool receptacle = false, bool openable = false,
                   bool toggleable = false, bool fillable = false, bool cookable = false,
                   std::optional<Category> sliced = std::nullopt) {
    return CategoryInfo{name, pickupable, receptacle, openable, toggleable, fillable, cookable, sliced};
}

const std::array<CategoryInfo, kNumCategories>& table() {
    static const std::array<CategoryInfo, kNumCategories> t = [] {
        std::array<CategoryInfo, kNumCategories> a{};
        auto set = [&a](C c, CategoryInfo ci) { a[index_of(c)] = ci; };
        set(C::Toaster, entry("Toaster", false, true, false, true));
        set(C::Bread, entry("Bread", true, false, false, false, false, false, C::BreadSliced));
        set(C::BreadSliced, entry("BreadSliced", true, false, false, false, false, true));
        set(C::Knife, entry("Knife", true));
        set(C::Cup, entry("Cup", true, false, false, false, true));
        set(C::SinkBasin, entry("SinkBasin", false, true));
        set(C::Faucet, entry("Faucet", false, false, false, true));
        set(C::StoveBurner, entry("StoveBurner", false, true));
        set(C::StoveKnob, entry("StoveKnob", false, false, false, true));
        set(C::Pot, entry("Pot", true, true, false, false, true));
        set(C::Pan, entry("Pan", true, true));
        set(C::Potato, entry("Potato", true, false, false, false, false, true, C::PotatoSliced));
        set(C::PotatoSliced, entry("PotatoSliced", true, false, false, false, false, true));
        set(C::Apple, entry("Apple", true, false, false, false, false, false, C::AppleSliced));
        set(C::AppleSliced, entry("AppleSliced", true));
        set(C::Plate, entry("Plate", true, true));
        set(C::Tomato, entry("Tomato", true, false, false, false, false, false, C::TomatoSliced));
        set(C::TomatoSliced, entry("TomatoSliced", true));
        set(C::Lettuce, entry("Lettuce", true, false, false, false, false, false, C::LettuceSliced));
        set(C::LettuceSliced, entry("LettuceSliced", true));
        set(C::DiningTable, entry("DiningTable", false, true));
        set(C::CounterTop, entry("CounterTop", false, true));
        set(C::Fridge, entry("Fridge", false, true, true));
        set(C::Microwave, entry("Microwave", false, true, true, true));
        set(C::CoffeeMachine, entry("CoffeeMachine", false, false, false, true));
        set(C::Egg, entry("Egg", true, false, false, false, false, true));
        return a;
    }();
    return t;
}

}  // namespace

const CategoryInfo& info(Category c) { return table().at(static_cast<std::size_t>(index_of(c))); }

std::string_view name_of(Category c) { return info(c).name; }

Category category_from_index(int index) {
    if (index < 0 || index >= kNumCategories) throw std::out_of_range("category index " + std::to_string(index));
    return static_cast<Category>(index);
}

std::optional<Category> parse_category(std::string_view name) {
    for (int i = 0; i < kNumCategories; ++i) {
        if (table()[i].name == name) return static_cast<Category>(i);
    }
    return std::nullopt;
}

bool put_allowed(Category receptacle, Category item) {
    const CategoryInfo& it = info(item);
    switch (receptacle) {
        case C::Plate:
            return item == C::AppleSliced || item == C::Apple || item == C::TomatoSliced || item == C::LettuceSliced;
        case C::Toaster:
            return item == C::BreadSliced;
        case C::Pot:
        case C::Pan:
            return item == C::Potato || item == C::PotatoSliced || item == C::Egg;
        case C::SinkBasin:
            return item == C::Cup || item == C::Pot || item == C::Plate;
        case C::StoveBurner:
            return item == C::Pot || item == C::Pan;
        case C::DiningTable:
        case C::CounterTop:
        case C::Fridge:
        case C::Microwave:
            return it.pickupable;
        default:
            return false;
    }
}

}  // namespace load::kitchen

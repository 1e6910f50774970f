#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace load::kitchen {

enum class Category : int {
    Toaster,
    Bread,
    BreadSliced,
    Knife,
    Cup,
    SinkBasin,
    Faucet,
    StoveBurner,
    StoveKnob,
    Pot,
    Pan,
    Potato,
    PotatoSliced,
    Apple,
    AppleSliced,
    Plate,
    Tomato,
    TomatoSliced,
    Lettuce,
    LettuceSliced,
    DiningTable,
    CounterTop,
    Fridge,
    Microwave,
    CoffeeMachine,
    Egg,
};

inline constexpr int kNumCategories = 26;

struct CategoryInfo {
    std::string_view name;
    bool pickupable = false;
    bool receptacle = false;
    bool openable = false;
    bool toggleable = false;
    bool fillable = false;
    bool cookable = false;
    // Set only for sliceable categories.
    std::optional<Category> sliced_variant;
};

const CategoryInfo& info(Category c);
inline int index_of(Category c) { return static_cast<int>(c); }
std::string_view name_of(Category c);
Category category_from_index(int index);
std::optional<Category> parse_category(std::string_view name);

inline bool sliceable(Category c) { return info(c).sliced_variant.has_value(); }

// Receptacle/content pairs accepted by Put.
bool put_allowed(Category receptacle, Category item);

}  // namespace load::kitchen

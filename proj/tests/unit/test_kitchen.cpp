#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "load/kitchen/env.hpp"
#include "load/kitchen/script.hpp"
#include "load/kitchen/trace.hpp"
#include "oracle/kitchen_oracle.hpp"

using namespace load::kitchen;
using load::core::Real;
using load::core::Tensor;

namespace {

WorldState empty_world(Cell agent, Yaw yaw = Yaw::N, Pitch pitch = Pitch::Level) {
    WorldState w;
    w.task = "slice_bread";
    w.agent = Pose{agent, yaw, pitch};
    return w;
}

int add_object(WorldState& w, Category c, Cell cell, int height, int parent = kNoParent) {
    ObjectState o;
    o.id = static_cast<int>(w.objects.size());
    o.category = c;
    o.cell = cell;
    o.height = height;
    o.parent = parent;
    w.objects.push_back(o);
    propagate_positions(w);
    return o.id;
}

int find_category(const WorldState& w, Category c) {
    for (const auto& o : w.objects) {
        if (o.category == c) return o.id;
    }
    return -1;
}

struct Rollout {
    std::vector<double> rewards;
    WorldState final_world;
    std::vector<ActionSpec> actions;
};

Rollout run_scripted(const std::string& task, std::uint64_t seed) {
    auto [w, obs] = reset(task, seed);
    ScriptedPolicy policy(task_plan(w));
    Rollout r;
    while (!w.done) {
        const ActionSpec a = policy.act(w);
        StepResult s = step(w, a);
        r.rewards.push_back(s.reward);
        r.actions.push_back(a);
        w = std::move(s.world);
    }
    r.final_world = w;
    return r;
}

std::vector<int> legal_flat_actions(const WorldState& w) {
    const int n = static_cast<int>(visible_objects(w).size());
    std::vector<int> out;
    for (int i = 0; i < kNumNav + kNumInteractions * n; ++i) out.push_back(i);
    return out;
}

}  // namespace

TEST(Category, TableConsistency) {
    for (int i = 0; i < kNumCategories; ++i) {
        const Category c = category_from_index(i);
        EXPECT_EQ(parse_category(name_of(c)), c);
        if (const auto v = info(c).sliced_variant) {
            EXPECT_FALSE(info(*v).sliced_variant.has_value()) << name_of(c);
            EXPECT_EQ(info(*v).pickupable, info(c).pickupable);
        }
        for (int j = 0; j < kNumCategories; ++j) {
            if (put_allowed(c, category_from_index(j))) {
                EXPECT_TRUE(info(c).receptacle) << name_of(c);
                EXPECT_TRUE(info(category_from_index(j)).pickupable) << name_of(category_from_index(j));
            }
        }
    }
    EXPECT_FALSE(parse_category("Spatula").has_value());
}

TEST(Actions, FlatIndexRoundTrip) {
    for (int f = 0; f < kNumNav + kNumInteractions * kMaxVisible; ++f) EXPECT_EQ(ActionSpec::from_flat(f).flat(), f);
    EXPECT_EQ(ActionSpec::interaction(Interaction::TurnOn, 2).flat(), 8 + 16 + 4);
}

TEST(Reset, DeterministicPerSeed) {
    for (const auto& name : task_names()) {
        auto [w1, o1] = reset(name, 77);
        auto [w2, o2] = reset(name, 77);
        EXPECT_EQ(w1, w2);
        EXPECT_EQ(o1, o2);
        EXPECT_TRUE(load::core::bit_equal(o1.ego, o2.ego));
    }
}

TEST(Reset, UnknownTaskListsRegistered) {
    try {
        reset("make_coffee", 1);
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const auto& n : task_names()) EXPECT_NE(msg.find(n), std::string::npos) << n;
    }
}

TEST(Reset, ToastBreadInventory) {
    auto [w, obs] = reset("toast_bread", 3);
    int slices = 0, toasters = 0;
    for (const auto& o : w.objects) {
        slices += o.category == Category::BreadSliced;
        toasters += o.category == Category::Toaster;
    }
    EXPECT_GE(slices, 1);
    EXPECT_EQ(toasters, 1);
}

TEST(Reset, StartCellsCoverGrid) {
    std::vector<int> counts(kGridSize * kGridSize, 0);
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        auto [w, obs] = reset("fill_cup", seed);
        EXPECT_EQ(w.agent.yaw, Yaw::N);
        EXPECT_EQ(w.agent.pitch, Pitch::Level);
        ++counts[w.agent.cell.row * kGridSize + w.agent.cell.col];
    }
    double chi2 = 0;
    const double expected = 1000.0 / 81.0;
    for (int c : counts) {
        EXPECT_GT(c, 0);
        chi2 += (c - expected) * (c - expected) / expected;
    }
    // 80 degrees of freedom; the 0.999 quantile is about 124.8.
    EXPECT_LT(chi2, 124.8);
}

TEST(Reset, TasksNeverStartSolved) {
    for (const auto& spec : task_registry()) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto [w, obs] = reset(spec.name, seed);
            EXPECT_FALSE(spec.success(w)) << spec.name;
            EXPECT_NO_THROW(check_invariants(w));
            EXPECT_EQ(w.step_count, 0);
        }
    }
}

TEST(Step, PickupCounterTopIsNoOp) {
    WorldState w = empty_world({4, 4});
    const int counter = add_object(w, Category::CounterTop, {4, 3}, 1);
    ASSERT_EQ(patch_index_of(w, counter), 0);
    StepResult r = step(w, ActionSpec::interaction(Interaction::Pickup, 0));
    EXPECT_EQ(r.world.objects, w.objects);
    EXPECT_DOUBLE_EQ(r.reward, -0.04);
    EXPECT_TRUE(r.changed.empty());
    EXPECT_FALSE(r.interaction_applied);
}

TEST(Step, ScriptedToastSequence) {
    auto [w, obs] = reset("toast_bread", 11);
    ScriptedPolicy policy(task_plan(w));
    int turn_on_step = -1;
    double last_reward = 0;
    int slice = -1;
    while (!w.done) {
        const ActionSpec a = policy.act(w);
        if (a.interact && a.base == static_cast<int>(Interaction::Pickup)) slice = visible_objects(w)[a.patch_index];
        StepResult r = step(w, a);
        if (a.interact && a.base == static_cast<int>(Interaction::TurnOn)) {
            turn_on_step = r.world.step_count;
            EXPECT_FALSE(r.done);
        }
        last_reward = r.reward;
        w = std::move(r.world);
    }
    ASSERT_GE(turn_on_step, 0);
    EXPECT_EQ(w.step_count, turn_on_step + 3);
    EXPECT_TRUE(w.object(slice).is_cooked);
    EXPECT_EQ(w.object(slice).temperature, Temperature::Hot);
    EXPECT_NEAR(last_reward, 0.96, 1e-12);
    EXPECT_TRUE(find_task("toast_bread").success(w));
}

TEST(Step, EveryTaskScriptSolvesWithExpectedRewards) {
    for (const auto& name : task_names()) {
        for (std::uint64_t seed : {0u, 5u, 42u}) {
            Rollout r = run_scripted(name, seed);
            ASSERT_TRUE(r.final_world.solved) << name << " seed " << seed;
            for (std::size_t i = 0; i + 1 < r.rewards.size(); ++i) EXPECT_DOUBLE_EQ(r.rewards[i], -0.04);
            EXPECT_NEAR(r.rewards.back(), 0.96, 1e-12);
            EXPECT_LT(r.rewards.size(), 80u) << name;
        }
    }
}

TEST(Step, TimeLimitWithoutSuccess) {
    auto [w, obs] = reset("toast_bread", 2);
    double total = 0;
    int steps = 0;
    while (!w.done) {
        StepResult r = step(w, ActionSpec::navigate(NavAction::LookUp));
        total += r.reward;
        ++steps;
        w = std::move(r.world);
    }
    EXPECT_EQ(steps, 500);
    EXPECT_NEAR(total, -20.0, 1e-9);
    EXPECT_THROW(step(w, ActionSpec::navigate(NavAction::LookUp)), std::logic_error);
}

TEST(Step, PatchIndexOutOfRange) {
    WorldState w = empty_world({4, 4});
    EXPECT_THROW(step(w, ActionSpec::interaction(Interaction::Pickup, 0)), std::out_of_range);
}

TEST(Step, PickingUpPlateCarriesApple) {
    WorldState w = empty_world({4, 4});
    add_object(w, Category::CounterTop, {4, 3}, 1);
    const int plate = add_object(w, Category::Plate, {4, 3}, 1, 0);
    const int apple = add_object(w, Category::Apple, {4, 3}, 1, plate);
    StepResult r = step(w, ActionSpec::interaction(Interaction::Pickup, patch_index_of(w, plate)));
    ASSERT_EQ(r.world.held, plate);
    r = step(r.world, ActionSpec::navigate(NavAction::MoveBack));
    EXPECT_EQ(r.world.object(apple).cell, r.world.agent.cell);
    EXPECT_EQ(r.world.object(apple).parent, plate);
    // Held subtree stays visible, held object first.
    const auto vis = visible_objects(r.world);
    ASSERT_GE(vis.size(), 2u);
    EXPECT_EQ(vis[0], plate);
    EXPECT_EQ(vis[1], apple);
}

TEST(Step, DirectionalToggles) {
    WorldState w = empty_world({4, 4});
    const int toaster = add_object(w, Category::Toaster, {4, 3}, 1);
    StepResult off = step(w, ActionSpec::interaction(Interaction::TurnOff, 0));
    EXPECT_FALSE(off.interaction_applied);
    StepResult on = step(w, ActionSpec::interaction(Interaction::TurnOn, 0));
    EXPECT_TRUE(on.world.object(toaster).is_on);
    StepResult again = step(on.world, ActionSpec::interaction(Interaction::TurnOn, 0));
    EXPECT_FALSE(again.interaction_applied);
}

TEST(Step, OutOfReachInteractionFails) {
    WorldState w = empty_world({4, 4});
    const int toaster = add_object(w, Category::Toaster, {4, 2}, 1);
    ASSERT_EQ(patch_index_of(w, toaster), 0);
    StepResult r = step(w, ActionSpec::interaction(Interaction::TurnOn, 0));
    EXPECT_FALSE(r.world.object(toaster).is_on);
}

TEST(Step, SlicingNeedsKnife) {
    WorldState w = empty_world({4, 4});
    add_object(w, Category::CounterTop, {4, 3}, 1);
    const int bread = add_object(w, Category::Bread, {4, 3}, 1, 0);
    const int knife = add_object(w, Category::Knife, {4, 3}, 1, 0);
    StepResult r = step(w, ActionSpec::interaction(Interaction::Slice, patch_index_of(w, bread)));
    EXPECT_FALSE(r.interaction_applied);
    r = step(w, ActionSpec::interaction(Interaction::Pickup, patch_index_of(w, knife)));
    r = step(r.world, ActionSpec::interaction(Interaction::Slice, patch_index_of(r.world, bread)));
    EXPECT_EQ(r.world.object(bread).category, Category::BreadSliced);
    EXPECT_TRUE(r.world.object(bread).is_sliced);
    EXPECT_TRUE(find_task("slice_bread").success(r.world));
}

TEST(Step, PutIntoOwnSubtreeRejected) {
    WorldState w = empty_world({4, 4});
    add_object(w, Category::CounterTop, {4, 3}, 1);
    const int pot = add_object(w, Category::Pot, {4, 3}, 1, 0);
    StepResult r = step(w, ActionSpec::interaction(Interaction::Pickup, patch_index_of(w, pot)));
    r = step(r.world, ActionSpec::interaction(Interaction::Put, patch_index_of(r.world, pot)));
    EXPECT_FALSE(r.interaction_applied);
    EXPECT_EQ(r.world.held, pot);
}

TEST(Visibility, ClosedFridgeHidesContents) {
    WorldState w = empty_world({4, 4});
    const int fridge = add_object(w, Category::Fridge, {4, 3}, 1);
    const int cup = add_object(w, Category::Cup, {4, 3}, 1, fridge);
    auto vis = visible_objects(w);
    EXPECT_EQ(vis, std::vector<int>{fridge});
    StepResult r = step(w, ActionSpec::interaction(Interaction::Open, 0));
    vis = visible_objects(r.world);
    EXPECT_EQ(vis, (std::vector<int>{fridge, cup}));
    // Pickup is possible only once open.
    StepResult closed_pick = step(w, ActionSpec::interaction(Interaction::Pickup, 0));
    EXPECT_EQ(closed_pick.world.held, kNoParent);
}

TEST(Visibility, CapAtTwentyByDistanceThenId) {
    WorldState w = empty_world({4, 4});
    const Cell cells[3] = {{4, 3}, {4, 2}, {3, 2}};
    for (int i = 0; i < 25; ++i) add_object(w, Category::Apple, cells[i % 3], 1);
    const auto vis = visible_objects(w);
    ASSERT_EQ(vis.size(), 20u);
    std::vector<int> expect;
    for (int d = 1; d <= 3; ++d) {
        for (int i = 0; i < 25; ++i) {
            if (i % 3 == d - 1) expect.push_back(i);
        }
    }
    expect.resize(20);
    EXPECT_EQ(vis, expect);
}

TEST(Visibility, PitchSelectsHeight) {
    WorldState w = empty_world({4, 4});
    const int low = add_object(w, Category::DiningTable, {4, 3}, 0);
    const int high = add_object(w, Category::CounterTop, {5, 3}, 1);
    EXPECT_EQ(visible_objects(w), std::vector<int>{high});
    w.agent.pitch = Pitch::Down;
    EXPECT_EQ(visible_objects(w), std::vector<int>{low});
}

TEST(Render, PatchDeterministic) {
    auto [w, obs] = reset("toast_bread", 1);
    for (int id = 0; id < static_cast<int>(w.objects.size()); ++id) {
        EXPECT_TRUE(load::core::bit_equal(render_patch(w, id, Yaw::E), render_patch(w, id, Yaw::E)));
    }
}

TEST(Render, ToggleChangesExactlyTopRows) {
    WorldState w = empty_world({4, 4});
    const int toaster = add_object(w, Category::Toaster, {4, 3}, 1);
    const Tensor off = render_patch(w, toaster, Yaw::S);
    w.object(toaster).is_on = true;
    const Tensor on = render_patch(w, toaster, Yaw::S);
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) {
            if (r < 2) {
                EXPECT_NE(off.at(r, c), on.at(r, c));
            } else {
                EXPECT_EQ(off.at(r, c), on.at(r, c));
            }
        }
    }
}

TEST(Render, ContainmentStampIsCentral) {
    WorldState w = empty_world({4, 4});
    const int toaster = add_object(w, Category::Toaster, {4, 3}, 1);
    const Tensor empty = render_patch(w, toaster, Yaw::N);
    add_object(w, Category::BreadSliced, {4, 3}, 1, toaster);
    const Tensor full = render_patch(w, toaster, Yaw::N);
    int diffs = 0;
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) {
            const bool inside = r >= kStampOffset && r < kStampOffset + kStampSide && c >= kStampOffset &&
                                c < kStampOffset + kStampSide;
            if (!inside) {
                EXPECT_EQ(empty.at(r, c), full.at(r, c));
            }
            diffs += empty.at(r, c) != full.at(r, c);
        }
    }
    EXPECT_GT(diffs, 0);
}

TEST(Render, RotationChangesGlyph) {
    const auto& g = base_glyph(Category::Knife);
    WorldState w = empty_world({4, 4});
    const int knife = add_object(w, Category::Knife, {4, 3}, 1);
    const Tensor north = render_patch(w, knife, Yaw::N);
    const Tensor east = render_patch(w, knife, Yaw::E);
    EXPECT_TRUE(std::equal(g.begin(), g.end(), north.data().begin()));
    // One clockwise quarter turn.
    for (int r = 0; r < kPatchSide; ++r) {
        for (int c = 0; c < kPatchSide; ++c) EXPECT_EQ(east.at(r, c), north.at(kPatchSide - 1 - c, r));
    }
    for (Real v : north.data()) EXPECT_TRUE(v == kGlyphLow || v == kGlyphHigh);
}

TEST(Render, EgoEmptyCone) {
    WorldState w = empty_world({4, 4});
    const Tensor img = render_ego(w);
    for (int r = 0; r < kEgoSide; ++r) {
        for (int c = 0; c < kEgoSide; ++c) {
            const bool cone = r >= kEgoBlock && c < 3 * kEgoBlock;
            EXPECT_EQ(img.at(r, c), cone ? kEgoEmpty : 0.0);
        }
    }
}

TEST(Render, EgoFullTurnIdentical) {
    auto [w, obs] = reset("salad", 9);
    WorldState cur = w;
    for (int i = 0; i < 4; ++i) cur = step(cur, ActionSpec::navigate(NavAction::RotateRight)).world;
    EXPECT_TRUE(load::core::bit_equal(render_ego(w), render_ego(cur)));
}

TEST(Render, EgoMovingObjectChangesTwoBlocks) {
    WorldState w = empty_world({4, 4});
    const int apple = add_object(w, Category::Apple, {4, 3}, 1);
    const Tensor before = render_ego(w);
    w.object(apple).cell = {3, 3};
    const Tensor after = render_ego(w);
    std::set<std::pair<int, int>> blocks;
    for (int r = 0; r < kEgoSide; ++r) {
        for (int c = 0; c < kEgoSide; ++c) {
            if (before.at(r, c) != after.at(r, c)) blocks.insert({r / kEgoBlock, c / kEgoBlock});
        }
    }
    EXPECT_EQ(blocks.size(), 2u);
}

TEST(Success, FillCupPersistsOutsideSink) {
    auto [w, obs] = reset("fill_cup", 0);
    const int cup = find_category(w, Category::Cup);
    w.object(cup).is_filled = true;
    EXPECT_TRUE(find_task("fill_cup").success(w));
}

TEST(Observation, ShapesAndRanges) {
    auto [w, obs] = reset("cook_potato", 4);
    WorldState cur = w;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 300 && !cur.done; ++i) {
        const auto legal = legal_flat_actions(cur);
        StepResult r = step(cur, ActionSpec::from_flat(legal[rng() % legal.size()]));
        const ObservationBundle& o = r.obs;
        EXPECT_EQ(o.ego.shape(), (load::core::Shape{32, 32}));
        EXPECT_LE(o.num_patches(), 20);
        EXPECT_EQ(o.patches.size(), static_cast<std::size_t>(o.num_patches()) * kPatchSize);
        for (Real v : o.patches) EXPECT_TRUE(v >= 0 && v <= 1);
        for (Real v : o.loc) EXPECT_TRUE(v >= -1 && v <= 1);
        cur = std::move(r.world);
    }
}

TEST(Trace, ReplayReproducesObservations) {
    auto [w, obs] = reset("apple_plate_table", 8);
    EpisodeHeader header{"apple_plate_table", 8, observation_digest(obs)};
    std::vector<TraceRecord> records;
    std::mt19937_64 rng(8);
    WorldState cur = w;
    for (int i = 0; i < 200 && !cur.done; ++i) {
        const auto legal = legal_flat_actions(cur);
        const ActionSpec a = ActionSpec::from_flat(legal[rng() % legal.size()]);
        StepResult r = step(cur, a);
        records.push_back(make_record(r, a));
        cur = std::move(r.world);
    }
    std::stringstream ss;
    write_trace(ss, header, records);
    auto [h2, r2] = read_trace(ss);
    EXPECT_EQ(r2, records);
    EXPECT_EQ(replay_mismatch(h2, r2), -1);
    r2[50].obs_digest ^= 1;
    EXPECT_EQ(replay_mismatch(h2, r2), 50);
}

TEST(OracleAudit, RandomStepsMatchIndependentRules) {
    std::mt19937_64 rng(123);
    int audited = 0;
    for (const auto& name : task_names()) {
        auto [w, obs] = reset(name, rng());
        oracle::State shadow = oracle::from_world(w);
        for (int i = 0; i < 250; ++i) {
            if (w.done) break;
            const auto legal = legal_flat_actions(w);
            const int flat = legal[rng() % legal.size()];
            StepResult r = step(w, ActionSpec::from_flat(flat));
            shadow = oracle::advance(shadow, flat);
            ASSERT_EQ(oracle::from_world(r.world), shadow) << name << " step " << i << " action " << flat;
            ASSERT_EQ(oracle::audit(shadow), "");
            ASSERT_EQ(oracle::seen(shadow), r.obs.patch_ids);
            ASSERT_EQ(oracle::frame_violation(oracle::from_world(w), shadow, flat), "") << name << " step " << i;
            w = std::move(r.world);
            ++audited;
        }
    }
    EXPECT_GT(audited, 1000);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "load/agent/net.hpp"
#include "load/agent/policy.hpp"
#include "load/kitchen/env.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace load;
using namespace load::agent;
using core::Graph;
using core::ParamGroup;
using core::Shape;
using core::Tensor;

namespace {

AgentConfig small_config(AttentionPolicy policy = AttentionPolicy::Full) { return load::testing::tiny_agent_config(policy); }

using load::testing::random_obs;

kitchen::ObservationBundle permuted(const kitchen::ObservationBundle& obs, const std::vector<int>& perm) {
    kitchen::ObservationBundle out = obs;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto src = obs.patch(perm[i]);
        std::copy(src.begin(), src.end(), out.patches.begin() + static_cast<long>(i) * kitchen::kPatchSize);
        out.patch_ids[i] = obs.patch_ids[perm[i]];
    }
    return out;
}

Tensor rows_of(const Tensor& m, int begin, int end) {
    Tensor out(Shape{end - begin, m.cols()});
    std::copy(m.ptr() + static_cast<std::size_t>(begin) * m.cols(), m.ptr() + static_cast<std::size_t>(end) * m.cols(),
              out.ptr());
    return out;
}

Var patches_var(Graph& g, const kitchen::ObservationBundle& obs) {
    return g.constant(Tensor(Shape{obs.num_patches(), kitchen::kPatchSize}, obs.patches));
}

Var context_var(Graph& g, const ParamGroup& p, const kitchen::ObservationBundle& obs) {
    Var ego = g.constant(obs.ego.reshaped(Shape{1, kitchen::kEgoSide * kitchen::kEgoSide}));
    Var loc = g.constant(Tensor(Shape{1, kitchen::kLocDim}, std::vector<Real>(obs.loc.begin(), obs.loc.end())));
    return core::concat_cols({dense_stack(g, p, names::kEgoEncoder, ego, false),
                              dense_stack(g, p, names::kLocEncoder, loc, false)});
}

}  // namespace

TEST(Attention, TwoObjectIdentityExample) {
    Graph g;
    Var z = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Var eye = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Var q = g.constant(Tensor::matrix(1, 2, {1, 0}));
    const Attended a = attend(q, z, eye, eye, AttentionPolicy::Full);
    // Hand softmax of logits [1/sqrt(2), 0].
    const double e = std::exp(1.0 / std::sqrt(2.0));
    const double w0 = e / (e + 1.0);
    EXPECT_NEAR(a.weights.value()[0], w0, 1e-12);
    EXPECT_NEAR(a.weights.value()[1], 1.0 - w0, 1e-12);
    EXPECT_NEAR(a.weights.value()[0], 0.6698, 5e-5);
    EXPECT_NEAR(a.output.value()[0], 0.6698, 5e-5);
    EXPECT_NEAR(a.output.value()[1], 0.3302, 5e-5);
}

TEST(Attention, SingletonReturnsTheRowExactly) {
    core::Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Graph g;
        Var z = g.constant(load::testing::random_tensor({1, 5}, rng, -3, 3));
        Var q = g.constant(load::testing::random_tensor({1, 7}, rng, -3, 3));
        const Attended a = attend(q, z, g.constant(load::testing::random_tensor({7, 4}, rng, -2, 2)),
                                  g.constant(load::testing::random_tensor({5, 4}, rng, -2, 2)), AttentionPolicy::Full);
        EXPECT_EQ(a.weights.value()[0], 1.0);
        EXPECT_TRUE(core::bit_equal(a.output.value(), z.value()));
    }
}

TEST(Attention, IdenticalRowsReturnThatRow) {
    core::Rng rng(4);
    Graph g;
    const Tensor row = load::testing::random_tensor({1, 5}, rng, -1, 1);
    Tensor two(Shape{2, 5});
    std::copy(row.ptr(), row.ptr() + 5, two.ptr());
    std::copy(row.ptr(), row.ptr() + 5, two.ptr() + 5);
    const Attended a = attend(g.constant(load::testing::random_tensor({1, 5}, rng, -1, 1)), g.constant(two),
                              g.constant(load::testing::random_tensor({5, 3}, rng, -1, 1)),
                              g.constant(load::testing::random_tensor({5, 3}, rng, -1, 1)), AttentionPolicy::Full);
    EXPECT_EQ(a.weights.value()[0], 0.5);
    for (int j = 0; j < 5; ++j) EXPECT_DOUBLE_EQ(a.output.value()[j], row[j]);
}

TEST(Attention, WeightsAreDistributions) {
    core::Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + rng.below(20);
        Graph g;
        const Attended a = attend(g.constant(load::testing::random_tensor({1, 6}, rng, -4, 4)),
                                  g.constant(load::testing::random_tensor({n, 6}, rng, -4, 4)),
                                  g.constant(load::testing::random_tensor({6, 4}, rng, -2, 2)),
                                  g.constant(load::testing::random_tensor({6, 4}, rng, -2, 2)), AttentionPolicy::Full);
        double sum = 0;
        for (auto w : a.weights.value().data()) {
            EXPECT_GE(w, 0.0);
            sum += w;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Attention, AverageAndNoneAblations) {
    core::Rng rng(6);
    Graph g;
    const Tensor z = load::testing::random_tensor({3, 4}, rng, -1, 1);
    Var q = g.constant(load::testing::random_tensor({1, 4}, rng, -1, 1));
    Var wq = g.constant(load::testing::random_tensor({4, 2}, rng, -1, 1));
    Var wk = g.constant(load::testing::random_tensor({4, 2}, rng, -1, 1));
    const Attended avg = attend(q, g.constant(z), wq, wk, AttentionPolicy::Average);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(avg.output.value()[j], (z.at(0, j) + z.at(1, j) + z.at(2, j)) / 3.0, 1e-15);
    }
    const Attended none = attend(q, g.constant(z), wq, wk, AttentionPolicy::None);
    for (auto v : none.output.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, ShapesDuplicatesAndEquivariance) {
    const AgentConfig cfg = small_config();
    ParamGroup p;
    init_agent_params(p, cfg, 11);
    core::Rng rng(12);
    Graph g;
    const auto one = random_obs(1, rng);
    EXPECT_EQ(encode_objects(g, p, patches_var(g, one)).shape(), (Shape{1, cfg.d_o}));

    auto dup = random_obs(1, rng);
    dup.patches.insert(dup.patches.end(), dup.patches.begin(), dup.patches.end());
    dup.patch_ids.push_back(1);
    const Tensor zd = encode_objects(g, p, patches_var(g, dup)).value();
    for (int j = 0; j < cfg.d_o; ++j) EXPECT_EQ(zd.at(0, j), zd.at(1, j));

    const auto obs = random_obs(5, rng);
    const std::vector<int> perm{3, 0, 4, 1, 2};
    const Tensor z = encode_objects(g, p, patches_var(g, obs)).value();
    const Tensor zp = encode_objects(g, p, patches_var(g, permuted(obs, perm))).value();
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < cfg.d_o; ++j) EXPECT_NEAR(zp.at(i, j), z.at(perm[i], j), 1e-12);
    }

    // An empty patch list cannot even be formed as a tensor.
    Graph g2;
    EXPECT_ANY_THROW(encode_objects(g2, p, g2.constant(Tensor(Shape{0, kitchen::kPatchSize}))));
}

TEST(QHeads, ShapesAndDegenerateFinalLayer) {
    const AgentConfig cfg = small_config();
    ParamGroup p;
    init_agent_params(p, cfg, 21);
    core::Rng rng(22);
    const auto obs = random_obs(3, rng);
    {
        Graph g;
        Var z = encode_objects(g, p, patches_var(g, obs));
        Var ctx = context_var(g, p, obs);
        EXPECT_EQ(q_interactions(g, p, z, ctx, cfg.attention_policy).shape(), (Shape{3, kNumQ}));
        EXPECT_EQ(q_navigation(g, p, z, ctx, cfg.attention_policy).value().size(), std::size_t(kNumQ));
    }
    ParamGroup zeroed = p;
    zeroed.get_mut(names::kInteractionHead + ".w2").fill(0);
    Tensor& bias = zeroed.get_mut(names::kInteractionHead + ".b2");
    for (int a = 0; a < kNumQ; ++a) bias[a] = 0.1 * a - 0.3;
    Graph g;
    const Tensor q = q_interactions(g, zeroed, encode_objects(g, zeroed, patches_var(g, obs)),
                                    context_var(g, zeroed, obs), cfg.attention_policy)
                         .value();
    for (int i = 0; i < 3; ++i) {
        for (int a = 0; a < kNumQ; ++a) EXPECT_EQ(q.at(i, a), bias[a]);
    }
}

TEST(QHeads, DuplicateObjectsGiveIdenticalRows) {
    const AgentConfig cfg = small_config();
    ParamGroup p;
    init_agent_params(p, cfg, 31);
    core::Rng rng(32);
    auto obs = random_obs(1, rng);
    obs.patches.insert(obs.patches.end(), obs.patches.begin(), obs.patches.end());
    obs.patch_ids.push_back(1);
    Graph g;
    const Tensor q = q_interactions(g, p, encode_objects(g, p, patches_var(g, obs)), context_var(g, p, obs),
                                    cfg.attention_policy)
                         .value();
    for (int a = 0; a < kNumQ; ++a) EXPECT_EQ(q.at(0, a), q.at(1, a));
}

TEST(QHeads, NavigationIsPureAndNoneAblationIgnoresObjects) {
    const AgentConfig cfg = small_config(AttentionPolicy::None);
    ParamGroup p;
    init_agent_params(p, cfg, 41);
    core::Rng rng(42);
    const auto obs = random_obs(4, rng);
    auto perturbed = obs;
    for (auto& v : perturbed.patches) v += rng.uniform(-0.5, 0.5);
    Graph g;
    const Tensor a = q_navigation(g, p, encode_objects(g, p, patches_var(g, obs)), context_var(g, p, obs),
                                  AttentionPolicy::None)
                         .value();
    const Tensor b = q_navigation(g, p, encode_objects(g, p, patches_var(g, perturbed)), context_var(g, p, obs),
                                  AttentionPolicy::None)
                         .value();
    EXPECT_TRUE(core::bit_equal(a, b));
    const Tensor full1 = q_navigation(g, p, encode_objects(g, p, patches_var(g, obs)), context_var(g, p, obs),
                                      AttentionPolicy::Full)
                             .value();
    const Tensor full2 = q_navigation(g, p, encode_objects(g, p, patches_var(g, obs)), context_var(g, p, obs),
                                      AttentionPolicy::Full)
                             .value();
    EXPECT_TRUE(core::bit_equal(full1, full2));
    const Tensor full3 = q_navigation(g, p, encode_objects(g, p, patches_var(g, perturbed)), context_var(g, p, obs),
                                      AttentionPolicy::Full)
                             .value();
    EXPECT_FALSE(core::bit_equal(full1, full3));
}

TEST(QHeads, NoneAblationZeroesEncoderGradientOfNavigation) {
    const AgentConfig cfg = small_config(AttentionPolicy::None);
    ParamGroup p;
    init_agent_params(p, cfg, 51);
    core::Rng rng(52);
    std::vector<kitchen::ObservationBundle> obs{random_obs(3, rng), random_obs(0, rng), random_obs(6, rng)};
    std::vector<AgentInput> in;
    for (const auto& o : obs) in.push_back({&o, nullptr});
    Graph g;
    const AgentForward f = agent_forward(g, p, cfg, in);
    g.backward(core::sum(f.q_nav));
    const auto grads = g.param_grads(p);
    for (const auto& [name, grad] : grads) {
        const bool object_side = name.rfind(names::kObjEncoder, 0) == 0 || name == names::kKey ||
                                 name == names::kQueryObject || name == names::kQueryContext || name == names::kNull;
        if (!object_side) continue;
        for (auto v : grad.data()) ASSERT_EQ(v, 0.0) << name;
    }
    // The navigation head itself does receive gradient.
    double mass = 0;
    for (auto v : grads.at(names::kNavigationHead + ".w0").data()) mass += std::abs(v);
    EXPECT_GT(mass, 0.0);
}

TEST(QHeads, AverageAblationZeroesQueryAndKeyGradients) {
    const AgentConfig cfg = small_config(AttentionPolicy::Average);
    ParamGroup p;
    init_agent_params(p, cfg, 53);
    core::Rng rng(54);
    std::vector<kitchen::ObservationBundle> obs{random_obs(3, rng), random_obs(5, rng)};
    std::vector<AgentInput> in;
    for (const auto& o : obs) in.push_back({&o, nullptr});
    Graph g;
    const AgentForward f = agent_forward(g, p, cfg, in);
    g.backward(core::add(core::sum(f.q_nav), core::sum(f.q_int)));
    const auto grads = g.param_grads(p);
    for (const auto& name : {names::kKey, names::kQueryObject, names::kQueryContext}) {
        for (auto v : grads.at(name).data()) ASSERT_EQ(v, 0.0) << name;
    }
}

TEST(QHeads, PermutationSuite) {
    core::Rng rng(61);
    for (int trial = 0; trial < 1000; ++trial) {
        AgentConfig cfg = small_config(trial % 3 == 0 ? AttentionPolicy::Average : AttentionPolicy::Full);
        cfg.hidden = 6;
        ParamGroup p;
        init_agent_params(p, cfg, 1000 + trial);
        const int n = 1 + rng.below(8);
        const auto obs = random_obs(n, rng);
        std::vector<int> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        const auto shuffled = permuted(obs, perm);
        const std::vector<AgentInput> a{{&obs, nullptr}};
        const std::vector<AgentInput> b{{&shuffled, nullptr}};
        const QValues qa = evaluate_q(p, cfg, a)[0];
        const QValues qb = evaluate_q(p, cfg, b)[0];
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < kNumQ; ++k) {
                ASSERT_NEAR(qb.qi[i * kNumQ + k], qa.qi[perm[i] * kNumQ + k], 1e-10) << "trial " << trial;
            }
        }
        for (int k = 0; k < kNumQ; ++k) ASSERT_NEAR(qb.qn[k], qa.qn[k], 1e-10) << "trial " << trial;
    }
}

TEST(Forward, BatchedMatchesSingleObservationHeads) {
    const AgentConfig cfg = small_config();
    ParamGroup p;
    init_agent_params(p, cfg, 71);
    core::Rng rng(72);
    std::vector<kitchen::ObservationBundle> obs{random_obs(2, rng), random_obs(5, rng), random_obs(1, rng)};
    std::vector<AgentInput> in;
    for (const auto& o : obs) in.push_back({&o, nullptr});
    Graph g;
    const AgentForward f = agent_forward(g, p, cfg, in);
    ASSERT_EQ(f.q_int.shape(), (Shape{8, kNumQ}));
    ASSERT_EQ(f.q_nav.shape(), (Shape{3, kNumQ}));
    for (int b = 0; b < 3; ++b) {
        Graph s;
        Var z = encode_objects(s, p, patches_var(s, obs[b]));
        Var ctx = context_var(s, p, obs[b]);
        const Tensor qi = q_interactions(s, p, z, ctx, cfg.attention_policy).value();
        const Tensor qn = q_navigation(s, p, z, ctx, cfg.attention_policy).value();
        EXPECT_LT(load::testing::max_abs_diff(rows_of(f.q_int.value(), f.segments.begin(b), f.segments.end(b)), qi), 1e-12);
        EXPECT_LT(load::testing::max_abs_diff(rows_of(f.q_nav.value(), b, b + 1), qn), 1e-12);
    }
}

TEST(Forward, EmptyObservationUsesNullRow) {
    const AgentConfig cfg = small_config();
    ParamGroup p;
    init_agent_params(p, cfg, 81);
    core::Rng rng(82);
    std::vector<kitchen::ObservationBundle> obs{random_obs(0, rng), random_obs(2, rng), random_obs(0, rng)};
    std::vector<AgentInput> in;
    for (const auto& o : obs) in.push_back({&o, nullptr});
    Graph g;
    const AgentForward f = agent_forward(g, p, cfg, in);
    EXPECT_EQ(f.visible, (std::vector<int>{0, 2, 0}));
    EXPECT_EQ(f.segments.offsets, (std::vector<int>{0, 1, 3, 4}));
    const Tensor& null = p.get(names::kNull);
    for (int j = 0; j < cfg.d_o; ++j) {
        EXPECT_EQ(f.objects.value().at(0, j), null[j]);
        EXPECT_EQ(f.objects.value().at(3, j), null[j]);
    }
    EXPECT_TRUE(q_values_of(f, 0).qi.empty());
    EXPECT_EQ(q_values_of(f, 1).qi.size(), std::size_t(2 * kNumQ));

    // All-empty batch still works.
    std::vector<AgentInput> empties{{&obs[0], nullptr}};
    EXPECT_EQ(evaluate_q(p, cfg, empties)[0].qn.size(), std::size_t(kNumQ));
}

TEST(Forward, OracleModeAcceptsEmptyObservationWithoutFeatures) {
    AgentConfig cfg = small_config();
    cfg.oracle_dim = 5;
    ParamGroup p;
    init_agent_params(p, cfg, 83);
    core::Rng rng(84);
    const auto empty = random_obs(0, rng);
    const auto two = random_obs(2, rng);
    const std::vector<Real> feats(10, 0.5);
    const std::vector<AgentInput> in{{&empty, nullptr}, {&two, &feats}};
    const auto q = evaluate_q(p, cfg, in);
    EXPECT_TRUE(q[0].qi.empty());
    EXPECT_EQ(q[1].num_objects(), 2);
    const std::vector<AgentInput> missing{{&two, nullptr}};
    EXPECT_THROW(evaluate_q(p, cfg, missing), std::invalid_argument);
}

TEST(Forward, RealObservationFromKitchen) {
    AgentConfig cfg;
    ParamGroup p;
    init_agent_params(p, cfg, 91);
    const auto [world, obs] = kitchen::reset("toast_bread", 5);
    const std::vector<AgentInput> in{{&obs, nullptr}};
    const QValues q = evaluate_q(p, cfg, in)[0];
    EXPECT_EQ(q.num_objects(), obs.num_patches());
    for (auto v : q.qi) EXPECT_TRUE(std::isfinite(v));
}

TEST(SelectAction, UniformWhenEpsilonIsOne) {
    core::Rng rng(101);
    const int n = 3, total = kNumQ + kNumQ * n;
    std::vector<Real> qi(static_cast<std::size_t>(kNumQ * n)), qn(kNumQ);
    for (auto& v : qi) v = rng.uniform();
    for (auto& v : qn) v = rng.uniform();
    std::vector<int> counts(static_cast<std::size_t>(total));
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) ++counts[select_action(qi, qn, 1.0, rng).flat()];
    const double p = 1.0 / total;
    const double sigma = std::sqrt(draws * p * (1 - p));
    for (int c : counts) EXPECT_LT(std::abs(c - draws * p), 3 * sigma + 1);
}

TEST(SelectAction, GreedyArgmaxTiesAndScaling) {
    core::Rng rng(102);
    std::vector<Real> qi(24, 0.0), qn(8, 0.0);
    EXPECT_EQ(select_action(qi, qn, 0.0, rng), kitchen::ActionSpec::navigate(kitchen::NavAction::MoveAhead));
    qi[2 * kNumQ + static_cast<int>(kitchen::Interaction::TurnOn)] = 5.0;
    for (int t = 0; t < 100; ++t) {
        EXPECT_EQ(select_action(qi, qn, 0.0, rng), kitchen::ActionSpec::interaction(kitchen::Interaction::TurnOn, 2));
    }
    for (int trial = 0; trial < 200; ++trial) {
        for (auto& v : qi) v = std::round(rng.uniform(-3, 3));
        for (auto& v : qn) v = std::round(rng.uniform(-3, 3));
        const int base = greedy_flat(qi, qn);
        const double c = rng.uniform(0.1, 10.0);
        std::vector<Real> si = qi, sn = qn;
        for (auto& v : si) v *= c;
        for (auto& v : sn) v *= c;
        EXPECT_EQ(greedy_flat(si, sn), base);
    }
}

TEST(SelectAction, RejectsBadInputs) {
    core::Rng rng(103);
    std::vector<Real> qi(7), qn(8);
    EXPECT_THROW(select_action(qi, qn, 0.0, rng), std::invalid_argument);
    std::vector<Real> ok(8);
    EXPECT_THROW(select_action(ok, qn, 1.5, rng), std::invalid_argument);
}

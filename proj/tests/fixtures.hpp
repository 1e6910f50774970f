#pragma once

#include <cmath>
#include <vector>

#include "load/agent/net.hpp"
#include "load/core/gradcheck.hpp"
#include "load/core/rng.hpp"
#include "load/kitchen/render.hpp"

namespace load::testing {

// Observation with n random patches, random ego view and pose code.
inline kitchen::ObservationBundle random_obs(int n, core::Rng& rng) {
    kitchen::ObservationBundle obs;
    obs.ego = core::Tensor(core::Shape{kitchen::kEgoSide, kitchen::kEgoSide});
    for (auto& v : obs.ego.data()) v = static_cast<core::Real>(rng.uniform());
    obs.patches.resize(static_cast<std::size_t>(n) * kitchen::kPatchSize);
    for (auto& v : obs.patches) v = static_cast<core::Real>(rng.uniform());
    for (int i = 0; i < n; ++i) obs.patch_ids.push_back(i);
    for (auto& v : obs.loc) v = static_cast<core::Real>(rng.uniform(-1, 1));
    return obs;
}

// Like random_obs, but every patch gets its own offset and contrast, so encodings of
// different objects are far apart.
inline kitchen::ObservationBundle diverse_obs(int n, core::Rng& rng) {
    kitchen::ObservationBundle obs = random_obs(n, rng);
    for (int i = 0; i < n; ++i) {
        const double offset = rng.uniform(-2, 2), contrast = rng.uniform(0.2, 2);
        for (int k = 0; k < kitchen::kPatchSize; ++k) {
            auto& v = obs.patches[static_cast<std::size_t>(i) * kitchen::kPatchSize + k];
            v = static_cast<core::Real>(offset + contrast * (v - 0.5));
        }
    }
    return obs;
}

inline agent::AgentConfig tiny_agent_config(agent::AttentionPolicy policy = agent::AttentionPolicy::Full) {
    agent::AgentConfig cfg;
    cfg.d_o = 8;
    cfg.d_ego = 6;
    cfg.d_loc = 4;
    cfg.d_k = 4;
    cfg.hidden = 12;
    cfg.loc_hidden = 5;
    cfg.attention_policy = policy;
    return cfg;
}

inline std::vector<agent::AgentInput> inputs_of(const std::vector<kitchen::ObservationBundle>& obs) {
    std::vector<agent::AgentInput> in;
    for (const auto& o : obs) in.push_back({&o, nullptr});
    return in;
}

}  // namespace load::testing

namespace load::testing {

// Options shared by the finite-difference tests: adaptive central differences from step 1e-3,
// a seeded sample of 12 coordinates per parameter. Checks run at the production initialisation.
inline core::FiniteDiffOptions gradcheck_options(std::uint64_t seed) {
    core::FiniteDiffOptions opts;
    opts.step = 1e-3;
    opts.adaptive = true;
    opts.max_coords_per_param = 12;
    opts.seed = seed;
    return opts;
}

}  // namespace load::testing

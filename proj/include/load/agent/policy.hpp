#pragma once

#include <span>

#include "load/agent/net.hpp"
#include "load/kitchen/world.hpp"

namespace load::agent {

// Flat action order: the 8 navigation values, then interaction values row-major by object.
// With probability epsilon a uniform draw over all 8 + 8n actions, otherwise the argmax
// with ties going to the lowest flat index.
kitchen::ActionSpec select_action(std::span<const Real> qi, std::span<const Real> qn, double epsilon,
                                  core::Rng& rng);
kitchen::ActionSpec select_action(const QValues& q, double epsilon, core::Rng& rng);

// Argmax flat index over [qn, qi] with the lowest-index tie rule.
int greedy_flat(std::span<const Real> qi, std::span<const Real> qn);

}  // namespace load::agent

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "load/core/graph.hpp"

namespace load::core {

// Builds a scalar loss on the given graph, reading parameters from the group.
using LossBuilder = std::function<Var(Graph&, const ParamGroup&)>;

struct FiniteDiffOptions {
    Real step = Real(1e-5);
    // 0 checks every coordinate; otherwise a seeded sample of at most this many per parameter.
    int max_coords_per_param = 0;
    std::uint64_t seed = 0;
    // Starts at `step` and shrinks it by 4x until two successive central differences agree
    // to `consistency` (relative, floored like the report), so no estimate straddles a
    // rectifier kink. The analytic gradient plays no part in choosing the step.
    bool adaptive = false;
    Real consistency = Real(2e-5);
    Real min_step = Real(1e-7);
};

struct FiniteDiffReport {
    Real max_rel_error = 0;
    std::string worst_param;
    std::size_t worst_index = 0;
    Real worst_analytic = 0;
    Real worst_numeric = 0;
    Real worst_step = 0;
    std::size_t coords_checked = 0;
};

// Central-difference check of the analytic gradient. Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8). Throws std::runtime_error if the loss is not deterministic.
FiniteDiffReport finite_diff_check(const LossBuilder& loss_fn, const ParamGroup& params,
                                   const FiniteDiffOptions& opts = {});

}  // namespace load::core

#pragma once

#include "load/core/params.hpp"

namespace load::core {

struct AdamConfig {
    Real beta1 = Real(0.9);
    Real beta2 = Real(0.999);
    Real epsilon = Real(1e-8);
};

// Scales every gradient by max_norm / g when the global L2 norm g exceeds max_norm.
// Returns the applied scale (1 when untouched).
Real clip_global_norm(GradMap& grads, Real max_norm);

Real global_norm(const GradMap& grads);

// One bias-corrected Adam update of every parameter in the group. Throws if a
// parameter has no gradient entry.
void adam_step(ParamGroup& params, const GradMap& grads, Real lr, const AdamConfig& cfg = {});

}  // namespace load::core

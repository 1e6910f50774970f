#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "load/core/tensor.hpp"

namespace load::core {

using GradMap = std::map<std::string, Tensor>;

// First/second moment accumulators for one parameter.
struct MomentState {
    Tensor first;
    Tensor second;
};

// Named learnable tensors plus their optimizer state. Copying a ParamGroup
// is a deep snapshot; the target network is just such a copy.
class ParamGroup {
public:
    void add(const std::string& name, Tensor value);
    bool contains(const std::string& name) const { return values_.contains(name); }

    const Tensor& get(const std::string& name) const;
    Tensor& get_mut(const std::string& name);
    const MomentState& moments(const std::string& name) const;
    MomentState& moments_mut(const std::string& name);

    const std::map<std::string, Tensor>& values() const { return values_; }
    std::vector<std::string> names() const;
    std::size_t num_scalars() const;

    std::int64_t step() const { return step_; }
    void set_step(std::int64_t s) { step_ = s; }

    ParamGroup snapshot() const { return *this; }
    GradMap zero_grads() const;

    // Polyak update: this <- (1 - eta) * this + eta * source.
    void blend_from(const ParamGroup& source, Real eta);

    friend bool bit_identical(const ParamGroup& a, const ParamGroup& b);

private:
    std::map<std::string, Tensor> values_;
    std::map<std::string, MomentState> moments_;
    std::int64_t step_ = 0;
};

bool bit_identical(const ParamGroup& a, const ParamGroup& b);

}  // namespace load::core

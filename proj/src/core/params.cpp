#include "load/core/params.hpp"

#include <stdexcept>

namespace load::core {

void ParamGroup::add(const std::string& name, Tensor value) {
    if (values_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
    moments_[name] = MomentState{Tensor::zeros_like(value), Tensor::zeros_like(value)};
    values_.emplace(name, std::move(value));
}

const Tensor& ParamGroup::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamGroup::get_mut(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

const MomentState& ParamGroup::moments(const std::string& name) const {
    auto it = moments_.find(name);
    if (it == moments_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

MomentState& ParamGroup::moments_mut(const std::string& name) {
    auto it = moments_.find(name);
    if (it == moments_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

std::vector<std::string> ParamGroup::names() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [name, _] : values_) out.push_back(name);
    return out;
}

std::size_t ParamGroup::num_scalars() const {
    std::size_t n = 0;
    for (const auto& [_, t] : values_) n += t.size();
    return n;
}

GradMap ParamGroup::zero_grads() const {
    GradMap out;
    for (const auto& [name, t] : values_) out.emplace(name, Tensor::zeros_like(t));
    return out;
}

void ParamGroup::blend_from(const ParamGroup& source, Real eta) {
    for (auto& [name, t] : values_) {
        const Tensor& src = source.get(name);
        if (src.shape() != t.shape()) {
            throw std::invalid_argument("soft update shape mismatch for '" + name + "': " +
                                        shape_str(t.shape()) + " vs " + shape_str(src.shape()));
        }
        if (eta == Real(1)) {
            t = src;
            continue;
        }
        // t + eta * (src - t) leaves t bit-identical when src == t.
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += eta * (src[i] - t[i]);
    }
}

bool bit_identical(const ParamGroup& a, const ParamGroup& b) {
    if (a.values_.size() != b.values_.size()) return false;
    for (const auto& [name, t] : a.values_) {
        auto it = b.values_.find(name);
        if (it == b.values_.end() || !bit_equal(t, it->second)) return false;
        const auto& ma = a.moments_.at(name);
        const auto& mb = b.moments_.at(name);
        if (!bit_equal(ma.first, mb.first) || !bit_equal(ma.second, mb.second)) return false;
    }
    return a.step_ == b.step_;
}

}  // namespace load::core

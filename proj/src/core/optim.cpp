#include "load/core/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace load::core {

Real global_norm(const GradMap& grads) {
    double ss = 0;
    for (const auto& [_, g] : grads) {
        for (Real v : g.data()) ss += static_cast<double>(v) * static_cast<double>(v);
    }
    return static_cast<Real>(std::sqrt(ss));
}

Real clip_global_norm(GradMap& grads, Real max_norm) {
    if (!(max_norm > 0)) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
    const Real norm = global_norm(grads);
    if (norm <= max_norm) return Real(1);
    const Real s = max_norm / norm;
    for (auto& [_, g] : grads) {
        for (Real& v : g.data()) v *= s;
    }
    return s;
}

void adam_step(ParamGroup& params, const GradMap& grads, Real lr, const AdamConfig& cfg) {
    for (const auto& name : params.names()) {
        auto it = grads.find(name);
        if (it == grads.end()) throw std::invalid_argument("adam_step: missing gradient for '" + name + "'");
        if (it->second.shape() != params.get(name).shape()) {
            throw std::invalid_argument("adam_step: gradient shape " + shape_str(it->second.shape()) +
                                        " does not match parameter '" + name + "' " + shape_str(params.get(name).shape()));
        }
    }
    const std::int64_t t = params.step() + 1;
    const Real c1 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(cfg.beta1), static_cast<double>(t)));
    const Real c2 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(cfg.beta2), static_cast<double>(t)));
    for (const auto& name : params.names()) {
        const Tensor& g = grads.at(name);
        Tensor& p = params.get_mut(name);
        MomentState& ms = params.moments_mut(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            ms.first[i] = cfg.beta1 * ms.first[i] + (Real(1) - cfg.beta1) * g[i];
            ms.second[i] = cfg.beta2 * ms.second[i] + (Real(1) - cfg.beta2) * g[i] * g[i];
            const Real mhat = ms.first[i] / c1;
            const Real vhat = ms.second[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
    params.set_step(t);
}

}  // namespace load::core

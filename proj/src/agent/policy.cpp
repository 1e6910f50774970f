#include "load/agent/policy.hpp"

#include <stdexcept>

namespace load::agent {

int greedy_flat(std::span<const Real> qi, std::span<const Real> qn) {
    if (qn.size() != static_cast<std::size_t>(kNumQ) || qi.size() % kNumQ != 0) {
        throw std::invalid_argument("select_action: expected 8 navigation values and 8 per object");
    }
    int best = 0;
    Real best_value = qn[0];
    const auto consider = [&](int flat, Real v) {
        if (v > best_value) {
            best = flat;
            best_value = v;
        }
    };
    for (int a = 1; a < kNumQ; ++a) consider(a, qn[a]);
    for (std::size_t j = 0; j < qi.size(); ++j) consider(kNumQ + static_cast<int>(j), qi[j]);
    return best;
}

kitchen::ActionSpec select_action(std::span<const Real> qi, std::span<const Real> qn, double epsilon,
                                  core::Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("select_action: epsilon outside [0,1]");
    const int greedy = greedy_flat(qi, qn);
    const int total = kNumQ + static_cast<int>(qi.size());
    if (rng.bernoulli(epsilon)) return kitchen::ActionSpec::from_flat(rng.below(total));
    return kitchen::ActionSpec::from_flat(greedy);
}

kitchen::ActionSpec select_action(const QValues& q, double epsilon, core::Rng& rng) {
    return select_action(q.qi, q.qn, epsilon, rng);
}

}  // namespace load::agent

#include "load/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace load::core {

namespace {

Real eval_loss(const LossBuilder& loss_fn, const ParamGroup& params) {
    Graph g(false);
    return loss_fn(g, params).value().item();
}

struct Estimate {
    Real value;
    Real step;
};

Estimate central_difference(const LossBuilder& loss_fn, ParamGroup& probe, Real& coord, Real h) {
    const Real orig = coord;
    coord = orig + h;
    const Real up = eval_loss(loss_fn, probe);
    coord = orig - h;
    const Real down = eval_loss(loss_fn, probe);
    coord = orig;
    return {(up - down) / (2 * h), h};
}

Estimate adaptive_difference(const LossBuilder& loss_fn, ParamGroup& probe, Real& coord, const FiniteDiffOptions& o) {
    Estimate prev = central_difference(loss_fn, probe, coord, o.step);
    for (Real h = o.step / 4; h >= o.min_step; h /= 4) {
        const Estimate next = central_difference(loss_fn, probe, coord, h);
        const Real scale = std::max({std::abs(next.value), std::abs(prev.value), Real(1e-8)});
        if (std::abs(next.value - prev.value) <= o.consistency * scale) return next;
        prev = next;
    }
    return prev;
}

}  // namespace

FiniteDiffReport finite_diff_check(const LossBuilder& loss_fn, const ParamGroup& params, const FiniteDiffOptions& opts) {
    if (!(opts.step > 0)) throw std::invalid_argument("finite_diff_check: step must be positive");

    const Real first = eval_loss(loss_fn, params);
    const Real second = eval_loss(loss_fn, params);
    if (std::memcmp(&first, &second, sizeof(Real)) != 0) {
        throw std::runtime_error("finite_diff_check: loss function is not deterministic");
    }

    Graph g;
    Var loss = loss_fn(g, params);
    g.backward(loss);
    const GradMap analytic = g.param_grads(params);

    FiniteDiffReport report;
    std::mt19937_64 rng(opts.seed);
    ParamGroup probe = params.snapshot();
    for (const auto& name : params.names()) {
        Tensor& p = probe.get_mut(name);
        std::vector<std::size_t> coords(p.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opts.max_coords_per_param > 0 && coords.size() > static_cast<std::size_t>(opts.max_coords_per_param)) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(static_cast<std::size_t>(opts.max_coords_per_param));
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const Estimate est = opts.adaptive ? adaptive_difference(loss_fn, probe, p[i], opts)
                                               : central_difference(loss_fn, probe, p[i], opts.step);
            const Real numeric = est.value;
            const Real a = analytic.at(name)[i];
            const Real denom = std::max({std::abs(a), std::abs(numeric), Real(1e-8)});
            Real rel = std::abs(a - numeric) / denom;
            if (std::isnan(rel)) rel = std::numeric_limits<Real>::infinity();
            ++report.coords_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
                report.worst_step = est.step;
            }
        }
    }
    return report;
}

}  // namespace load::core

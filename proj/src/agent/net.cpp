#include "load/agent/net.hpp"

#include <cmath>
#include <stdexcept>

namespace load::agent {

using core::Graph;
using core::ParamGroup;
using core::Segments;
using core::Shape;
using core::Tensor;

std::string to_string(AttentionPolicy p) {
    switch (p) {
        case AttentionPolicy::Full:
            return "full";
        case AttentionPolicy::Average:
            return "average";
        case AttentionPolicy::None:
            return "none";
    }
    return "full";
}

AttentionPolicy parse_attention_policy(const std::string& s) {
    if (s == "full") return AttentionPolicy::Full;
    if (s == "average") return AttentionPolicy::Average;
    if (s == "none") return AttentionPolicy::None;
    throw std::invalid_argument("attention_policy must be one of full, average, none (got '" + s + "')");
}

void add_dense_stack(ParamGroup& params, const std::string& prefix, const std::vector<int>& sizes, core::Rng& rng) {
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const int in = sizes[i], out = sizes[i + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w(Shape{in, out});
        for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
        params.add(prefix + ".w" + std::to_string(i), std::move(w));
        params.add(prefix + ".b" + std::to_string(i), Tensor(Shape{out}));
    }
}

int dense_stack_depth(const ParamGroup& params, const std::string& prefix) {
    int n = 0;
    while (params.contains(prefix + ".w" + std::to_string(n))) ++n;
    return n;
}

Var dense_stack(Graph& g, const ParamGroup& params, const std::string& prefix, Var x, bool linear_output) {
    const int depth = dense_stack_depth(params, prefix);
    if (depth == 0) throw std::invalid_argument("no dense stack named " + prefix);
    for (int i = 0; i < depth; ++i) {
        const std::string k = std::to_string(i);
        x = core::add_row(core::matmul(x, g.param(params, prefix + ".w" + k)), g.param(params, prefix + ".b" + k));
        if (!(linear_output && i + 1 == depth)) x = core::leaky_relu(x);
    }
    return x;
}

namespace {

Tensor random_matrix(int rows, int cols, core::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    Tensor w(Shape{rows, cols});
    for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
    return w;
}

Real attention_scale(int d_k) { return Real(1) / std::sqrt(static_cast<Real>(d_k)); }

// Packed uniform weights for the "average" ablation.
Tensor uniform_weights(const Segments& qs, const Segments& ks) {
    std::size_t total = 0;
    for (int s = 0; s < qs.count(); ++s) total += static_cast<std::size_t>(qs.length(s)) * ks.length(s);
    Tensor w(Shape{static_cast<int>(total)});
    std::size_t at = 0;
    for (int s = 0; s < qs.count(); ++s) {
        const std::size_t n = static_cast<std::size_t>(qs.length(s)) * ks.length(s);
        for (std::size_t i = 0; i < n; ++i) w[at + i] = Real(1) / static_cast<Real>(ks.length(s));
        at += n;
    }
    return w;
}

struct Pooled {
    Var output;
    Var weights;
};

Pooled pool(Var queries, Var keys, Var values, const Segments& qs, const Segments& ks, AttentionPolicy policy) {
    Graph& g = *values.graph;
    switch (policy) {
        case AttentionPolicy::Full: {
            Var w = core::attention_weights(queries, keys, qs, ks, attention_scale(keys.value().cols()));
            return {core::attention_pool(w, values, qs, ks), w};
        }
        case AttentionPolicy::Average: {
            Var w = g.constant(uniform_weights(qs, ks));
            return {core::attention_pool(w, values, qs, ks), w};
        }
        case AttentionPolicy::None:
            break;
    }
    Tensor zeros = uniform_weights(qs, ks);
    zeros.fill(0);
    return {g.constant(Tensor(Shape{qs.total(), values.value().cols()})), g.constant(std::move(zeros))};
}

Segments single(int n) {
    Segments s;
    s.append(n);
    return s;
}

}  // namespace

void init_agent_params(ParamGroup& params, const AgentConfig& cfg, std::uint64_t seed) {
    core::Rng rng(seed);
    const int dk = cfg.d_context();
    add_dense_stack(params, names::kObjEncoder, {kitchen::kPatchSize, cfg.hidden, cfg.d_o}, rng);
    add_dense_stack(params, names::kEgoEncoder, {kitchen::kEgoSide * kitchen::kEgoSide, cfg.hidden, cfg.d_ego}, rng);
    add_dense_stack(params, names::kLocEncoder, {kitchen::kLocDim, cfg.loc_hidden, cfg.d_loc}, rng);
    if (cfg.oracle_dim > 0) add_dense_stack(params, names::kOracleEncoder, {cfg.oracle_dim, cfg.d_o}, rng);
    params.add(names::kQueryObject, random_matrix(cfg.d_o, cfg.d_k, rng));
    params.add(names::kKey, random_matrix(cfg.d_o, cfg.d_k, rng));
    params.add(names::kQueryContext, random_matrix(dk, cfg.d_k, rng));
    Tensor null(Shape{1, cfg.d_o});
    for (auto& v : null.data()) v = static_cast<Real>(0.1 * rng.normal());
    params.add(names::kNull, std::move(null));
    add_dense_stack(params, names::kInteractionHead, {2 * cfg.d_o + dk, cfg.hidden, cfg.hidden, kNumQ}, rng);
    add_dense_stack(params, names::kNavigationHead, {dk + cfg.d_o, cfg.hidden, cfg.hidden, kNumQ}, rng);
}

Var encode_objects(Graph& g, const ParamGroup& params, Var patches) {
    if (patches.value().rows() == 0 || patches.value().size() == 0) {
        throw std::invalid_argument("encode_objects: empty patch list");
    }
    return dense_stack(g, params, names::kObjEncoder, patches, false);
}

Attended attend(Var query, Var objects, Var query_map, Var key_map, AttentionPolicy policy) {
    const int n = objects.value().rows();
    const Pooled p = pool(core::matmul(query, query_map), core::matmul(objects, key_map), objects, single(1),
                          single(n), policy);
    return {p.output, p.weights};
}

Attended attend(Graph& g, const ParamGroup& params, Var query, Var objects, AttendMode mode, AttentionPolicy policy) {
    const std::string& qname = mode == AttendMode::Object ? names::kQueryObject : names::kQueryContext;
    return attend(query, objects, g.param(params, qname), g.param(params, names::kKey), policy);
}

Var q_interactions(Graph& g, const ParamGroup& params, Var objects, Var context, AttentionPolicy policy) {
    const int n = objects.value().rows();
    const Segments segs = single(n);
    Var keys = core::matmul(objects, g.param(params, names::kKey));
    Var queries = core::matmul(objects, g.param(params, names::kQueryObject));
    Var attn = pool(queries, keys, objects, segs, segs, policy).output;
    Var ctx = core::gather_rows(context, std::vector<int>(static_cast<std::size_t>(n), 0));
    return dense_stack(g, params, names::kInteractionHead, core::concat_cols({objects, attn, ctx}), true);
}

Var q_navigation(Graph& g, const ParamGroup& params, Var objects, Var context, AttentionPolicy policy) {
    Var attn = attend(g, params, context, objects, AttendMode::Context, policy).output;
    return dense_stack(g, params, names::kNavigationHead, core::concat_cols({context, attn}), true);
}

AgentForward agent_forward(Graph& g, const ParamGroup& params, const AgentConfig& cfg,
                           std::span<const AgentInput> inputs) {
    const int B = static_cast<int>(inputs.size());
    if (B == 0) throw std::invalid_argument("agent_forward: empty batch");
    const bool oracle = cfg.oracle_dim > 0;
    const int in_dim = oracle ? cfg.oracle_dim : kitchen::kPatchSize;

    AgentForward f;
    f.visible.resize(static_cast<std::size_t>(B));
    int real = 0;
    for (int b = 0; b < B; ++b) {
        const auto& obs = *inputs[b].obs;
        f.visible[b] = obs.num_patches();
        real += f.visible[b];
        f.segments.append(std::max(1, f.visible[b]));
        if (oracle) {
            const auto* feats = inputs[b].features;
            // An observation without objects needs no feature rows.
            const bool ok = feats == nullptr ? f.visible[b] == 0
                                             : feats->size() == static_cast<std::size_t>(f.visible[b]) * in_dim;
            if (!ok) {
                throw std::invalid_argument("agent_forward: oracle features missing or of the wrong size");
            }
        }
    }

    // Object rows: encode every real object in one pass, then splice in null rows.
    Var null = g.param(params, names::kNull);
    Var encoded;
    if (real > 0) {
        Tensor x(Shape{real, in_dim});
        Real* dst = x.ptr();
        for (int b = 0; b < B; ++b) {
            if (f.visible[b] == 0) continue;
            const auto& src = oracle ? *inputs[b].features : inputs[b].obs->patches;
            dst = std::copy(src.begin(), src.end(), dst);
        }
        encoded = oracle ? dense_stack(g, params, names::kOracleEncoder, g.constant(std::move(x)), true)
                         : encode_objects(g, params, g.constant(std::move(x)));
    }
    if (real == f.segments.total()) {
        f.objects = encoded;
    } else {
        Var base = real > 0 ? core::concat_rows({encoded, null}) : null;
        std::vector<int> rows;
        rows.reserve(static_cast<std::size_t>(f.segments.total()));
        int next = 0;
        for (int b = 0; b < B; ++b) {
            if (f.visible[b] == 0) {
                rows.push_back(real);
            } else {
                for (int i = 0; i < f.visible[b]; ++i) rows.push_back(next++);
            }
        }
        f.objects = core::gather_rows(base, std::move(rows));
    }

    const int ego_dim = kitchen::kEgoSide * kitchen::kEgoSide;
    Tensor ego(Shape{B, ego_dim});
    Tensor loc(Shape{B, kitchen::kLocDim});
    for (int b = 0; b < B; ++b) {
        const auto& obs = *inputs[b].obs;
        std::copy(obs.ego.data().begin(), obs.ego.data().end(), ego.ptr() + static_cast<std::size_t>(b) * ego_dim);
        std::copy(obs.loc.begin(), obs.loc.end(), loc.ptr() + static_cast<std::size_t>(b) * kitchen::kLocDim);
    }
    f.context = core::concat_cols({dense_stack(g, params, names::kEgoEncoder, g.constant(std::move(ego)), false),
                                   dense_stack(g, params, names::kLocEncoder, g.constant(std::move(loc)), false)});

    const Segments& segs = f.segments;
    f.keys = core::matmul(f.objects, g.param(params, names::kKey));
    Var obj_queries = core::matmul(f.objects, g.param(params, names::kQueryObject));
    f.object_attn = pool(obj_queries, f.keys, f.objects, segs, segs, cfg.attention_policy).output;
    Var ctx_rows = core::gather_rows(f.context, segs.row_owner());
    f.q_int = dense_stack(g, params, names::kInteractionHead, core::concat_cols({f.objects, f.object_attn, ctx_rows}),
                          true);

    Segments one_each;
    for (int b = 0; b < B; ++b) one_each.append(1);
    Var ctx_queries = core::matmul(f.context, g.param(params, names::kQueryContext));
    Var ctx_attn = pool(ctx_queries, f.keys, f.objects, one_each, segs, cfg.attention_policy).output;
    f.q_nav = dense_stack(g, params, names::kNavigationHead, core::concat_cols({f.context, ctx_attn}), true);
    return f;
}

QValues q_values_of(const AgentForward& f, int b) {
    QValues q;
    const Tensor& qn = f.q_nav.value();
    q.qn.assign(qn.ptr() + static_cast<std::size_t>(b) * kNumQ, qn.ptr() + static_cast<std::size_t>(b + 1) * kNumQ);
    const Tensor& qi = f.q_int.value();
    const std::size_t begin = static_cast<std::size_t>(f.segments.begin(b)) * kNumQ;
    q.qi.assign(qi.ptr() + begin, qi.ptr() + begin + static_cast<std::size_t>(f.visible[b]) * kNumQ);
    return q;
}

std::vector<QValues> evaluate_q(const ParamGroup& params, const AgentConfig& cfg, std::span<const AgentInput> inputs) {
    Graph g(false);
    const AgentForward f = agent_forward(g, params, cfg, inputs);
    std::vector<QValues> out;
    out.reserve(inputs.size());
    for (int b = 0; b < f.batch(); ++b) out.push_back(q_values_of(f, b));
    return out;
}

}  // namespace load::agent

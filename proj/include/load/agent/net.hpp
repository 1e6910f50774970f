#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "load/core/ops.hpp"
#include "load/core/rng.hpp"
#include "load/kitchen/render.hpp"

namespace load::agent {

using core::Real;
using core::Var;

inline constexpr int kNumQ = 8;

enum class AttentionPolicy { Full, Average, None };

std::string to_string(AttentionPolicy p);
AttentionPolicy parse_attention_policy(const std::string& s);

struct AgentConfig {
    int d_o = 64;
    int d_ego = 64;
    int d_loc = 32;
    int d_k = 16;
    int hidden = 128;
    int loc_hidden = 32;
    AttentionPolicy attention_policy = AttentionPolicy::Full;
    // When positive, objects are described by feature rows of this width instead of patches.
    int oracle_dim = 0;

    int d_context() const { return d_ego + d_loc; }

    friend bool operator==(const AgentConfig&, const AgentConfig&) = default;
};

// Parameter names, all under one group so a single optimizer and target copy cover the agent.
namespace names {
inline const std::string kNull = "obj.null";
inline const std::string kQueryObject = "att.wq_obj";
inline const std::string kKey = "att.wk";
inline const std::string kQueryContext = "att.wq_ctx";
inline const std::string kObjEncoder = "enc.obj";
inline const std::string kEgoEncoder = "enc.ego";
inline const std::string kLocEncoder = "enc.loc";
inline const std::string kOracleEncoder = "enc.oracle";
inline const std::string kInteractionHead = "q.int";
inline const std::string kNavigationHead = "q.nav";
}  // namespace names

// Adds a dense stack prefix.w{i} / prefix.b{i}; weights uniform in +-1/sqrt(fan_in), biases zero.
void add_dense_stack(core::ParamGroup& params, const std::string& prefix, const std::vector<int>& sizes,
                     core::Rng& rng);
// Applies the stack; the leaky rectifier follows every layer, or every layer but the last
// when `linear_output` is set.
Var dense_stack(core::Graph& g, const core::ParamGroup& params, const std::string& prefix, Var x, bool linear_output);
int dense_stack_depth(const core::ParamGroup& params, const std::string& prefix);

void init_agent_params(core::ParamGroup& params, const AgentConfig& cfg, std::uint64_t seed);

// Stacked patches (n x 256) to object encodings (n x d_o). Requires n >= 1.
Var encode_objects(core::Graph& g, const core::ParamGroup& params, Var patches);

struct Attended {
    Var output;   // 1 x d_o
    Var weights;  // n
};

// softmax((q Wq)(Z Wk)^T / sqrt(d_k)) pooled over Z, with the ablations of AttentionPolicy.
Attended attend(Var query, Var objects, Var query_map, Var key_map, AttentionPolicy policy);

enum class AttendMode { Object, Context };
Attended attend(core::Graph& g, const core::ParamGroup& params, Var query, Var objects, AttendMode mode,
                AttentionPolicy policy);

// Single-observation heads: n x 8 and 1 x 8.
Var q_interactions(core::Graph& g, const core::ParamGroup& params, Var objects, Var context, AttentionPolicy policy);
Var q_navigation(core::Graph& g, const core::ParamGroup& params, Var objects, Var context, AttentionPolicy policy);

// Per-observation inputs; `features` (num_patches rows of oracle_dim) is read only in oracle mode.
struct AgentInput {
    const kitchen::ObservationBundle* obs = nullptr;
    const std::vector<Real>* features = nullptr;
};

// Batched forward over B observations. Observation b owns object rows segments.begin(b)..end(b);
// an observation with no visible objects owns one null-object row and has visible[b] == 0.
struct AgentForward {
    Var objects;        // N x d_o
    Var keys;           // N x d_k (shared key space, reused by the object-model)
    Var object_attn;    // N x d_o, attend(z_i, Z) under the configured policy
    Var context;        // B x d_context
    Var q_int;          // N x 8
    Var q_nav;          // B x 8
    core::Segments segments;
    std::vector<int> visible;

    int batch() const { return segments.count(); }
};

AgentForward agent_forward(core::Graph& g, const core::ParamGroup& params, const AgentConfig& cfg,
                           std::span<const AgentInput> inputs);

// Q-values of one observation as plain data: qi has visible rows (row-major, 8 per object).
struct QValues {
    std::vector<Real> qn;
    std::vector<Real> qi;
    int num_objects() const { return static_cast<int>(qi.size()) / kNumQ; }
};

QValues q_values_of(const AgentForward& f, int b);

// Evaluates without recording a tape.
std::vector<QValues> evaluate_q(const core::ParamGroup& params, const AgentConfig& cfg,
                                std::span<const AgentInput> inputs);

}  // namespace load::agent

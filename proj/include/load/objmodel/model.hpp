#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "load/agent/net.hpp"
#include "load/kitchen/world.hpp"

namespace load::objmodel {

using core::Real;
using core::Var;

enum class AuxMode { None, Load, Ocn, Cobra, Oracle, OracleCategoryOnly };

std::string to_string(AuxMode m);
AuxMode parse_aux_mode(const std::string& s);
bool uses_oracle_features(AuxMode m);

struct ModelConfig {
    int d_a = 32;
    int hidden = 128;
    int negatives = 20;        // K
    double tau = 8.75e-5;      // object-model logit temperature
    int pool_cap = 85;         // m, FIFO negative pool cap
    bool attention_model = true;
    double tau_ocn = 5e-5;
    double beta_kl = 26.0;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

namespace names {
inline const std::string kPredictor = "model.f";
inline const std::string kActionObject = "model.wo";
inline const std::string kActionBase = "model.wb";
inline const std::string kCobraLogStd = "cobra.logstd";
inline const std::string kCobraRecon = "cobra.recon";
inline const std::string kCobraModel = "cobra.model";
}  // namespace names

inline constexpr Real kLogStdMin = -5;
inline constexpr Real kLogStdMax = 2;

// Adds the parameters the auxiliary mode needs (nothing for none / oracle modes).
void init_model_params(core::ParamGroup& params, const agent::AgentConfig& agent_cfg, const ModelConfig& cfg,
                       AuxMode mode, std::uint64_t seed);

// z^a = (z W^o) * (onehot W^b), row by row. Throws unless every row of `base` is one-hot.
Var action_encode(core::Graph& g, const core::ParamGroup& params, Var z_chosen, Var base_onehot);

// D = f_model([z, attend(z, Z), z^a]) row by row.
Var predict_next(core::Graph& g, const core::ParamGroup& params, Var z_anchor, Var attended, Var z_action);

// Index of the candidate row with the highest cosine similarity; ties go to the lowest index.
int match_positive(std::span<const Real> query, std::span<const Real> candidates, int dim);

// Index of the candidate row nearest in L2; ties go to the lowest index.
int nearest_l2(std::span<const Real> query, std::span<const Real> candidates, int dim);

// Recent detached encodings used to top up negatives when a batch is too small.
class NegativePool {
public:
    explicit NegativePool(int cap = 85) : cap_(cap) {}
    void push(std::span<const Real> row);
    int size() const { return static_cast<int>(rows_.size()); }
    int cap() const { return cap_; }
    const std::vector<Real>& row(int i) const { return rows_[static_cast<std::size_t>(i)]; }
    void clear() { rows_.clear(); }

private:
    int cap_;
    std::deque<std::vector<Real>> rows_;
};

struct NegativeDraw {
    // Values below n_batch index batch candidates; the rest index pool entries offset by n_batch.
    std::vector<int> indices;
    bool with_replacement = false;
};

// K negatives: uniform without replacement over batch candidates other than `exclude`, topped
// up uniformly without replacement from the pool, and with replacement only if both together
// are still too small. Throws when nothing at all is available.
NegativeDraw sample_negatives(int n_batch, int n_pool, int k, int exclude, core::Rng& rng);

// Sum over rows of -log softmax(logits)[0].
Var nce_loss(Var logits);

// 0.5 * sum(mu^2 + sigma^2 - 1 - ln sigma^2) with sigma = exp(log_std).
Var gaussian_kl(Var mu, Var log_std);

// Batch view over a forward pass of 2B observations: rows 0..B-1 are s_t, B..2B-1 are s_{t+1}.
struct TransitionView {
    const agent::AgentForward* forward = nullptr;
    std::span<const agent::AgentInput> inputs;
    std::span<const kitchen::ActionSpec> actions;

    int batch() const { return static_cast<int>(actions.size()); }
};

struct ModelLossStats {
    int anchors = 0;
    bool sampled_with_replacement = false;
};

// Attentive object-model loss: for every object at t, classify its cosine-matched encoding at
// t+1 against K negatives. Summed over objects, averaged over the batch.
Var attentive_model_loss(core::Graph& g, const core::ParamGroup& params, const ModelConfig& cfg,
                         const TransitionView& view, const NegativePool& pool, core::Rng& rng,
                         ModelLossStats* stats = nullptr);

// n-tuplet loss on raw encodings: L2-nearest next-step encoding is the positive, the other
// next-step encodings are negatives. Frames with fewer than two next-step objects add nothing.
Var ocn_loss(core::Graph& g, const ModelConfig& cfg, const TransitionView& view);

// Variational autoencoder on patches plus a latent next-step predictor, without actions.
Var cobra_loss(core::Graph& g, const core::ParamGroup& params, const ModelConfig& cfg, const TransitionView& view,
               core::Rng& rng);

// Pushes the real next-step encodings of a batch into the pool.
void remember_encodings(NegativePool& pool, const TransitionView& view);

// Ground-truth object descriptions.
inline constexpr int kOracleDim = 3 * kitchen::kNumCategories + 13;

// Rows of kOracleDim features for the given ids. Layout: category one-hot, parent category
// one-hot, first-child category one-hot, distance / 16, visible, toggled, broken, filled,
// dirty, cooked, sliced, open, picked up, temperature one-hot (cold, room, hot).
std::vector<Real> oracle_features(const kitchen::WorldState& w, std::span<const int> ids, bool category_only);

}  // namespace load::objmodel

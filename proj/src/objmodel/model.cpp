#include "load/objmodel/model.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace load::objmodel {

using core::Graph;
using core::ParamGroup;
using core::Shape;
using core::Tensor;

std::string to_string(AuxMode m) {
    switch (m) {
        case AuxMode::None:
            return "none";
        case AuxMode::Load:
            return "load";
        case AuxMode::Ocn:
            return "ocn";
        case AuxMode::Cobra:
            return "cobra";
        case AuxMode::Oracle:
            return "oracle";
        case AuxMode::OracleCategoryOnly:
            return "oracle_category_only";
    }
    return "none";
}

AuxMode parse_aux_mode(const std::string& s) {
    for (AuxMode m : {AuxMode::None, AuxMode::Load, AuxMode::Ocn, AuxMode::Cobra, AuxMode::Oracle,
                      AuxMode::OracleCategoryOnly}) {
        if (to_string(m) == s) return m;
    }
    throw std::invalid_argument("aux must be one of none, load, ocn, cobra, oracle, oracle_category_only (got '" + s +
                                "')");
}

bool uses_oracle_features(AuxMode m) { return m == AuxMode::Oracle || m == AuxMode::OracleCategoryOnly; }

namespace {

Tensor random_map(int in, int out, core::Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w(Shape{in, out});
    for (auto& v : w.data()) v = static_cast<Real>(rng.uniform(-bound, bound));
    return w;
}

}  // namespace

void init_model_params(ParamGroup& params, const agent::AgentConfig& agent_cfg, const ModelConfig& cfg, AuxMode mode,
                       std::uint64_t seed) {
    core::Rng rng(seed ^ 0x6D6F64656C000000ull);
    const int d = agent_cfg.d_o;
    if (mode == AuxMode::Load) {
        agent::add_dense_stack(params, names::kPredictor, {2 * d + cfg.d_a, cfg.hidden, d}, rng);
        params.add(names::kActionObject, random_map(d, cfg.d_a, rng));
        params.add(names::kActionBase, random_map(agent::kNumQ, cfg.d_a, rng));
    } else if (mode == AuxMode::Cobra) {
        agent::add_dense_stack(params, names::kCobraLogStd, {d, d}, rng);
        agent::add_dense_stack(params, names::kCobraRecon, {d, cfg.hidden, kitchen::kPatchSize}, rng);
        agent::add_dense_stack(params, names::kCobraModel, {d, cfg.hidden, d}, rng);
    }
}

namespace {

Var linear(Graph& g, const ParamGroup& params, const std::string& name, Var x) {
    return core::matmul(x, g.param(params, name));
}

std::span<const Real> row_span(const Tensor& m, int r) {
    return m.data().subspan(static_cast<std::size_t>(r) * m.cols(), static_cast<std::size_t>(m.cols()));
}

Var zero_scalar(Graph& g) { return g.constant(Tensor::scalar(0)); }

}  // namespace

Var action_encode(Graph& g, const ParamGroup& params, Var z_chosen, Var base_onehot) {
    const Tensor& b = base_onehot.value();
    if (b.cols() != agent::kNumQ) throw std::invalid_argument("action_encode: base must have 8 columns");
    for (int r = 0; r < b.rows(); ++r) {
        int ones = 0;
        for (int c = 0; c < b.cols(); ++c) {
            const Real v = b.at(r, c);
            if (v == 1) {
                ++ones;
            } else if (v != 0) {
                ones = -1;
                break;
            }
        }
        if (ones != 1) throw std::invalid_argument("action_encode: base row " + std::to_string(r) + " is not one-hot");
    }
    return core::mul(linear(g, params, names::kActionObject, z_chosen),
                     linear(g, params, names::kActionBase, base_onehot));
}

Var predict_next(Graph& g, const ParamGroup& params, Var z_anchor, Var attended, Var z_action) {
    return agent::dense_stack(g, params, names::kPredictor, core::concat_cols({z_anchor, attended, z_action}), true);
}

int match_positive(std::span<const Real> query, std::span<const Real> candidates, int dim) {
    const int n = static_cast<int>(candidates.size()) / dim;
    if (n == 0) throw std::invalid_argument("match_positive: no candidates");
    double qn = 0;
    for (int j = 0; j < dim; ++j) qn += double(query[j]) * query[j];
    qn = std::sqrt(qn);
    int best = 0;
    double best_cos = -2;
    for (int i = 0; i < n; ++i) {
        double dot = 0, cn = 0;
        for (int j = 0; j < dim; ++j) {
            const double c = candidates[static_cast<std::size_t>(i) * dim + j];
            dot += double(query[j]) * c;
            cn += c * c;
        }
        const double cos = dot / std::max(qn * std::sqrt(cn), double(core::kNormEpsilon));
        if (cos > best_cos) {
            best_cos = cos;
            best = i;
        }
    }
    return best;
}

int nearest_l2(std::span<const Real> query, std::span<const Real> candidates, int dim) {
    const int n = static_cast<int>(candidates.size()) / dim;
    if (n == 0) throw std::invalid_argument("nearest_l2: no candidates");
    int best = 0;
    double best_d = INFINITY;
    for (int i = 0; i < n; ++i) {
        double d = 0;
        for (int j = 0; j < dim; ++j) {
            const double diff = double(query[j]) - candidates[static_cast<std::size_t>(i) * dim + j];
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

void NegativePool::push(std::span<const Real> row) {
    if (cap_ <= 0) return;
    rows_.emplace_back(row.begin(), row.end());
    while (static_cast<int>(rows_.size()) > cap_) rows_.pop_front();
}

NegativeDraw sample_negatives(int n_batch, int n_pool, int k, int exclude, core::Rng& rng) {
    NegativeDraw draw;
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(std::max(0, n_batch)));
    for (int i = 0; i < n_batch; ++i) {
        if (i != exclude) batch.push_back(i);
    }
    const int available = static_cast<int>(batch.size()) + n_pool;
    if (available == 0) throw std::invalid_argument("sample_negatives: no candidates");
    // Partial Fisher-Yates: the first `take` entries become a uniform sample without replacement.
    const auto take_from = [&](std::vector<int>& from, int take) {
        for (int i = 0; i < take; ++i) {
            const int j = i + rng.below(static_cast<int>(from.size()) - i);
            std::swap(from[i], from[j]);
            draw.indices.push_back(from[i]);
        }
    };
    const int from_batch = std::min(k, static_cast<int>(batch.size()));
    take_from(batch, from_batch);
    if (from_batch < k && n_pool > 0) {
        std::vector<int> pool(static_cast<std::size_t>(n_pool));
        for (int i = 0; i < n_pool; ++i) pool[i] = n_batch + i;
        take_from(pool, std::min(k - from_batch, n_pool));
    }
    if (static_cast<int>(draw.indices.size()) < k) {
        draw.with_replacement = true;
        const int short_by = k - static_cast<int>(draw.indices.size());
        for (int i = 0; i < short_by; ++i) {
            const int u = rng.below(available);
            draw.indices.push_back(u < static_cast<int>(batch.size()) ? batch[u] : n_batch + (u - static_cast<int>(batch.size())));
        }
    }
    return draw;
}

Var nce_loss(Var logits) {
    const int rows = logits.value().rows(), cols = logits.value().cols();
    std::vector<int> first(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) first[r] = r * cols;
    return core::scale(core::sum(core::gather_elements(core::log_softmax_rows(logits), std::move(first))), -1);
}

Var gaussian_kl(Var mu, Var log_std) {
    Var var = core::exp(core::scale(log_std, 2));
    Var inner = core::sub(core::add(core::mul(mu, mu), var), core::scale(log_std, 2));
    return core::scale(core::add_scalar(core::sum(inner), -static_cast<Real>(mu.value().size())), Real(0.5));
}

Var attentive_model_loss(Graph& g, const ParamGroup& params, const ModelConfig& cfg, const TransitionView& view,
                         const NegativePool& pool, core::Rng& rng, ModelLossStats* stats) {
    const agent::AgentForward& f = *view.forward;
    const int B = view.batch();
    if (f.batch() != 2 * B) throw std::invalid_argument("attentive_model_loss: forward must cover s_t and s_t+1");
    const Tensor& Z = f.objects.value();
    const int d = Z.cols();
    const int null_row = Z.rows();
    const int width = cfg.negatives + 1;

    // Real object rows anywhere in the batch are the in-batch negative candidates.
    std::vector<int> cand_rows;
    std::vector<int> cand_pos(static_cast<std::size_t>(Z.rows()), -1);
    for (int b = 0; b < 2 * B; ++b) {
        for (int i = 0; i < f.visible[b]; ++i) {
            cand_pos[f.segments.begin(b) + i] = static_cast<int>(cand_rows.size());
            cand_rows.push_back(f.segments.begin(b) + i);
        }
    }
    const int n_cand = static_cast<int>(cand_rows.size());

    std::vector<int> anchors, chosen, logit_rows;
    std::vector<Real> onehot;
    bool replaced = false, needs_pool = false;
    for (int b = 0; b < B; ++b) {
        const int nt = f.visible[b], nt1 = f.visible[B + b];
        if (nt == 0 || nt1 == 0) continue;
        const kitchen::ActionSpec& a = view.actions[b];
        int chosen_row = null_row;
        if (a.interact) {
            if (a.patch_index < 0 || a.patch_index >= nt) {
                throw std::out_of_range("attentive_model_loss: action patch outside observation");
            }
            chosen_row = f.segments.begin(b) + a.patch_index;
        }
        const std::size_t next_begin = static_cast<std::size_t>(f.segments.begin(B + b)) * d;
        const auto next_rows = Z.data().subspan(next_begin, static_cast<std::size_t>(nt1) * d);
        for (int i = 0; i < nt; ++i) {
            const int row = f.segments.begin(b) + i;
            anchors.push_back(row);
            chosen.push_back(chosen_row);
            for (int c = 0; c < agent::kNumQ; ++c) onehot.push_back(c == a.base ? 1 : 0);
            const int positive = cand_pos[f.segments.begin(B + b) + match_positive(row_span(Z, row), next_rows, d)];
            const NegativeDraw draw = sample_negatives(n_cand, pool.size(), cfg.negatives, positive, rng);
            replaced = replaced || draw.with_replacement;
            logit_rows.push_back(positive);
            for (int idx : draw.indices) {
                needs_pool = needs_pool || idx >= n_cand;
                logit_rows.push_back(idx);
            }
        }
    }
    if (stats != nullptr) {
        stats->anchors = static_cast<int>(anchors.size());
        stats->sampled_with_replacement = replaced;
    }
    if (replaced) {
        static bool warned = false;
        if (!warned) {
            std::cerr << "warning: fewer than " << cfg.negatives
                      << " negative candidates; sampling negatives with replacement\n";
            warned = true;
        }
    }
    if (anchors.empty()) return zero_scalar(g);
    const int A = static_cast<int>(anchors.size());

    Var z_anchor = core::gather_rows(f.objects, anchors);
    Var attended = cfg.attention_model ? core::gather_rows(f.object_attn, anchors) : g.constant(Tensor(Shape{A, d}));
    Var chosen_z = core::gather_rows(core::concat_rows({f.objects, g.param(params, agent::names::kNull)}), chosen);
    Var z_action = action_encode(g, params, chosen_z, g.constant(Tensor(Shape{A, agent::kNumQ}, onehot)));
    Var D = predict_next(g, params, z_anchor, attended, z_action);

    Var candidates = core::gather_rows(f.objects, cand_rows);
    if (needs_pool) {
        Tensor extra(Shape{pool.size(), d});
        for (int i = 0; i < pool.size(); ++i) std::copy(pool.row(i).begin(), pool.row(i).end(), extra.ptr() + static_cast<std::size_t>(i) * d);
        candidates = core::concat_rows({candidates, g.constant(std::move(extra))});
    }
    std::vector<int> repeat(logit_rows.size());
    for (std::size_t r = 0; r < repeat.size(); ++r) repeat[r] = static_cast<int>(r) / width;
    Var dots = core::rowwise_dot(core::gather_rows(D, std::move(repeat)), core::gather_rows(candidates, logit_rows));
    Var logits = core::scale(core::reshape(dots, Shape{A, width}), static_cast<Real>(1.0 / cfg.tau));
    return core::scale(nce_loss(logits), Real(1) / static_cast<Real>(B));
}

Var ocn_loss(Graph& g, const ModelConfig& cfg, const TransitionView& view) {
    const agent::AgentForward& f = *view.forward;
    const int B = view.batch();
    if (f.batch() != 2 * B) throw std::invalid_argument("ocn_loss: forward must cover s_t and s_t+1");
    const Tensor& Z = f.objects.value();
    const int d = Z.cols();
    // Group anchors by the number of next-step objects so each group is one rectangular softmax.
    struct Group {
        std::vector<int> anchor_rows;
        std::vector<int> cand_rows;
    };
    std::map<int, Group> groups;
    for (int b = 0; b < B; ++b) {
        const int nt = f.visible[b], nt1 = f.visible[B + b];
        if (nt == 0 || nt1 < 2) continue;
        const int next = f.segments.begin(B + b);
        const auto next_rows = Z.data().subspan(static_cast<std::size_t>(next) * d, static_cast<std::size_t>(nt1) * d);
        Group& grp = groups[nt1];
        for (int i = 0; i < nt; ++i) {
            const int row = f.segments.begin(b) + i;
            const int pos = nearest_l2(row_span(Z, row), next_rows, d);
            for (int j = 0; j < nt1; ++j) grp.anchor_rows.push_back(row);
            grp.cand_rows.push_back(next + pos);
            for (int j = 0; j < nt1; ++j) {
                if (j != pos) grp.cand_rows.push_back(next + j);
            }
        }
    }
    Var total = zero_scalar(g);
    for (auto& [width, grp] : groups) {
        const int rows = static_cast<int>(grp.anchor_rows.size()) / width;
        Var dots = core::rowwise_dot(core::gather_rows(f.objects, std::move(grp.anchor_rows)),
                                     core::gather_rows(f.objects, std::move(grp.cand_rows)));
        Var logits = core::scale(core::reshape(dots, Shape{rows, width}), static_cast<Real>(1.0 / cfg.tau_ocn));
        total = core::add(total, nce_loss(logits));
    }
    return core::scale(total, Real(1) / static_cast<Real>(B));
}

Var cobra_loss(Graph& g, const ParamGroup& params, const ModelConfig& cfg, const TransitionView& view,
               core::Rng& rng) {
    const agent::AgentForward& f = *view.forward;
    const int B = view.batch();
    if (f.batch() != 2 * B || static_cast<int>(view.inputs.size()) != 2 * B) {
        throw std::invalid_argument("cobra_loss: forward must cover s_t and s_t+1");
    }
    const Tensor& Z = f.objects.value();
    const int d = Z.cols();
    std::vector<int> rows, predicted;
    std::vector<Real> patches_now, patches_next;
    for (int b = 0; b < B; ++b) {
        const int nt = f.visible[b], nt1 = f.visible[B + b];
        const int next = f.segments.begin(B + b);
        const auto next_rows = Z.data().subspan(static_cast<std::size_t>(next) * d, static_cast<std::size_t>(nt1) * d);
        for (int i = 0; i < nt; ++i) {
            const int row = f.segments.begin(b) + i;
            const auto patch = view.inputs[b].obs->patch(i);
            patches_now.insert(patches_now.end(), patch.begin(), patch.end());
            if (nt1 > 0) {
                predicted.push_back(static_cast<int>(rows.size()));
                const auto target = view.inputs[B + b].obs->patch(match_positive(row_span(Z, row), next_rows, d));
                patches_next.insert(patches_next.end(), target.begin(), target.end());
            }
            rows.push_back(row);
        }
    }
    if (rows.empty()) return zero_scalar(g);
    const int A = static_cast<int>(rows.size());
    Var mu = core::gather_rows(f.objects, rows);
    Var log_std = core::clamp(agent::dense_stack(g, params, names::kCobraLogStd, mu, true), kLogStdMin, kLogStdMax);
    Tensor noise(Shape{A, d});
    for (auto& v : noise.data()) v = static_cast<Real>(rng.normal());
    Var z = core::add(mu, core::mul(core::exp(log_std), g.constant(std::move(noise))));
    Var recon = agent::dense_stack(g, params, names::kCobraRecon, z, true);
    Var loss = core::squared_error(recon, g.constant(Tensor(Shape{A, kitchen::kPatchSize}, std::move(patches_now))));
    if (!predicted.empty()) {
        const int P = static_cast<int>(predicted.size());
        Var zn = agent::dense_stack(g, params, names::kCobraModel, core::gather_rows(z, predicted), true);
        Var pred = agent::dense_stack(g, params, names::kCobraRecon, zn, true);
        loss = core::add(loss, core::squared_error(
                                   pred, g.constant(Tensor(Shape{P, kitchen::kPatchSize}, std::move(patches_next)))));
    }
    loss = core::add(loss, core::scale(gaussian_kl(mu, log_std), static_cast<Real>(cfg.beta_kl)));
    return core::scale(loss, Real(1) / static_cast<Real>(B));
}

void remember_encodings(NegativePool& pool, const TransitionView& view) {
    const agent::AgentForward& f = *view.forward;
    const int B = view.batch();
    const Tensor& Z = f.objects.value();
    std::vector<int> rows;
    for (int b = B; b < 2 * B; ++b) {
        for (int i = 0; i < f.visible[b]; ++i) rows.push_back(f.segments.begin(b) + i);
    }
    const std::size_t skip = rows.size() > static_cast<std::size_t>(pool.cap()) ? rows.size() - pool.cap() : 0;
    for (std::size_t r = skip; r < rows.size(); ++r) pool.push(row_span(Z, rows[r]));
}

std::vector<Real> oracle_features(const kitchen::WorldState& w, std::span<const int> ids, bool category_only) {
    constexpr int C = kitchen::kNumCategories;
    std::vector<Real> out(ids.size() * kOracleDim, Real(0));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const auto& o = w.object(ids[r]);
        Real* row = out.data() + r * kOracleDim;
        row[kitchen::index_of(o.category)] = 1;
        if (category_only) continue;
        if (o.parent >= 0) row[C + kitchen::index_of(w.object(o.parent).category)] = 1;
        const auto kids = w.children(o.id);
        if (!kids.empty()) row[2 * C + kitchen::index_of(w.object(kids.front()).category)] = 1;
        Real* tail = row + 3 * C;
        const int dist = std::abs(o.cell.col - w.agent.cell.col) + std::abs(o.cell.row - w.agent.cell.row);
        tail[0] = static_cast<Real>(dist) / Real(16);
        tail[1] = 1;  // every described object is in view
        tail[2] = o.is_on ? 1 : 0;
        tail[3] = 0;  // broken: nothing breaks in this world
        tail[4] = o.is_filled ? 1 : 0;
        tail[5] = 0;  // dirty: never set
        tail[6] = o.is_cooked ? 1 : 0;
        tail[7] = o.is_sliced ? 1 : 0;
        tail[8] = o.is_open ? 1 : 0;
        tail[9] = o.is_picked_up ? 1 : 0;
        tail[10 + static_cast<int>(o.temperature)] = 1;
    }
    return out;
}

}  // namespace load::objmodel

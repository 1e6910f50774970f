#include "load/kitchen/render.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <random>

#include "load/kitchen/env.hpp"

namespace load::kitchen {

using core::Real;

namespace {

using Glyph = std::array<Real, kPatchSize>;

// Glyphs for all categories at the four viewing yaws; index [category][yaw].
const std::array<std::array<Glyph, 4>, kNumCategories>& glyph_table() {
    static const auto table = [] {
        std::array<std::array<Glyph, 4>, kNumCategories> t{};
        for (int c = 0; c < kNumCategories; ++c) {
            // std::mt19937 output is fully specified, so glyphs are identical on every platform.
            std::mt19937 rng(0x9E3779B9u + static_cast<unsigned>(c) * 7919u);
            Glyph& g = t[c][0];
            for (Real& v : g) v = (rng() & 1u) ? kGlyphHigh : kGlyphLow;
            for (int k = 1; k < 4; ++k) {
                const Glyph& prev = t[c][k - 1];
                Glyph& cur = t[c][k];
                // One clockwise quarter turn.
                for (int r = 0; r < kPatchSide; ++r) {
                    for (int col = 0; col < kPatchSide; ++col) {
                        cur[r * kPatchSide + col] = prev[(kPatchSide - 1 - col) * kPatchSide + r];
                    }
                }
            }
        }
        return t;
    }();
    return table;
}

const Glyph& glyph(Category c, Yaw yaw) { return glyph_table()[index_of(c)][static_cast<int>(yaw)]; }

}  // namespace

const std::array<Real, kPatchSize>& base_glyph(Category c) { return glyph(c, Yaw::N); }

void render_patch_into(const WorldState& w, int id, Yaw viewer_yaw, std::span<Real> out) {
    const ObjectState& o = w.object(id);
    const Glyph& g = glyph(o.category, viewer_yaw);
    std::copy(g.begin(), g.end(), out.begin());
    auto px = [&out](int r, int c) -> Real& { return out[static_cast<std::size_t>(r * kPatchSide + c)]; };
    if (o.is_on) {
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < kPatchSide; ++c) px(r, c) = 1.0;
    }
    if (o.is_open) {
        for (int r = 5; r < 11; ++r)
            for (int c = 5; c < 11; ++c) px(r, c) = 0.1;
    }
    if (o.is_filled) {
        for (int r = 10; r < kPatchSide; ++r)
            for (int c = 0; c < kPatchSide; ++c) px(r, c) = 0.9;
    }
    if (o.is_sliced) {
        for (int r = 6; r < 10; ++r)
            for (int c = 0; c < kPatchSide; c += 2) px(r, c) = 0.0;
    }
    if (o.is_cooked) {
        for (Real& v : out) v *= 0.5;
    }
    // Containment cue: first child's glyph, nearest-neighbour downsampled to 5x5 at the centre.
    for (const auto& child : w.objects) {
        if (child.parent != id) continue;
        const Glyph& cg = glyph(child.category, viewer_yaw);
        for (int r = 0; r < kStampSide; ++r) {
            for (int c = 0; c < kStampSide; ++c) {
                const int sr = (2 * r + 1) * kPatchSide / (2 * kStampSide);
                const int sc = (2 * c + 1) * kPatchSide / (2 * kStampSide);
                px(kStampOffset + r, kStampOffset + c) = cg[sr * kPatchSide + sc];
            }
        }
        break;
    }
}

core::Tensor render_patch(const WorldState& w, int id, Yaw viewer_yaw) {
    core::Tensor t(core::Shape{kPatchSide, kPatchSide});
    render_patch_into(w, id, viewer_yaw, t.data());
    return t;
}

core::Tensor render_ego(const WorldState& w, const std::vector<int>& visible) {
    core::Tensor img(core::Shape{kEgoSide, kEgoSide}, 0.0);
    const Cell f = yaw_forward(w.agent.yaw);
    const Cell r = yaw_right(w.agent.yaw);
    for (int fwd = 0; fwd < 3; ++fwd) {
        for (int lat = -1; lat <= 1; ++lat) {
            const Cell cell{w.agent.cell.col + fwd * f.col + lat * r.col, w.agent.cell.row + fwd * f.row + lat * r.row};
            if (!on_grid(cell)) continue;
            // Topmost: deepest in the containment forest, lowest id on ties.
            int best = -1, best_depth = -1;
            for (int id : visible) {
                const ObjectState& o = w.object(id);
                if (!(o.cell == cell)) continue;
                const int d = w.depth(id) + (o.parent == kAgentParent ? 1 : 0);
                if (d > best_depth) {
                    best = id;
                    best_depth = d;
                }
            }
            const Real value = best < 0 ? kEgoEmpty
                                        : Real(index_of(w.object(best).category) + 1) / Real(kNumCategories + 1);
            const int br = 3 - fwd, bc = lat + 1;
            for (int y = 0; y < kEgoBlock; ++y) {
                for (int x = 0; x < kEgoBlock; ++x) img.at(br * kEgoBlock + y, bc * kEgoBlock + x) = value;
            }
        }
    }
    return img;
}

core::Tensor render_ego(const WorldState& w) { return render_ego(w, visible_objects(w)); }

std::array<Real, kLocDim> encode_pose(const Pose& p) {
    const Real half = Real(kGridSize - 1) / 2;
    return {Real(p.cell.col) / half - 1, Real(p.cell.row) / half - 1, 0,
            Real(static_cast<int>(p.yaw)) / Real(1.5) - 1, p.pitch == Pitch::Level ? Real(0) : Real(-1), 0};
}

ObservationBundle observe(const WorldState& w) {
    ObservationBundle obs;
    obs.patch_ids = visible_objects(w);
    obs.patches.resize(obs.patch_ids.size() * kPatchSize);
    for (std::size_t i = 0; i < obs.patch_ids.size(); ++i) {
        render_patch_into(w, obs.patch_ids[i], w.agent.yaw,
                          std::span<Real>(obs.patches).subspan(i * kPatchSize, kPatchSize));
    }
    obs.ego = render_ego(w, obs.patch_ids);
    obs.loc = encode_pose(w.agent);
    return obs;
}

std::uint64_t observation_digest(const ObservationBundle& obs) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    mix(obs.ego.ptr(), obs.ego.size() * sizeof(Real));
    mix(obs.patches.data(), obs.patches.size() * sizeof(Real));
    mix(obs.patch_ids.data(), obs.patch_ids.size() * sizeof(int));
    mix(obs.loc.data(), obs.loc.size() * sizeof(Real));
    return h;
}

}  // namespace load::kitchen

#pragma once

#include <array>
#include <span>
#include <vector>

#include "load/core/tensor.hpp"
#include "load/kitchen/world.hpp"

namespace load::kitchen {

inline constexpr int kPatchSide = 16;
inline constexpr int kPatchSize = kPatchSide * kPatchSide;
inline constexpr int kEgoSide = 32;
inline constexpr int kEgoBlock = 8;
inline constexpr int kLocDim = 6;

// Intensities used by the procedural renderer.
inline constexpr core::Real kGlyphLow = 0.25;
inline constexpr core::Real kGlyphHigh = 0.75;
inline constexpr core::Real kEgoEmpty = 0.05;
inline constexpr int kStampSide = 5;
inline constexpr int kStampOffset = (kPatchSide - kStampSide) / 2;

struct ObservationBundle {
    core::Tensor ego;                 // [32,32]
    std::vector<core::Real> patches;  // num_patches() rows of 256 values
    std::vector<int> patch_ids;       // simulator ids; read only by the oracle encoder and probes
    std::array<core::Real, kLocDim> loc{};

    int num_patches() const { return static_cast<int>(patch_ids.size()); }
    std::span<const core::Real> patch(int i) const {
        return std::span<const core::Real>(patches).subspan(static_cast<std::size_t>(i) * kPatchSize, kPatchSize);
    }

    friend bool operator==(const ObservationBundle&, const ObservationBundle&) = default;
};

// Unrotated binary glyph of a category, values kGlyphLow / kGlyphHigh.
const std::array<core::Real, kPatchSize>& base_glyph(Category c);

// Writes the 16x16 patch of object `id` as seen with `viewer_yaw` into out[0..256).
void render_patch_into(const WorldState& w, int id, Yaw viewer_yaw, std::span<core::Real> out);
core::Tensor render_patch(const WorldState& w, int id, Yaw viewer_yaw);

// Requires the already computed visible list (see visible_objects).
core::Tensor render_ego(const WorldState& w, const std::vector<int>& visible);
core::Tensor render_ego(const WorldState& w);

std::array<core::Real, kLocDim> encode_pose(const Pose& p);

ObservationBundle observe(const WorldState& w);

// FNV-1a over the bit patterns of an observation; used in traces to check replays.
std::uint64_t observation_digest(const ObservationBundle& obs);

}  // namespace load::kitchen

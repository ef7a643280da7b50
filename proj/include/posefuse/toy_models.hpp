#pragma once

#include "posefuse/model.hpp"

#include <array>
#include <cstdint>

namespace posefuse {

/// Procedural capsule models. Body and hand specs generated from the same seed
/// share the hand template, so the body hand regions are exact rigid copies of
/// the hand model at rest.
ModelSpec generate_toy_spec(ModelKind kind, std::uint64_t seed);

inline constexpr int kToyHandVertices = 6 * 12 + 1 + 5 * (8 * 8 + 1);

/// Fingertip vertex ids of the toy hand in finger order index, middle, pinky, ring, thumb.
std::array<int, 5> toy_hand_tip_vertices();

/// Rotation from hand-model coordinates to body rest coordinates for a side's region.
Matrix3 hand_region_rotation(Side side);

}  // namespace posefuse

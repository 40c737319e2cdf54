#pragma once

#include "gradflow/volume.hpp"

#include <cstdint>
#include <vector>

namespace gradflow {

/// Binary mask, one byte per voxel (0 or 1), [z][y][x] order.
using Mask = Array<std::uint8_t>;

/// Squared Euclidean distance from every voxel to the nearest voxel with
/// mask value `feature`. Voxels with no feature in the volume get INT64_MAX.
/// Separable exact transform (lower envelope of parabolas, one pass per axis).
[[nodiscard]] std::vector<std::int64_t> squared_distance_transform(const Mask& mask, std::uint8_t feature = 1);

/// Offsets of the discrete ball {o : |o| <= radius + 0.5}.
[[nodiscard]] std::vector<std::array<int, 3>> ball_offsets(int radius);

/// Dilation then erosion with the discrete ball of the given radius. Voxels
/// outside the volume never erode anything, so the result always contains
/// the input. Runtime depends on volume size only.
[[nodiscard]] Mask close_ball(const Mask& mask, int radius);

/// Connected components of nonzero voxels, numbered 1..n in raster order of
/// their first voxel. `connectivity` is 6 or 26.
[[nodiscard]] LabelVolume label_components(const Mask& mask, int connectivity, std::uint32_t* count = nullptr);

}  // namespace gradflow

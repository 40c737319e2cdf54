#pragma once

#include "gradflow/volume.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace gradflow {

struct TileGrid {
    Dims volume_dims{};
    Dims patch_dims{128, 128, 64};  ///< after clamping to the volume
    Dims overlap{32, 32, 16};
    std::vector<Index3> origins;     ///< z-major: x varies fastest
    std::vector<std::string> warnings;
};

/// Per-axis origins at stride patch - overlap; the last tile is shifted inward
/// so it ends exactly at the volume border. Patches larger than the volume
/// are clamped (and noted in `warnings`).
[[nodiscard]] TileGrid plan_tiles(Dims volume_dims, Dims patch_dims, Dims overlap);

/// Origins along one axis, exposed for testing.
[[nodiscard]] std::vector<std::size_t> axis_origins(std::size_t length, std::size_t patch, std::size_t overlap);

/// Blending weight at position (x, y, z) of a patch:
/// prod_a min(1, (d_a + 1) / (overlap_a / 2 + 1)), d_a = distance to the nearest face.
[[nodiscard]] double tile_weight(const TileGrid& grid, std::size_t x, std::size_t y, std::size_t z);

template <class T>
[[nodiscard]] Array<T> extract_patch(const Array<T>& v, Index3 origin, Dims size);
[[nodiscard]] Volume extract_patch(const Volume& v, Index3 origin, Dims size);

/// Copies `patch` into `v` at `origin`.
template <class T>
void insert_patch(Array<T>& v, const Array<T>& patch, Index3 origin);

/// Weighted average of overlapping patches, accumulated in origin order.
[[nodiscard]] Array<float> merge_tiles(const TileGrid& grid, const std::vector<Array<float>>& patches);

// ---------------------------------------------------------------------------
// Tile manifest
// ---------------------------------------------------------------------------
//
//   # gradflow tile manifest v1
//   volume <nx> <ny> <nz>
//   patch <px> <py> <pz>
//   overlap <ox> <oy> <oz>
//   tile <index> <x> <y> <z> <input-path> [<prediction-path>]
//
// Relative paths resolve against the manifest's directory. An external
// predictor appends the prediction path to each tile line; merging reads the
// prediction if present and the input otherwise.

struct ManifestTile {
    std::size_t index = 0;
    Index3 origin{};
    std::filesystem::path input;
    std::filesystem::path prediction;  ///< empty until a predictor fills it in
};

struct TileManifest {
    TileGrid grid;
    std::vector<ManifestTile> tiles;
};

void write_manifest(const std::filesystem::path& path, const TileManifest& m);
[[nodiscard]] TileManifest read_manifest(const std::filesystem::path& path);

}  // namespace gradflow

#include "gradflow/tiling.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gradflow {

std::vector<std::size_t> axis_origins(std::size_t length, std::size_t patch, std::size_t overlap) {
    if (patch == 0) throw ValidationError("patch size must be >= 1");
    if (overlap >= patch) throw ValidationError("overlap must be smaller than the patch size");
    if (patch >= length) return {0};
    const std::size_t stride = patch - overlap;
    std::vector<std::size_t> out;
    std::size_t o = 0;
    for (;;) {
        out.push_back(o);
        if (o + patch >= length) break;
        o += stride;
        if (o + patch > length) o = length - patch;
    }
    return out;
}

TileGrid plan_tiles(Dims volume_dims, Dims patch_dims, Dims overlap) {
    TileGrid grid;
    grid.volume_dims = volume_dims;
    std::array<std::vector<std::size_t>, 3> axes;
    std::array<std::size_t, 3> patch{}, over{};
    for (int a = 0; a < 3; ++a) {
        if (overlap[a] >= patch_dims[a])
            throw ValidationError("overlap " + to_string(overlap) + " must be smaller than patch " +
                                  to_string(patch_dims) + " on every axis");
        patch[a] = patch_dims[a];
        over[a] = overlap[a];
        if (patch[a] > volume_dims[a]) {
            grid.warnings.push_back("patch clamped to volume on axis " + std::string(1, "xyz"[a]) + ": " +
                                    std::to_string(patch[a]) + " -> " + std::to_string(volume_dims[a]));
            patch[a] = volume_dims[a];
            over[a] = std::min(over[a], patch[a] - 1);
        }
        axes[a] = axis_origins(volume_dims[a], patch[a], over[a]);
    }
    grid.patch_dims = {patch[0], patch[1], patch[2]};
    grid.overlap = {over[0], over[1], over[2]};
    for (std::size_t z : axes[2])
        for (std::size_t y : axes[1])
            for (std::size_t x : axes[0]) grid.origins.push_back({x, y, z});
    return grid;
}

double tile_weight(const TileGrid& grid, std::size_t x, std::size_t y, std::size_t z) {
    const std::array<std::size_t, 3> p{x, y, z};
    double w = 1.0;
    for (int a = 0; a < 3; ++a) {
        const std::size_t n = grid.patch_dims[a];
        const std::size_t dist = std::min(p[a], n - 1 - p[a]);
        const double margin = static_cast<double>(grid.overlap[a]) / 2.0;
        w *= std::min(1.0, (static_cast<double>(dist) + 1.0) / (margin + 1.0));
    }
    return w;
}

template <class T>
Array<T> extract_patch(const Array<T>& v, Index3 origin, Dims size) {
    const Dims d = v.dims();
    for (int a = 0; a < 3; ++a)
        if (size[a] == 0 || origin[a] + size[a] > d[a])
            throw ValidationError("patch " + to_string(size) + " at (" + std::to_string(origin[0]) + ", " +
                                  std::to_string(origin[1]) + ", " + std::to_string(origin[2]) +
                                  ") exceeds volume " + to_string(d));
    Array<T> out(size, v.channels());
    for (std::size_t c = 0; c < v.channels(); ++c)
        for (std::size_t z = 0; z < size.nz; ++z)
            for (std::size_t y = 0; y < size.ny; ++y) {
                const T* src = &v(origin[0], origin[1] + y, origin[2] + z, c);
                std::copy(src, src + size.nx, &out(0, y, z, c));
            }
    return out;
}

template Array<float> extract_patch(const Array<float>&, Index3, Dims);
template Array<std::uint8_t> extract_patch(const Array<std::uint8_t>&, Index3, Dims);
template Array<std::uint16_t> extract_patch(const Array<std::uint16_t>&, Index3, Dims);
template Array<std::uint32_t> extract_patch(const Array<std::uint32_t>&, Index3, Dims);

Volume extract_patch(const Volume& v, Index3 origin, Dims size) {
    return std::visit([&](const auto& a) { return Volume(extract_patch(a, origin, size)); }, v.array());
}

template <class T>
void insert_patch(Array<T>& v, const Array<T>& patch, Index3 origin) {
    const Dims d = v.dims();
    const Dims s = patch.dims();
    if (patch.channels() != v.channels()) throw ValidationError("patch channel count differs from volume");
    for (int a = 0; a < 3; ++a)
        if (origin[a] + s[a] > d[a]) throw ValidationError("patch exceeds volume bounds");
    for (std::size_t c = 0; c < v.channels(); ++c)
        for (std::size_t z = 0; z < s.nz; ++z)
            for (std::size_t y = 0; y < s.ny; ++y) {
                const T* src = &patch(0, y, z, c);
                std::copy(src, src + s.nx, &v(origin[0], origin[1] + y, origin[2] + z, c));
            }
}

template void insert_patch(Array<float>&, const Array<float>&, Index3);
template void insert_patch(Array<std::uint8_t>&, const Array<std::uint8_t>&, Index3);
template void insert_patch(Array<std::uint16_t>&, const Array<std::uint16_t>&, Index3);
template void insert_patch(Array<std::uint32_t>&, const Array<std::uint32_t>&, Index3);

Array<float> merge_tiles(const TileGrid& grid, const std::vector<Array<float>>& patches) {
    if (patches.size() != grid.origins.size())
        throw ValidationError("merge expects " + std::to_string(grid.origins.size()) + " patches, got " +
                              std::to_string(patches.size()));
    if (patches.empty()) throw ValidationError("merge needs at least one patch");
    const std::size_t channels = patches.front().channels();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (patches[i].dims() != grid.patch_dims || patches[i].channels() != channels)
            throw ValidationError("patch " + std::to_string(i) + " is " + to_string(patches[i].dims()) + "x" +
                                  std::to_string(patches[i].channels()) + ", expected " +
                                  to_string(grid.patch_dims) + "x" + std::to_string(channels));
    }

    const Dims pd = grid.patch_dims;
    std::vector<double> weight(pd.voxels());
    for (std::size_t z = 0; z < pd.nz; ++z)
        for (std::size_t y = 0; y < pd.ny; ++y)
            for (std::size_t x = 0; x < pd.nx; ++x) weight[linear_index(pd, x, y, z)] = tile_weight(grid, x, y, z);

    const Dims d = grid.volume_dims;
    std::vector<double> acc(d.voxels() * channels, 0.0), norm(d.voxels(), 0.0);
    for (std::size_t t = 0; t < patches.size(); ++t) {
        const Index3 o = grid.origins[t];
        for (int a = 0; a < 3; ++a)
            if (o[a] + pd[a] > d[a]) throw ValidationError("tile " + std::to_string(t) + " exceeds the volume");
        for (std::size_t z = 0; z < pd.nz; ++z)
            for (std::size_t y = 0; y < pd.ny; ++y)
                for (std::size_t x = 0; x < pd.nx; ++x) {
                    const double w = weight[linear_index(pd, x, y, z)];
                    const std::size_t dst = linear_index(d, o[0] + x, o[1] + y, o[2] + z);
                    norm[dst] += w;
                    for (std::size_t c = 0; c < channels; ++c)
                        acc[dst + c * d.voxels()] += w * patches[t](x, y, z, c);
                }
    }

    Array<float> out(d, channels);
    auto data = out.data();
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            if (norm[i] <= 0.0) throw ValidationError("tiles do not cover voxel " + std::to_string(i));
            data[c * d.voxels() + i] = static_cast<float>(acc[c * d.voxels() + i] / norm[i]);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

void write_manifest(const std::filesystem::path& path, const TileManifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const auto& g = m.grid;
    out << "# gradflow tile manifest v1\n";
    out << "volume " << g.volume_dims.nx << ' ' << g.volume_dims.ny << ' ' << g.volume_dims.nz << '\n';
    out << "patch " << g.patch_dims.nx << ' ' << g.patch_dims.ny << ' ' << g.patch_dims.nz << '\n';
    out << "overlap " << g.overlap.nx << ' ' << g.overlap.ny << ' ' << g.overlap.nz << '\n';
    for (const auto& t : m.tiles) {
        out << "tile " << t.index << ' ' << t.origin[0] << ' ' << t.origin[1] << ' ' << t.origin[2] << ' '
            << t.input.generic_string();
        if (!t.prediction.empty()) out << ' ' << t.prediction.generic_string();
        out << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

TileManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    TileManifest m;
    bool have_volume = false, have_patch = false, have_overlap = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        auto fail = [&](const std::string& why) {
            throw ValidationError("manifest '" + path.string() + "' line " + std::to_string(lineno) + ": " + why);
        };
        auto read_dims = [&](Dims& d) {
            if (!(ls >> d.nx >> d.ny >> d.nz)) fail("expected three integers after '" + key + "'");
        };
        if (key == "volume") {
            read_dims(m.grid.volume_dims);
            have_volume = true;
        } else if (key == "patch") {
            read_dims(m.grid.patch_dims);
            have_patch = true;
        } else if (key == "overlap") {
            read_dims(m.grid.overlap);
            have_overlap = true;
        } else if (key == "tile") {
            ManifestTile t;
            std::string input, prediction;
            if (!(ls >> t.index >> t.origin[0] >> t.origin[1] >> t.origin[2] >> input))
                fail("expected 'tile <index> <x> <y> <z> <input> [<prediction>]'");
            if (t.index != m.tiles.size()) fail("tile indices must be 0, 1, 2, ... in order");
            t.input = resolve(input);
            if (ls >> prediction) t.prediction = resolve(prediction);
            m.grid.origins.push_back(t.origin);
            m.tiles.push_back(std::move(t));
        } else {
            fail("unknown record '" + key + "'");
        }
    }
    if (!have_volume || !have_patch || !have_overlap)
        throw ValidationError("manifest '" + path.string() + "' is missing a volume, patch or overlap record");
    if (m.tiles.empty()) throw ValidationError("manifest '" + path.string() + "' lists no tiles");
    return m;
}

}  // namespace gradflow

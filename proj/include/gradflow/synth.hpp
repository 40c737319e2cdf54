#pragma once

#include "gradflow/volume.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace gradflow {

struct PhantomSpec {
    Dims dims{64, 64, 64};
    std::size_t cell_count = 50;
    std::uint64_t seed = 1;
    double min_seed_separation = 4.0;  ///< voxels
    std::size_t membrane_width = 1;    ///< voxels
    double noise_sigma = 0.1;
    std::size_t margin = 0;            ///< background border, voxels

    void validate() const;
};

struct Phantom {
    LabelVolume labels;
    Array<float> image;  ///< pseudo membrane stain in [0, 1]
    std::vector<std::array<double, 3>> seeds;
};

/// Portable random source: std::mt19937_64 (fully specified by the standard)
/// with explicit conversions, since the standard distributions are
/// implementation-defined.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Standard normal via Box-Muller (the cosine branch only).
    double normal();

private:
    std::mt19937_64 engine_;
};

/// Voronoi phantom: label = nearest seed (ties to the lower seed index), seeds
/// drawn uniformly with rejection until pairwise distance >= min_seed_separation.
[[nodiscard]] Phantom generate_phantom(const PhantomSpec& spec, unsigned threads = 0);

}  // namespace gradflow

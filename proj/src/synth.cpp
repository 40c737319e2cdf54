#include "gradflow/synth.hpp"

#include "gradflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace gradflow {

void PhantomSpec::validate() const {
    if (dims.voxels() == 0) throw ValidationError("phantom dims must be >= 1");
    if (cell_count < 1) throw ValidationError("cell_count must be >= 1");
    if (!(min_seed_separation >= 1.0)) throw ValidationError("min_seed_separation must be >= 1");
    if (membrane_width < 1) throw ValidationError("membrane_width must be >= 1");
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
    if (2 * margin >= dims.nx || 2 * margin >= dims.ny || 2 * margin >= dims.nz)
        throw ValidationError("margin leaves no interior");
}

double PortableRng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

std::vector<std::array<double, 3>> place_seeds(const PhantomSpec& spec, PortableRng& rng) {
    const double sep2 = spec.min_seed_separation * spec.min_seed_separation;
    const auto m = static_cast<double>(spec.margin);
    const std::array<double, 3> span{static_cast<double>(spec.dims.nx - 2 * spec.margin - 1),
                                     static_cast<double>(spec.dims.ny - 2 * spec.margin - 1),
                                     static_cast<double>(spec.dims.nz - 2 * spec.margin - 1)};
    const std::size_t max_attempts = 1000 * spec.cell_count + 10000;
    std::vector<std::array<double, 3>> seeds;
    std::size_t attempts = 0;
    while (seeds.size() < spec.cell_count) {
        if (++attempts > max_attempts) {
            throw ValidationError("cannot place " + std::to_string(spec.cell_count) + " seeds with separation " +
                                  std::to_string(spec.min_seed_separation) + " in " + to_string(spec.dims) +
                                  " after " + std::to_string(max_attempts) + " attempts");
        }
        const std::array<double, 3> p{m + rng.uniform() * span[0], m + rng.uniform() * span[1],
                                      m + rng.uniform() * span[2]};
        const bool ok = std::none_of(seeds.begin(), seeds.end(), [&](const auto& s) {
            const double dx = s[0] - p[0], dy = s[1] - p[1], dz = s[2] - p[2];
            return dx * dx + dy * dy + dz * dz < sep2;
        });
        if (ok) seeds.push_back(p);
    }
    return seeds;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec, unsigned threads) {
    spec.validate();
    PortableRng rng(spec.seed);
    Phantom ph;
    ph.seeds = place_seeds(spec, rng);
    const Dims d = spec.dims;
    ph.labels = LabelVolume(d);
    auto lab = ph.labels.data();

    const auto margin = static_cast<long>(spec.margin);
    auto interior = [&](const Index3& p) {
        for (int a = 0; a < 3; ++a) {
            const auto c = static_cast<long>(p[a]);
            if (c < margin || c >= static_cast<long>(d[a]) - margin) return false;
        }
        return true;
    };

    parallel_for(d.voxels(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Index3 p = voxel_coords(d, i);
            if (!interior(p)) continue;
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t label = 0;
            for (std::size_t s = 0; s < ph.seeds.size(); ++s) {
                const double dx = ph.seeds[s][0] - static_cast<double>(p[0]);
                const double dy = ph.seeds[s][1] - static_cast<double>(p[1]);
                const double dz = ph.seeds[s][2] - static_cast<double>(p[2]);
                const double dist = dx * dx + dy * dy + dz * dz;
                if (dist < best) {
                    best = dist;
                    label = static_cast<std::uint32_t>(s + 1);
                }
            }
            lab[i] = label;
        }
    });

    // Membrane: any 6-neighbour with a different label, grown by
    // membrane_width - 1 further 6-neighbour dilations.
    Array<std::uint8_t> membrane(d, 1, 0);
    auto mem = membrane.data();
    for (std::size_t i = 0; i < lab.size(); ++i) {
        if (lab[i] == 0) continue;
        const Index3 p = voxel_coords(d, i);
        const long x = static_cast<long>(p[0]), y = static_cast<long>(p[1]), z = static_cast<long>(p[2]);
        const std::array<std::array<long, 3>, 6> nb{{{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                                     {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}}};
        for (const auto& q : nb) {
            if (!d.contains(q[0], q[1], q[2])) continue;
            if (lab[linear_index(d, static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]),
                                 static_cast<std::size_t>(q[2]))] != lab[i]) {
                mem[i] = 1;
                break;
            }
        }
    }
    for (std::size_t w = 1; w < spec.membrane_width; ++w) {
        Array<std::uint8_t> grown = membrane;
        auto g = grown.data();
        for (std::size_t i = 0; i < mem.size(); ++i) {
            if (!mem[i]) continue;
            const Index3 p = voxel_coords(d, i);
            for (int a = 0; a < 3; ++a)
                for (int s : {-1, 1}) {
                    auto q = p;
                    const long c = static_cast<long>(q[a]) + s;
                    if (c < 0 || c >= static_cast<long>(d[a])) continue;
                    q[a] = static_cast<std::size_t>(c);
                    const std::size_t j = linear_index(d, q[0], q[1], q[2]);
                    if (lab[j] != 0) g[j] = 1;
                }
        }
        membrane = std::move(grown);
        mem = membrane.data();
    }

    Array<float> raw(d, 1, 0.0f);
    auto r = raw.data();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = lab[i] == 0 ? 0.0f : (mem[i] ? 1.0f : 0.1f);

    // 3x3x3 mean over in-bounds neighbours, then noise in raster order.
    ph.image = Array<float>(d, 1, 0.0f);
    auto img = ph.image.data();
    for (std::size_t i = 0; i < img.size(); ++i) {
        const Index3 p = voxel_coords(d, i);
        double sum = 0;
        int n = 0;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const long x = static_cast<long>(p[0]) + dx;
                    const long y = static_cast<long>(p[1]) + dy;
                    const long z = static_cast<long>(p[2]) + dz;
                    if (!d.contains(x, y, z)) continue;
                    sum += r[linear_index(d, static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                          static_cast<std::size_t>(z))];
                    ++n;
                }
        const double noisy = sum / n + (spec.noise_sigma > 0 ? spec.noise_sigma * rng.normal() : 0.0);
        img[i] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    return ph;
}

}  // namespace gradflow

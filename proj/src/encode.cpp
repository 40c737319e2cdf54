#include "gradflow/encode.hpp"

#include "gradflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace gradflow {

std::string_view encoding_name(EncodingKind k) noexcept {
    return k == EncodingKind::Tanh ? "tanh" : "heat";
}

EncodingKind parse_encoding(std::string_view s) {
    if (s == "tanh") return EncodingKind::Tanh;
    if (s == "heat") return EncodingKind::HeatDiffusion;
    throw ValidationError("unknown encoding '" + std::string(s) + "' (expected tanh or heat)");
}

void EncodeParams::validate() const {
    if (!(alpha > 0.0)) throw ValidationError("alpha must be > 0");
    if (!(n_diff_factor >= 1.0)) throw ValidationError("n_diff_factor must be >= 1");
}

ForegroundMap encode_foreground(const LabelVolume& labels) {
    ForegroundMap fg(labels.dims());
    auto in = labels.data();
    auto out = fg.data();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? 1.0f : 0.0f;
    return fg;
}

// ---------------------------------------------------------------------------
// tanh
// ---------------------------------------------------------------------------

GradientField encode_tanh(const LabelVolume& labels, const EncodeParams& params, unsigned threads) {
    params.validate();
    const Dims d = labels.dims();
    GradientField field(d);
    const auto lab = labels.data();

    for (int axis = 0; axis < 3; ++axis) {
        const std::size_t len = d[axis];
        const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? d.nx : d.nx * d.ny);
        // Lines are enumerated by the index of their first voxel.
        const std::size_t lines = d.voxels() / len;
        auto line_start = [&](std::size_t l) -> std::size_t {
            switch (axis) {
                case 0: return l * d.nx;
                case 1: return (l / d.nx) * d.nx * d.ny + l % d.nx;
                default: return l;
            }
        };
        auto out = field.channel(static_cast<std::size_t>(axis));

        parallel_for(lines, threads, [&](std::size_t begin, std::size_t end) {
            for (std::size_t l = begin; l < end; ++l) {
                const std::size_t base = line_start(l);
                std::size_t lo = 0;
                while (lo < len) {
                    const std::uint32_t v = lab[base + lo * stride];
                    std::size_t hi = lo;
                    while (hi + 1 < len && lab[base + (hi + 1) * stride] == v) ++hi;
                    if (v != 0) {
                        const double mid = 0.5 * static_cast<double>(lo + hi);
                        const double half = std::max(0.5 * static_cast<double>(hi - lo), 1.0);
                        for (std::size_t p = lo; p <= hi; ++p) {
                            out[base + p * stride] = static_cast<float>(
                                std::tanh(params.alpha * (mid - static_cast<double>(p)) / half));
                        }
                    }
                    lo = hi + 1;
                }
            }
        });
    }
    return field;
}

// ---------------------------------------------------------------------------
// heat diffusion
// ---------------------------------------------------------------------------

namespace {

struct Cell {
    std::vector<std::size_t> voxels;  // ascending linear index
    Index3 lo{std::numeric_limits<std::size_t>::max(), std::numeric_limits<std::size_t>::max(),
              std::numeric_limits<std::size_t>::max()};
    Index3 hi{0, 0, 0};
};

std::vector<Cell> collect_cells(const LabelVolume& labels) {
    std::map<std::uint32_t, std::size_t> ids;
    std::vector<Cell> cells;
    const Dims d = labels.dims();
    const auto lab = labels.data();
    for (std::size_t i = 0; i < lab.size(); ++i) {
        if (lab[i] == 0) continue;
        auto [it, inserted] = ids.try_emplace(lab[i], cells.size());
        if (inserted) cells.emplace_back();
        Cell& c = cells[it->second];
        c.voxels.push_back(i);
        const Index3 p = voxel_coords(d, i);
        for (int a = 0; a < 3; ++a) {
            c.lo[a] = std::min(c.lo[a], p[a]);
            c.hi[a] = std::max(c.hi[a], p[a]);
        }
    }
    return cells;
}

void diffuse_cell(const Cell& cell, const Dims& d, const EncodeParams& params, GradientField& field) {
    const std::size_t n = cell.voxels.size();
    const std::size_t bx = cell.hi[0] - cell.lo[0] + 1;
    const std::size_t by = cell.hi[1] - cell.lo[1] + 1;
    const std::size_t bz = cell.hi[2] - cell.lo[2] + 1;

    std::vector<std::int32_t> local(bx * by * bz, -1);
    std::vector<Index3> coords(n);
    double cx = 0, cy = 0, cz = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const Index3 p = voxel_coords(d, cell.voxels[k]);
        coords[k] = {p[0] - cell.lo[0], p[1] - cell.lo[1], p[2] - cell.lo[2]};
        local[(coords[k][2] * by + coords[k][1]) * bx + coords[k][0]] = static_cast<std::int32_t>(k);
        cx += static_cast<double>(p[0]);
        cy += static_cast<double>(p[1]);
        cz += static_cast<double>(p[2]);
    }
    cx = cx / static_cast<double>(n) - static_cast<double>(cell.lo[0]);
    cy = cy / static_cast<double>(n) - static_cast<double>(cell.lo[1]);
    cz = cz / static_cast<double>(n) - static_cast<double>(cell.lo[2]);

    // Nearest in-mask voxel to the centroid; strict < keeps the lowest index on ties.
    std::size_t source = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double dx = static_cast<double>(coords[k][0]) - cx;
        const double dy = static_cast<double>(coords[k][1]) - cy;
        const double dz = static_cast<double>(coords[k][2]) - cz;
        const double dist = dx * dx + dy * dy + dz * dz;
        if (dist < best) {
            best = dist;
            source = k;
        }
    }

    // Neighbour slots: -x, +x, -y, +y, -z, +z.
    std::vector<std::array<std::int32_t, 6>> nb(n);
    auto at = [&](long x, long y, long z) -> std::int32_t {
        if (x < 0 || y < 0 || z < 0 || x >= static_cast<long>(bx) || y >= static_cast<long>(by) ||
            z >= static_cast<long>(bz))
            return -1;
        return local[(static_cast<std::size_t>(z) * by + static_cast<std::size_t>(y)) * bx +
                     static_cast<std::size_t>(x)];
    };
    for (std::size_t k = 0; k < n; ++k) {
        const long x = static_cast<long>(coords[k][0]);
        const long y = static_cast<long>(coords[k][1]);
        const long z = static_cast<long>(coords[k][2]);
        nb[k] = {at(x - 1, y, z), at(x + 1, y, z), at(x, y - 1, z), at(x, y + 1, z), at(x, y, z - 1), at(x, y, z + 1)};
    }

    const std::size_t extent = std::max({bx, by, bz});
    const auto iterations = static_cast<std::size_t>(std::ceil(params.n_diff_factor * static_cast<double>(extent)));

    std::vector<double> heat(n, 0.0), next(n, 0.0);
    for (std::size_t it = 0; it < iterations; ++it) {
        heat[source] += 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            double sum = heat[k];
            int count = 1;
            for (std::int32_t j : nb[k]) {
                if (j >= 0) {
                    sum += heat[static_cast<std::size_t>(j)];
                    ++count;
                }
            }
            next[k] = sum / count;
        }
        heat.swap(next);
    }
    if (params.use_log_heat)
        for (double& h : heat) h = std::log1p(h);

    auto gx = field.channel(0);
    auto gy = field.channel(1);
    auto gz = field.channel(2);
    for (std::size_t k = 0; k < n; ++k) {
        std::array<double, 3> r{};
        for (int a = 0; a < 3; ++a) {
            const std::int32_t minus = nb[k][2 * a];
            const std::int32_t plus = nb[k][2 * a + 1];
            const double fm = minus >= 0 ? heat[static_cast<std::size_t>(minus)] : heat[k];
            const double fp = plus >= 0 ? heat[static_cast<std::size_t>(plus)] : heat[k];
            r[a] = fp - fm;
        }
        const double norm = std::max(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]), 1e-12);
        const std::size_t i = cell.voxels[k];
        gx[i] = static_cast<float>(r[0] / norm);
        gy[i] = static_cast<float>(r[1] / norm);
        gz[i] = static_cast<float>(r[2] / norm);
    }
}

}  // namespace

GradientField encode_heat(const LabelVolume& labels, const EncodeParams& params, unsigned threads) {
    params.validate();
    GradientField field(labels.dims());
    const auto cells = collect_cells(labels);
    parallel_for(cells.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) diffuse_cell(cells[c], labels.dims(), params, field);
    });
    return field;
}

GradientField encode_gradients(const LabelVolume& labels, EncodingKind kind, const EncodeParams& params,
                               unsigned threads) {
    return kind == EncodingKind::Tanh ? encode_tanh(labels, params, threads)
                                      : encode_heat(labels, params, threads);
}

}  // namespace gradflow

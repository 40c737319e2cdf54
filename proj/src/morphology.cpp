#include "gradflow/morphology.hpp"

#include <cmath>
#include <limits>

namespace gradflow {

namespace {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();

// 1D squared distance transform of a sampled function (Felzenszwalb &
// Huttenlocher). `f` is read with stride, `out` written with stride.
void edt_1d(const std::int64_t* f, std::int64_t* out, std::size_t n, std::size_t stride,
            std::vector<std::size_t>& v, std::vector<double>& z) {
    v.resize(n);
    z.resize(n + 1);
    std::size_t k = 0;
    std::size_t first = n;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q * stride] != kInf) {
            first = q;
            break;
        }
    }
    if (first == n) {
        for (std::size_t q = 0; q < n; ++q) out[q * stride] = kInf;
        return;
    }
    auto fv = [&](std::size_t q) { return static_cast<double>(f[q * stride]); };
    v[0] = first;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (std::size_t q = first + 1; q < n; ++q) {
        if (f[q * stride] == kInf) continue;
        const auto dq = static_cast<double>(q);
        auto intersect = [&](std::size_t p) {
            const auto dp = static_cast<double>(p);
            return ((fv(q) + dq * dq) - (fv(p) + dp * dp)) / (2.0 * (dq - dp));
        };
        double s = intersect(v[k]);
        // z[0] is -inf, so this stops at k == 0.
        while (s <= z[k]) {
            --k;
            s = intersect(v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const auto dq = static_cast<std::int64_t>(q) - static_cast<std::int64_t>(v[k]);
        out[q * stride] = f[v[k] * stride] + dq * dq;
    }
}

}  // namespace

std::vector<std::int64_t> squared_distance_transform(const Mask& mask, std::uint8_t feature) {
    const Dims d = mask.dims();
    const auto m = mask.data();
    std::vector<std::int64_t> a(d.voxels()), b(d.voxels());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = (m[i] != 0) == (feature != 0) ? 0 : kInf;

    std::vector<std::size_t> v;
    std::vector<double> z;
    // x
    for (std::size_t zz = 0; zz < d.nz; ++zz)
        for (std::size_t y = 0; y < d.ny; ++y) {
            const std::size_t base = linear_index(d, 0, y, zz);
            edt_1d(a.data() + base, b.data() + base, d.nx, 1, v, z);
        }
    // y
    for (std::size_t zz = 0; zz < d.nz; ++zz)
        for (std::size_t x = 0; x < d.nx; ++x) {
            const std::size_t base = linear_index(d, x, 0, zz);
            edt_1d(b.data() + base, a.data() + base, d.ny, d.nx, v, z);
        }
    // z
    for (std::size_t y = 0; y < d.ny; ++y)
        for (std::size_t x = 0; x < d.nx; ++x) {
            const std::size_t base = linear_index(d, x, y, 0);
            edt_1d(a.data() + base, b.data() + base, d.nz, d.nx * d.ny, v, z);
        }
    return b;
}

std::vector<std::array<int, 3>> ball_offsets(int radius) {
    std::vector<std::array<int, 3>> out;
    const double limit = (radius + 0.5) * (radius + 0.5);
    for (int z = -radius; z <= radius; ++z)
        for (int y = -radius; y <= radius; ++y)
            for (int x = -radius; x <= radius; ++x)
                if (x * x + y * y + z * z <= limit) out.push_back({x, y, z});
    return out;
}

Mask close_ball(const Mask& mask, int radius) {
    if (radius < 0) throw ValidationError("closing radius must be >= 0");
    if (radius == 0) return mask;
    // |o|^2 <= (r + 0.5)^2 for integer |o|^2 is |o|^2 <= r^2 + r.
    const std::int64_t reach = static_cast<std::int64_t>(radius) * radius + radius;

    const auto to_sink = squared_distance_transform(mask, 1);
    Mask dilated(mask.dims(), 1);
    auto dd = dilated.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] = to_sink[i] <= reach ? 1 : 0;

    const auto to_gap = squared_distance_transform(dilated, 0);
    Mask closed(mask.dims(), 1);
    auto cd = closed.data();
    const auto src = mask.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = (dd[i] && to_gap[i] > reach) || src[i] ? 1 : 0;
    return closed;
}

LabelVolume label_components(const Mask& mask, int connectivity, std::uint32_t* count) {
    if (connectivity != 6 && connectivity != 26) throw ValidationError("connectivity must be 6 or 26");
    const Dims d = mask.dims();
    std::vector<std::array<int, 3>> nbrs;
    for (int z = -1; z <= 1; ++z)
        for (int y = -1; y <= 1; ++y)
            for (int x = -1; x <= 1; ++x) {
                const int manhattan = std::abs(x) + std::abs(y) + std::abs(z);
                if (manhattan == 0) continue;
                if (connectivity == 6 && manhattan != 1) continue;
                nbrs.push_back({x, y, z});
            }

    LabelVolume out(d);
    auto lab = out.data();
    const auto m = mask.data();
    std::uint32_t next = 0;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < m.size(); ++start) {
        if (!m[start] || lab[start]) continue;
        lab[start] = ++next;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            const Index3 p = voxel_coords(d, i);
            for (const auto& o : nbrs) {
                const long x = static_cast<long>(p[0]) + o[0];
                const long y = static_cast<long>(p[1]) + o[1];
                const long z = static_cast<long>(p[2]) + o[2];
                if (!d.contains(x, y, z)) continue;
                const std::size_t j = linear_index(d, static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                                   static_cast<std::size_t>(z));
                if (m[j] && !lab[j]) {
                    lab[j] = next;
                    stack.push_back(j);
                }
            }
        }
    }
    if (count) *count = next;
    return out;
}

}  // namespace gradflow

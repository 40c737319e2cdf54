#include "gradflow/encode.hpp"
#include "gradflow/eval.hpp"
#include "gradflow/reconstruct.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace gradflow;

namespace {

LabelVolume line_labels(std::size_t n, std::size_t lo, std::size_t hi, std::uint32_t id = 1) {
    LabelVolume lab(Dims{n, 1, 1});
    for (std::size_t x = lo; x <= hi; ++x) lab(x, 0, 0) = id;
    return lab;
}

// Brute-force tanh encoding: for each voxel walk outwards along each axis to
// find the extent of its run.
GradientField tanh_oracle(const LabelVolume& lab, double alpha) {
    const Dims d = lab.dims();
    GradientField g(d);
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const std::uint32_t v = lab(x, y, z);
                if (v == 0) continue;
                for (int a = 0; a < 3; ++a) {
                    long p[3] = {static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)};
                    const long pos = p[a];
                    long lo = pos, hi = pos;
                    for (;;) {
                        p[a] = lo - 1;
                        if (lo == 0 || lab(p[0], p[1], p[2]) != v) break;
                        --lo;
                    }
                    for (;;) {
                        p[a] = hi + 1;
                        if (hi + 1 >= static_cast<long>(d[a]) || lab(p[0], p[1], p[2]) != v) break;
                        ++hi;
                    }
                    const double m = (lo + hi) / 2.0;
                    const double half = std::max((hi - lo) / 2.0, 1.0);
                    g(x, y, z, a) = static_cast<float>(std::tanh(alpha * (m - pos) / half));
                }
            }
    return g;
}

// Dense-grid heat diffusion: one full-volume pass per iteration, every label
// diffused simultaneously with neighbours restricted to the same label.
GradientField heat_oracle(const LabelVolume& lab, double factor, bool use_log) {
    const Dims d = lab.dims();
    struct Acc {
        double sx = 0, sy = 0, sz = 0, n = 0;
        long lo[3] = {1 << 30, 1 << 30, 1 << 30}, hi[3] = {-1, -1, -1};
    };
    std::map<std::uint32_t, Acc> acc;
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x)
                if (auto v = lab(x, y, z)) {
                    auto& a = acc[v];
                    a.sx += x, a.sy += y, a.sz += z, a.n += 1;
                    const long p[3] = {static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)};
                    for (int k = 0; k < 3; ++k) a.lo[k] = std::min(a.lo[k], p[k]), a.hi[k] = std::max(a.hi[k], p[k]);
                }
    std::map<std::uint32_t, std::size_t> source, iters;
    for (auto& [v, a] : acc) {
        double best = 1e300;
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            if (lab.data()[i] != v) continue;
            const auto p = voxel_coords(d, i);
            const double dd = std::pow(p[0] - a.sx / a.n, 2) + std::pow(p[1] - a.sy / a.n, 2) +
                              std::pow(p[2] - a.sz / a.n, 2);
            if (dd < best) best = dd, source[v] = i;
        }
        long ext = 0;
        for (int k = 0; k < 3; ++k) ext = std::max(ext, a.hi[k] - a.lo[k] + 1);
        iters[v] = static_cast<std::size_t>(std::ceil(factor * ext));
    }

    auto same = [&](long x, long y, long z, std::uint32_t v) {
        return d.contains(x, y, z) && lab(x, y, z) == v;
    };
    const long off[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    std::vector<double> h(d.voxels(), 0.0);
    std::size_t max_iter = 0;
    for (auto& [v, n] : iters) max_iter = std::max(max_iter, n);
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (auto& [v, s] : source)
            if (it < iters[v]) h[s] += 1.0;
        std::vector<double> nh = h;
        for (std::size_t z = 0; z < d.nz; ++z)
            for (std::size_t y = 0; y < d.ny; ++y)
                for (std::size_t x = 0; x < d.nx; ++x) {
                    const auto v = lab(x, y, z);
                    if (v == 0 || it >= iters[v]) continue;
                    double sum = h[linear_index(d, x, y, z)];
                    int cnt = 1;
                    for (auto& o : off) {
                        const long nx = static_cast<long>(x) + o[0], ny = static_cast<long>(y) + o[1],
                                   nz = static_cast<long>(z) + o[2];
                        if (same(nx, ny, nz, v)) sum += h[linear_index(d, nx, ny, nz)], ++cnt;
                    }
                    nh[linear_index(d, x, y, z)] = sum / cnt;
                }
        h = nh;
    }
    if (use_log)
        for (double& x : h) x = std::log1p(x);

    GradientField g(d);
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const auto v = lab(x, y, z);
                if (v == 0) continue;
                const double here = h[linear_index(d, x, y, z)];
                double r[3];
                for (int a = 0; a < 3; ++a) {
                    const long* m = off[2 * a];
                    const long* p = off[2 * a + 1];
                    const long mx = x + m[0], my = y + m[1], mz = z + m[2];
                    const long px = x + p[0], py = y + p[1], pz = z + p[2];
                    const double fm = same(mx, my, mz, v) ? h[linear_index(d, mx, my, mz)] : here;
                    const double fp = same(px, py, pz, v) ? h[linear_index(d, px, py, pz)] : here;
                    r[a] = fp - fm;
                }
                const double norm = std::max(std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]), 1e-12);
                for (int a = 0; a < 3; ++a) g(x, y, z, a) = static_cast<float>(r[a] / norm);
            }
    return g;
}

double max_abs_diff(const Array<float>& a, const Array<float>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

LabelVolume convex_shapes() {
    // A sphere and two boxes, separated by background.
    LabelVolume lab(Dims{40, 24, 24});
    const Dims d = lab.dims();
    for (std::size_t z = 0; z < d.nz; ++z)
        for (std::size_t y = 0; y < d.ny; ++y)
            for (std::size_t x = 0; x < d.nx; ++x) {
                const double dx = x - 11.0, dy = y - 11.0, dz = z - 11.0;
                if (dx * dx + dy * dy + dz * dz <= 64.0) lab(x, y, z) = 1;
                if (x >= 24 && x < 36 && y >= 4 && y < 11 && z >= 3 && z < 8) lab(x, y, z) = 2;
                if (x >= 24 && x < 34 && y >= 13 && y < 23 && z >= 12 && z < 22) lab(x, y, z) = 3;
            }
    return lab;
}

}  // namespace

TEST_CASE("foreground encoding") {
    LabelVolume lab(Dims{2, 2, 1});
    lab(0, 0, 0) = 0;
    lab(1, 0, 0) = 3;
    lab(0, 1, 0) = 3;
    lab(1, 1, 0) = 7;
    const auto fg = encode_foreground(lab);
    CHECK(fg(0, 0, 0) == 0.0f);
    CHECK(fg(1, 0, 0) == 1.0f);
    CHECK(fg(0, 1, 0) == 1.0f);
    CHECK(fg(1, 1, 0) == 1.0f);
}

TEST_CASE("tanh encoding on a single 10-voxel run") {
    const auto g = encode_tanh(line_labels(10, 0, 9), EncodeParams{});
    CHECK(g(0, 0, 0, 0) == doctest::Approx(0.99505).epsilon(1e-5));
    CHECK(g(9, 0, 0, 0) == doctest::Approx(-0.99505).epsilon(1e-5));
    for (std::size_t x = 0; x < 10; ++x) {
        CHECK(g(x, 0, 0, 0) == doctest::Approx(-g(9 - x, 0, 0, 0)));  // odd symmetry
        if (x > 0) CHECK(g(x, 0, 0, 0) < g(x - 1, 0, 0, 0));
        // Length-1 runs along y and z.
        CHECK(g(x, 0, 0, 1) == 0.0f);
        CHECK(g(x, 0, 0, 2) == 0.0f);
    }

    const auto odd = encode_tanh(line_labels(9, 0, 8), EncodeParams{});
    CHECK(odd(4, 0, 0, 0) == 0.0f);

    const auto single = encode_tanh(line_labels(5, 2, 2), EncodeParams{});
    for (int a = 0; a < 3; ++a) CHECK(single(2, 0, 0, a) == 0.0f);
    CHECK(single(0, 0, 0, 0) == 0.0f);
}

TEST_CASE("tanh encoding matches a brute-force run search") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto lab = test::random_runs(Dims{11, 7, 5}, 4, seed);
        for (double alpha : {1.0, 3.0}) {
            EncodeParams p;
            p.alpha = alpha;
            CHECK(max_abs_diff(encode_tanh(lab, p, 2), tanh_oracle(lab, alpha)) <= 1e-6);
        }
    }
}

TEST_CASE("tanh encoding is translation equivariant when cells stay inside the volume") {
    const auto lab = test::random_runs(Dims{9, 8, 7}, 3, 11);
    auto embed = [&](Dims d, std::size_t ox, std::size_t oy, std::size_t oz) {
        LabelVolume out(d);
        for (std::size_t z = 0; z < 7; ++z)
            for (std::size_t y = 0; y < 8; ++y)
                for (std::size_t x = 0; x < 9; ++x) out(x + ox, y + oy, z + oz) = lab(x, y, z);
        return out;
    };
    const auto a = embed(Dims{11, 10, 9}, 1, 1, 1);
    const auto b = embed(Dims{14, 12, 11}, 3, 2, 3);
    const auto ga = encode_tanh(a, EncodeParams{});
    const auto gb = encode_tanh(b, EncodeParams{});
    for (std::size_t z = 0; z < 7; ++z)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 0; x < 9; ++x)
                for (int c = 0; c < 3; ++c) {
                    CHECK(ga(x + 1, y + 1, z + 1, c) == gb(x + 3, y + 2, z + 3, c));
                    CHECK(std::abs(ga(x + 1, y + 1, z + 1, c)) <= 1.0f);
                }
    for (std::size_t i = 0; i < a.data().size(); ++i)
        if (a.data()[i] == 0)
            for (int c = 0; c < 3; ++c) CHECK(ga.channel(c)[i] == 0.0f);
}

TEST_CASE("tanh encoding is independent of the thread count") {
    const auto lab = test::random_runs(Dims{23, 17, 13}, 9, 5);
    CHECK(encode_tanh(lab, EncodeParams{}, 1) == encode_tanh(lab, EncodeParams{}, 4));
}

TEST_CASE("heat encoding on small runs") {
    const auto single = encode_heat(line_labels(5, 2, 2), EncodeParams{});
    for (int a = 0; a < 3; ++a) CHECK(single(2, 0, 0, a) == 0.0f);

    // Symmetric about the source. The two end voxels average over fewer
    // samples, keep more heat than the source after 6 iterations
    // (2.633 vs 2.490) and so point outward.
    const auto three = encode_heat(line_labels(3, 0, 2), EncodeParams{});
    CHECK(three(1, 0, 0, 0) == 0.0f);
    CHECK(three(0, 0, 0, 0) == -three(2, 0, 0, 0));
    CHECK(three(0, 0, 0, 0) == doctest::Approx(-1.0));
    CHECK(max_abs_diff(three, heat_oracle(line_labels(3, 0, 2), 2.0, true)) == 0.0);

    // Source at x=2 (the centroid); every other voxel points toward it.
    const auto five = encode_heat(line_labels(7, 0, 4), EncodeParams{});
    CHECK(five(0, 0, 0, 0) > 0.0f);
    CHECK(five(1, 0, 0, 0) > 0.0f);
    CHECK(five(3, 0, 0, 0) < 0.0f);
    CHECK(five(4, 0, 0, 0) < 0.0f);
    CHECK(five(5, 0, 0, 0) == 0.0f);
}

TEST_CASE("heat encoding matches a dense-grid diffusion") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto lab = test::random_runs(Dims{9, 7, 6}, 3, seed);
        for (bool use_log : {true, false}) {
            EncodeParams p;
            p.use_log_heat = use_log;
            CHECK(max_abs_diff(encode_heat(lab, p, 2), heat_oracle(lab, p.n_diff_factor, use_log)) <= 1e-6);
        }
    }
    const auto shapes = convex_shapes();
    CHECK(max_abs_diff(encode_heat(shapes, EncodeParams{}), heat_oracle(shapes, 2.0, true)) <= 1e-6);
}

TEST_CASE("heat gradients of convex cells point toward the source") {
    const auto lab = convex_shapes();
    const Dims d = lab.dims();
    for (bool use_log : {true, false}) {
        EncodeParams p;
        p.use_log_heat = use_log;
        const auto g = encode_heat(lab, p);
        std::map<std::uint32_t, std::array<double, 4>> sum;
        for (std::size_t i = 0; i < d.voxels(); ++i)
            if (auto v = lab.data()[i]) {
                const auto q = voxel_coords(d, i);
                auto& s = sum[v];
                for (int a = 0; a < 3; ++a) s[a] += q[a];
                s[3] += 1;
            }
        std::map<std::uint32_t, Index3> src;
        std::map<std::uint32_t, double> best;
        for (std::size_t i = 0; i < d.voxels(); ++i)
            if (auto v = lab.data()[i]) {
                const auto q = voxel_coords(d, i);
                double dd = 0;
                for (int a = 0; a < 3; ++a) dd += std::pow(q[a] - sum[v][a] / sum[v][3], 2);
                if (!best.count(v) || dd < best[v]) best[v] = dd, src[v] = q;
            }
        std::size_t bad = 0;
        for (std::size_t i = 0; i < d.voxels(); ++i)
            if (auto v = lab.data()[i]) {
                const auto q = voxel_coords(d, i);
                if (q == src[v]) continue;
                double dot = 0;
                for (int a = 0; a < 3; ++a) dot += g.channel(a)[i] * (double(src[v][a]) - double(q[a]));
                bad += !(dot > 0);
            }
        CHECK(bad == 0u);
    }
}

TEST_CASE("isolated convex cells reconstruct as single instances") {
    const auto lab = convex_shapes();
    for (auto kind : {EncodingKind::Tanh, EncodingKind::HeatDiffusion}) {
        CAPTURE(encoding_name(kind));
        const auto field = encode_gradients(lab, kind, EncodeParams{});
        auto sinks = trace(field, encode_foreground(lab), ReconstructionParams{});
        const auto cand = label_sinks(sinks, ReconstructionParams{});
        for (const auto& r : match_and_dice(lab, cand))
            CHECK(static_cast<double>(r.intersection) / r.gt_size >= 0.95);
    }
}

TEST_CASE("encoding parameters are validated") {
    EncodeParams p;
    p.alpha = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = {};
    p.n_diff_factor = 0.5;
    CHECK_THROWS_AS((void)encode_heat(line_labels(3, 0, 2), p), ValidationError);
    CHECK(parse_encoding("heat") == EncodingKind::HeatDiffusion);
    CHECK_THROWS_AS((void)parse_encoding("sdf"), ValidationError);
}

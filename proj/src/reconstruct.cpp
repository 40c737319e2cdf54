#include "gradflow/reconstruct.hpp"

#include "gradflow/morphology.hpp"
#include "gradflow/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <unordered_map>

namespace gradflow {

void ReconstructionParams::validate() const {
    if (s_recon < 1) throw ValidationError("s_recon must be >= 1");
    if (n_recon < 1) throw ValidationError("n_recon must be >= 1");
    if (r_closing < 0) throw ValidationError("r_closing must be >= 0");
    if (!(fg_threshold > 0.0 && fg_threshold < 1.0)) throw ValidationError("fg_threshold must be in (0, 1)");
    if (connectivity != 6 && connectivity != 26) throw ValidationError("connectivity must be 6 or 26");
}

void FilterParams::validate() const {
    if (!(r_min >= 0.0 && r_min < r_max)) throw ValidationError("filter radii must satisfy 0 <= r_min < r_max");
    if (!(p_overlap >= 0.0 && p_overlap <= 1.0)) throw ValidationError("p_overlap must be in [0, 1]");
    if (!(err_gradient >= 0.0)) throw ValidationError("err_gradient must be >= 0");
}

std::string_view fate_name(Fate f) noexcept {
    switch (f) {
        case Fate::Kept:       return "kept";
        case Fate::TooSmall:   return "too_small";
        case Fate::TooLarge:   return "too_large";
        case Fate::LowOverlap: return "low_overlap";
        case Fate::FlowError:  return "flow_error";
    }
    return "unknown";
}

namespace {

inline std::size_t round_coord(double p) { return static_cast<std::size_t>(std::floor(p + 0.5)); }

void require_same_dims(const Dims& a, const Dims& b, const char* what) {
    if (a != b)
        throw ValidationError(std::string("dimension mismatch between ") + what + ": " + to_string(a) + " vs " +
                              to_string(b));
}

}  // namespace

SinkAssignment trace(const GradientField& field, const ForegroundMap& fg, const ReconstructionParams& params,
                     unsigned threads) {
    params.validate();
    require_same_dims(field.dims(), fg.dims(), "gradient field and foreground");
    const Dims d = field.dims();

    SinkAssignment out;
    out.dims = d;
    const auto prob = fg.data();
    const auto threshold = static_cast<float>(params.fg_threshold);
    for (std::size_t i = 0; i < prob.size(); ++i)
        if (prob[i] >= threshold) out.voxels.push_back(i);
    out.positions.resize(out.voxels.size());

    // Interleave so one step costs one fetch.
    std::vector<std::array<float, 3>> g(d.voxels());
    for (int a = 0; a < 3; ++a) {
        auto ch = field.channel(static_cast<std::size_t>(a));
        for (std::size_t i = 0; i < ch.size(); ++i) g[i][a] = ch[i];
    }

    const double scale = params.s_recon;
    const std::array<double, 3> upper{static_cast<double>(d.nx - 1), static_cast<double>(d.ny - 1),
                                      static_cast<double>(d.nz - 1)};
    parallel_for(out.voxels.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const Index3 v = voxel_coords(d, out.voxels[k]);
            std::array<double, 3> p{static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2])};
            for (int t = 0; t < params.n_recon; ++t) {
                const auto& step = g[linear_index(d, round_coord(p[0]), round_coord(p[1]), round_coord(p[2]))];
                for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a] + step[a] * scale, 0.0, upper[a]);
            }
            out.positions[k] = p;
        }
    });
    return out;
}

LabelVolume label_sinks(SinkAssignment& assignment, const ReconstructionParams& params) {
    params.validate();
    const Dims d = assignment.dims;
    LabelVolume out(d);
    assignment.labels.assign(assignment.voxels.size(), 0);
    if (assignment.voxels.empty()) return out;

    std::vector<std::size_t> sink(assignment.voxels.size());
    Mask sinks(d, 1);
    for (std::size_t k = 0; k < sink.size(); ++k) {
        const auto& p = assignment.positions[k];
        sink[k] = linear_index(d, round_coord(p[0]), round_coord(p[1]), round_coord(p[2]));
        sinks.data()[sink[k]] = 1;
    }

    const LabelVolume components = label_components(close_ball(sinks, params.r_closing), params.connectivity);
    const auto comp = components.data();
    auto lab = out.data();
    for (std::size_t k = 0; k < sink.size(); ++k) {
        assignment.labels[k] = comp[sink[k]];
        lab[assignment.voxels[k]] = comp[sink[k]];
    }
    return out;
}

FilterResult filter_instances(const LabelVolume& candidates, const ForegroundMap& fg, const GradientField& predicted,
                              const FilterParams& fparams, const EncodeParams& eparams, double fg_threshold,
                              unsigned threads) {
    fparams.validate();
    require_same_dims(candidates.dims(), fg.dims(), "candidates and foreground");
    require_same_dims(candidates.dims(), predicted.dims(), "candidates and predicted field");

    const auto lab = candidates.data();
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<std::uint32_t> ids;
    for (std::uint32_t v : lab)
        if (v != 0 && slot.find(v) == slot.end()) {
            slot.emplace(v, 0);
            ids.push_back(v);
        }
    std::sort(ids.begin(), ids.end());
    for (std::size_t s = 0; s < ids.size(); ++s) slot[ids[s]] = s;

    const GradientField recomputed = encode_gradients(candidates, fparams.encoding, eparams, threads);

    std::vector<std::size_t> volume(ids.size(), 0), in_fg(ids.size(), 0);
    std::vector<double> abs_err(ids.size(), 0.0);
    const auto prob = fg.data();
    const auto threshold = static_cast<float>(fg_threshold);
    std::vector<std::size_t> voxel_slot(lab.size(), SIZE_MAX);
    for (std::size_t i = 0; i < lab.size(); ++i) {
        if (lab[i] == 0) continue;
        const std::size_t s = slot[lab[i]];
        voxel_slot[i] = s;
        ++volume[s];
        if (prob[i] >= threshold) ++in_fg[s];
    }
    for (std::size_t c = 0; c < 3; ++c) {
        const auto a = recomputed.channel(c);
        const auto b = predicted.channel(c);
        for (std::size_t i = 0; i < lab.size(); ++i)
            if (voxel_slot[i] != SIZE_MAX)
                abs_err[voxel_slot[i]] += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    }

    FilterResult result;
    result.report.resize(ids.size());
    std::vector<std::size_t> survivors;
    for (std::size_t s = 0; s < ids.size(); ++s) {
        auto& r = result.report[s];
        r.id = ids[s];
        r.voxels = volume[s];
        const auto v = static_cast<double>(volume[s]);
        r.equivalent_radius = std::cbrt(3.0 * v / (4.0 * std::numbers::pi));
        r.overlap = static_cast<double>(in_fg[s]) / v;
        r.flow_error = abs_err[s] / (3.0 * v);
        if (r.equivalent_radius < fparams.r_min)
            r.fate = Fate::TooSmall;
        else if (r.equivalent_radius > fparams.r_max)
            r.fate = Fate::TooLarge;
        else if (r.overlap < fparams.p_overlap)
            r.fate = Fate::LowOverlap;
        else if (r.flow_error > fparams.err_gradient)
            r.fate = Fate::FlowError;
        else
            survivors.push_back(s);
    }

    std::stable_sort(survivors.begin(), survivors.end(),
                     [&](std::size_t a, std::size_t b) { return volume[a] > volume[b]; });
    std::vector<std::uint32_t> remap(ids.size(), 0);
    for (std::size_t k = 0; k < survivors.size(); ++k) {
        remap[survivors[k]] = static_cast<std::uint32_t>(k + 1);
        result.report[survivors[k]].new_id = static_cast<std::uint32_t>(k + 1);
    }

    result.labels = LabelVolume(candidates.dims());
    auto out = result.labels.data();
    for (std::size_t i = 0; i < lab.size(); ++i)
        if (voxel_slot[i] != SIZE_MAX) out[i] = remap[voxel_slot[i]];
    return result;
}

FilterResult reconstruct_pipeline(const GradientField& field, const ForegroundMap& fg,
                                  const ReconstructionParams& rparams, const FilterParams& fparams,
                                  const EncodeParams& eparams, unsigned threads) {
    rparams.validate();
    fparams.validate();
    eparams.validate();
    SinkAssignment sinks = trace(field, fg, rparams, threads);
    const LabelVolume candidates = label_sinks(sinks, rparams);
    return filter_instances(candidates, fg, field, fparams, eparams, rparams.fg_threshold, threads);
}

void write_disposition_table(std::ostream& os, const std::vector<InstanceDisposition>& report) {
    os << "id\tvoxels\tr_eq\toverlap\tmae\tfate\tnew_id\n";
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::fixed << std::setprecision(6);
    for (const auto& r : report) {
        os << r.id << '\t' << r.voxels << '\t' << r.equivalent_radius << '\t' << r.overlap << '\t' << r.flow_error
           << '\t' << fate_name(r.fate) << '\t' << r.new_id << '\n';
    }
    os.flags(flags);
    os.precision(precision);
}

}  // namespace gradflow

#pragma once

#include "gradflow/encode.hpp"
#include "gradflow/volume.hpp"

#include <array>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace gradflow {

struct ReconstructionParams {
    int s_recon = 4;            ///< step scale; a voxel moves g * s_recon per iteration
    int n_recon = 100;          ///< tracing iterations
    int r_closing = 3;          ///< closing ball radius in voxels
    double fg_threshold = 0.5;  ///< voxels with fg >= threshold are traced
    int connectivity = 26;      ///< 6 or 26, for sink components

    void validate() const;
};

struct FilterParams {
    double r_min = 5.0;  ///< equivalent-sphere radius bounds, voxels
    double r_max = 100.0;
    double p_overlap = 0.2;
    double err_gradient = 0.8;  ///< max mean absolute flow error
    EncodingKind encoding = EncodingKind::Tanh;

    void validate() const;
};

/// Traced foreground voxels and where they ended up.
struct SinkAssignment {
    Dims dims{};
    std::vector<std::size_t> voxels;                 ///< linear indices, ascending
    std::vector<std::array<double, 3>> positions;    ///< final (x, y, z), inside the volume
    std::vector<std::uint32_t> labels;               ///< filled by label_sinks
};

/// Moves every voxel with fg >= fg_threshold along the field for n_recon
/// steps: p <- clamp(p + g(round(p)) * s_recon). Rounding is half-up.
[[nodiscard]] SinkAssignment trace(const GradientField& field, const ForegroundMap& fg,
                                   const ReconstructionParams& params, unsigned threads = 0);

/// Closes the mask of rounded sink positions with a ball of radius r_closing,
/// labels its connected components and gives each traced voxel the label of
/// the component its sink falls in. Also stores those labels in `assignment`.
LabelVolume label_sinks(SinkAssignment& assignment, const ReconstructionParams& params);

enum class Fate { Kept, TooSmall, TooLarge, LowOverlap, FlowError };

[[nodiscard]] std::string_view fate_name(Fate f) noexcept;

struct InstanceDisposition {
    std::uint32_t id = 0;      ///< label in the candidate volume
    std::uint32_t new_id = 0;  ///< label in the output, 0 if discarded
    std::size_t voxels = 0;
    double equivalent_radius = 0;  ///< (3V / 4pi)^(1/3)
    double overlap = 0;            ///< fraction of voxels with fg >= threshold
    double flow_error = 0;         ///< mean absolute error over 3 channels
    Fate fate = Fate::Kept;
};

struct FilterResult {
    LabelVolume labels;
    std::vector<InstanceDisposition> report;  ///< ascending by original id
};

/// Applies the size, foreground-overlap and flow-error filters (in that order;
/// the first failing one is recorded) and relabels survivors 1..K by
/// decreasing size, ties by original id.
[[nodiscard]] FilterResult filter_instances(const LabelVolume& candidates, const ForegroundMap& fg,
                                            const GradientField& predicted, const FilterParams& fparams,
                                            const EncodeParams& eparams, double fg_threshold = 0.5,
                                            unsigned threads = 0);

/// trace -> label_sinks -> filter_instances.
[[nodiscard]] FilterResult reconstruct_pipeline(const GradientField& field, const ForegroundMap& fg,
                                                const ReconstructionParams& rparams, const FilterParams& fparams,
                                                const EncodeParams& eparams, unsigned threads = 0);

/// Plain-text table, one row per candidate instance.
void write_disposition_table(std::ostream& os, const std::vector<InstanceDisposition>& report);

}  // namespace gradflow

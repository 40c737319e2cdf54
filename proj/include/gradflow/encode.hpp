#pragma once

#include "gradflow/volume.hpp"

#include <string_view>

namespace gradflow {

enum class EncodingKind { HeatDiffusion, Tanh };

[[nodiscard]] std::string_view encoding_name(EncodingKind k) noexcept;
/// Accepts "tanh" or "heat".
[[nodiscard]] EncodingKind parse_encoding(std::string_view s);

struct EncodeParams {
    double alpha = 3.0;          ///< tanh steepness; boundary voxels reach tanh(alpha)
    double n_diff_factor = 2.0;  ///< heat iterations = factor * max bounding-box extent
    bool use_log_heat = true;    ///< differentiate log(1 + H) instead of H

    /// Throws ValidationError if alpha <= 0 or n_diff_factor < 1.
    void validate() const;
};

/// 1.0 where label > 0, else 0.0.
[[nodiscard]] ForegroundMap encode_foreground(const LabelVolume& labels);

/// Per-axis tanh of the signed distance to the midpoint of the voxel's
/// same-label run, relative to the run half-width:
///   g_a = tanh(alpha * (m - p) / max((hi - lo) / 2, 1)).
[[nodiscard]] GradientField encode_tanh(const LabelVolume& labels, const EncodeParams& params,
                                        unsigned threads = 0);

/// Normalized central differences of a diffusion simulation sourced at the
/// in-mask voxel nearest each cell's centroid. Every cell is simulated on its
/// own mask with a 6-neighbour mean filter.
[[nodiscard]] GradientField encode_heat(const LabelVolume& labels, const EncodeParams& params,
                                        unsigned threads = 0);

[[nodiscard]] GradientField encode_gradients(const LabelVolume& labels, EncodingKind kind,
                                             const EncodeParams& params, unsigned threads = 0);

}  // namespace gradflow

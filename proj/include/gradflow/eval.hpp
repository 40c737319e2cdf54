#pragma once

#include "gradflow/volume.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace gradflow {

struct InstanceReport {
    std::uint32_t gt_id = 0;
    std::optional<std::uint32_t> pred_id;  ///< none when nothing overlaps
    std::size_t gt_size = 0;
    std::size_t pred_size = 0;
    std::size_t intersection = 0;
    double dice = 0.0;
};

struct ScoreSummary {
    double mean = 0, median = 0, q1 = 0, q3 = 0, p5 = 0, p95 = 0;
    std::size_t count = 0;
};

/// For each ground-truth instance, the prediction with the largest overlap
/// (ties to the lower id) and its Dice coefficient. Only annotated voxels
/// (gt > 0) count toward overlaps; unmatched instances score 0. Sorted by gt id.
[[nodiscard]] std::vector<InstanceReport> match_and_dice(const LabelVolume& gt, const LabelVolume& pred);

/// Percentile with linear interpolation between closest ranks:
/// position q * (n - 1) in the sorted sample.
[[nodiscard]] double percentile(std::span<const double> sorted, double q);

/// Throws ValidationError on an empty report list.
[[nodiscard]] ScoreSummary summarize(const std::vector<InstanceReport>& reports);
[[nodiscard]] ScoreSummary summarize(std::vector<double> values);

/// Fraction of reports with a matched prediction.
[[nodiscard]] double matched_fraction(const std::vector<InstanceReport>& reports);

void write_report_csv(std::ostream& os, const std::vector<InstanceReport>& reports);
/// "key = value" lines.
void write_summary(std::ostream& os, const ScoreSummary& s);

}  // namespace gradflow

#include "gradflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>

namespace gradflow {

std::vector<InstanceReport> match_and_dice(const LabelVolume& gt, const LabelVolume& pred) {
    if (gt.dims() != pred.dims())
        throw ValidationError("dimension mismatch between ground truth " + to_string(gt.dims()) +
                              " and prediction " + to_string(pred.dims()));
    const auto g = gt.data();
    const auto p = pred.data();

    std::map<std::uint32_t, std::size_t> gt_size, pred_size;
    // (gt, pred) -> overlap; ordered so iteration visits pred ids ascending.
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> overlap;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (p[i] != 0) ++pred_size[p[i]];
        if (g[i] == 0) continue;
        ++gt_size[g[i]];
        if (p[i] != 0) ++overlap[{g[i], p[i]}];
    }

    std::vector<InstanceReport> out;
    out.reserve(gt_size.size());
    for (const auto& [id, size] : gt_size) {
        InstanceReport r;
        r.gt_id = id;
        r.gt_size = size;
        for (auto it = overlap.lower_bound({id, 0}); it != overlap.end() && it->first.first == id; ++it) {
            if (it->second > r.intersection) {
                r.intersection = it->second;
                r.pred_id = it->first.second;
            }
        }
        if (r.pred_id) {
            r.pred_size = pred_size[*r.pred_id];
            r.dice = 2.0 * static_cast<double>(r.intersection) / static_cast<double>(r.gt_size + r.pred_size);
        }
        out.push_back(r);
    }
    return out;
}

double percentile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ValidationError("percentile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

ScoreSummary summarize(std::vector<double> values) {
    if (values.empty()) throw ValidationError("cannot summarize an empty report list");
    std::sort(values.begin(), values.end());
    ScoreSummary s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.p5 = percentile(values, 0.05);
    s.q1 = percentile(values, 0.25);
    s.median = percentile(values, 0.5);
    s.q3 = percentile(values, 0.75);
    s.p95 = percentile(values, 0.95);
    return s;
}

ScoreSummary summarize(const std::vector<InstanceReport>& reports) {
    std::vector<double> dice;
    dice.reserve(reports.size());
    for (const auto& r : reports) dice.push_back(r.dice);
    return summarize(std::move(dice));
}

double matched_fraction(const std::vector<InstanceReport>& reports) {
    if (reports.empty()) return 0.0;
    const auto n = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.pred_id.has_value(); });
    return static_cast<double>(n) / static_cast<double>(reports.size());
}

void write_report_csv(std::ostream& os, const std::vector<InstanceReport>& reports) {
    os << "gt_id,pred_id,gt_size,pred_size,intersection,dice\n";
    for (const auto& r : reports) {
        os << r.gt_id << ',';
        if (r.pred_id) os << *r.pred_id;
        os << ',' << r.gt_size << ',' << r.pred_size << ',' << r.intersection << ',' << std::setprecision(9)
           << r.dice << '\n';
    }
}

void write_summary(std::ostream& os, const ScoreSummary& s) {
    os << std::setprecision(9);
    os << "count = " << s.count << '\n'
       << "mean = " << s.mean << '\n'
       << "median = " << s.median << '\n'
       << "q1 = " << s.q1 << '\n'
       << "q3 = " << s.q3 << '\n'
       << "p5 = " << s.p5 << '\n'
       << "p95 = " << s.p95 << '\n';
}

}  // namespace gradflow

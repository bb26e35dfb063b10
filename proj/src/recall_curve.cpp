#include "threshcal/recall_curve.hpp"

#include <algorithm>
#include <fstream>

#include "csv_detail.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

RecallCurve empirical_recall_curve(const ScoreDataset& dataset) {
  std::vector<double> pass_scores = dataset.scores(Label::PASS);
  if (pass_scores.empty()) raise(Errc::NoPositives, "no PASS records");
  std::sort(pass_scores.begin(), pass_scores.end());

  std::vector<double> thresholds = dataset.scores();
  thresholds.push_back(0.0);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RecallCurve curve;
  curve.positives_total = pass_scores.size();
  const double npos = static_cast<double>(pass_scores.size());
  curve.points.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto it = std::lower_bound(pass_scores.begin(), pass_scores.end(), t);
    const double hits = static_cast<double>(pass_scores.end() - it);
    curve.points.push_back({t, hits / npos});
  }
  return curve;
}

double recall_threshold(const ScoreDataset& dataset, double target) {
  if (!(target > 0.0 && target <= 1.0)) {
    raise(Errc::OutOfRange, "recall target must lie in (0,1]");
  }
  const RecallCurve curve = empirical_recall_curve(dataset);
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    if (it->recall >= target) return it->threshold;
  }
  return 0.0;  // unreachable: recall at threshold 0 is 1
}

double recall_at(const ScoreDataset& dataset, double threshold) {
  std::size_t pass_total = 0, pass_hits = 0;
  for (const auto& r : dataset.records) {
    if (r.label != Label::PASS) continue;
    ++pass_total;
    if (r.score >= threshold) ++pass_hits;
  }
  if (pass_total == 0) raise(Errc::NoPositives, "no PASS records");
  return static_cast<double>(pass_hits) / static_cast<double>(pass_total);
}

void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "threshold,recall\n";
  for (const auto& p : curve.points) {
    out << detail::format_double(p.threshold) << ',' << detail::format_double(p.recall)
        << '\n';
  }
}

}  // namespace threshcal

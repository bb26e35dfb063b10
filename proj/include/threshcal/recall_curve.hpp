#pragma once

#include <filesystem>
#include <vector>

#include "threshcal/dataset.hpp"

namespace threshcal {

// Recall over candidate thresholds: the unique scores in ascending order,
// with 0 prepended. A record passes when score >= threshold.
struct RecallPoint {
  double threshold = 0.0;
  double recall = 0.0;
};

struct RecallCurve {
  std::vector<RecallPoint> points;  // thresholds strictly increasing
  std::size_t positives_total = 0;
};

RecallCurve empirical_recall_curve(const ScoreDataset& dataset);

// Largest candidate threshold whose recall still meets the target; 0 always
// qualifies, so the result is well defined for any target in (0, 1].
double recall_threshold(const ScoreDataset& dataset, double target);

// Recall of the PASS class at an arbitrary threshold.
double recall_at(const ScoreDataset& dataset, double threshold);

// Columns: threshold, recall.
void write_recall_csv(const RecallCurve& curve, const std::filesystem::path& path);

}  // namespace threshcal

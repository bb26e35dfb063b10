#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "threshcal/dataset.hpp"

namespace threshcal {

// Classification rule everywhere: value >= threshold predicts PASS.
// Values may be raw scores or calibrated probabilities.

struct RocPoint {
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // thresholds descending, +inf sentinel first
  double auc = 0.0;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // thresholds ascending
  double average_precision = 0.0;
};

RocCurve roc_curve(std::span<const double> values, std::span<const Label> labels);

PrCurve pr_curve(std::span<const double> values, std::span<const Label> labels);

// Smallest threshold whose false positive rate stays within the budget.
// The +inf sentinel (reject everything) always qualifies.
double threshold_at_fpr(const RocCurve& curve, double max_fpr);

struct RecallSelection {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Largest threshold with recall >= target, with the achieved operating point.
RecallSelection threshold_at_recall(std::span<const double> values,
                                    std::span<const Label> labels, double target_recall);

// Maximizer of J = tpr - fpr; ties break toward the larger threshold.
double youden_threshold(const RocCurve& curve);

// Columns: threshold, tpr, fpr / threshold, precision, recall.
void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
void write_pr_csv(const PrCurve& curve, const std::filesystem::path& path);

}  // namespace threshcal

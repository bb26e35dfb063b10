#pragma once

#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "threshcal/classifiers.hpp"
#include "threshcal/dataset.hpp"

namespace threshcal {

// Split conformal prediction over a calibrated classifier. The conformity
// score of a holdout record is 1 minus the probability the classifier
// assigns to its true label.
struct ConformalCalibrator {
  CalibratedClassifier classifier;
  std::vector<double> conformity;  // sorted ascending
  std::size_t n_calib = 0;
};

ConformalCalibrator calibrate(CalibratedClassifier classifier, const ScoreDataset& holdout);

// The ceil((n+1)(1-alpha))-th smallest conformity value, or +inf when that
// rank exceeds n (prediction sets then contain both labels).
double conformal_quantile(const ConformalCalibrator& calibrator, double alpha);

struct PredictionSet {
  bool contains_pass = false;
  bool contains_fail = false;
  int width() const { return static_cast<int>(contains_pass) + static_cast<int>(contains_fail); }
};

// Label y enters the set iff its predicted probability is >= 1 - q.
PredictionSet prediction_set(const ConformalCalibrator& calibrator, double q, double score);

struct ConformalEvaluation {
  double alpha = 0.0;
  double coverage = 0.0;
  double avg_width = 0.0;
  double empty_fraction = 0.0;
  double threshold_score = 0.0;
};

ConformalEvaluation evaluate(const ConformalCalibrator& calibrator, double q,
                             const ScoreDataset& test, double alpha,
                             double grid_step = 1e-3);

// Coverage / width / empty fraction only (no score threshold); used when a
// threshold may not exist.
ConformalEvaluation evaluate_sets(const ConformalCalibrator& calibrator, double q,
                                  const ScoreDataset& test, double alpha);

// Smallest grid point x* with PASS in the prediction set at every grid
// point >= x* (suffix rule); 0 when PASS is everywhere. When PASS inclusion
// holds only on an interior region, the start of its last contiguous run is
// returned.
double conformal_score_threshold(const ConformalCalibrator& calibrator, double q,
                                 double grid_step = 1e-3);

// Rows: library, confidence, threshold, coverage, width.
void write_evaluations_csv(const std::filesystem::path& path, const std::string& library,
                           std::span<const std::pair<double, ConformalEvaluation>> rows);

}  // namespace threshcal

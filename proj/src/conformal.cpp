#include "threshcal/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "csv_detail.hpp"
#include "threshcal/density.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

ConformalCalibrator calibrate(CalibratedClassifier classifier, const ScoreDataset& holdout) {
  if (holdout.records.empty()) raise(Errc::EmptyCalibration, "empty calibration set");
  ConformalCalibrator cal;
  cal.classifier = std::move(classifier);
  cal.conformity.reserve(holdout.size());
  for (const auto& r : holdout.records) {
    // 1 - mu(x)_y: the PASS branch is 1 - p, the FAIL branch 1 - (1 - p) = p.
    const double p_pass = predict_prob(cal.classifier, r.score);
    cal.conformity.push_back(r.label == Label::PASS ? 1.0 - p_pass : p_pass);
  }
  std::sort(cal.conformity.begin(), cal.conformity.end());
  cal.n_calib = cal.conformity.size();
  return cal;
}

double conformal_quantile(const ConformalCalibrator& calibrator, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) raise(Errc::OutOfRange, "alpha must lie in (0,1)");
  const std::size_t n = calibrator.n_calib;
  // ceil with a slack well under any legitimate fractional part, so that
  // representation error in (n+1)(1-alpha) cannot bump the rank.
  const double raw = (static_cast<double>(n) + 1.0) * (1.0 - alpha);
  const auto rank = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  if (rank > n) return std::numeric_limits<double>::infinity();
  return calibrator.conformity[rank - 1];
}

PredictionSet prediction_set(const ConformalCalibrator& calibrator, double q, double score) {
  const double p_pass = predict_prob(calibrator.classifier, score);
  PredictionSet set;
  set.contains_pass = p_pass >= 1.0 - q;
  set.contains_fail = 1.0 - p_pass >= 1.0 - q;
  return set;
}

ConformalEvaluation evaluate_sets(const ConformalCalibrator& calibrator, double q,
                                  const ScoreDataset& test, double alpha) {
  if (test.records.empty()) raise(Errc::EmptyTest, "empty test set");
  ConformalEvaluation ev;
  ev.alpha = alpha;
  std::size_t covered = 0, width_sum = 0, empty = 0;
  for (const auto& r : test.records) {
    const PredictionSet set = prediction_set(calibrator, q, r.score);
    const bool in_set = r.label == Label::PASS ? set.contains_pass : set.contains_fail;
    covered += in_set;
    width_sum += set.width();
    empty += set.width() == 0;
  }
  const double n = static_cast<double>(test.size());
  ev.coverage = static_cast<double>(covered) / n;
  ev.avg_width = static_cast<double>(width_sum) / n;
  ev.empty_fraction = static_cast<double>(empty) / n;
  return ev;
}

ConformalEvaluation evaluate(const ConformalCalibrator& calibrator, double q,
                             const ScoreDataset& test, double alpha, double grid_step) {
  ConformalEvaluation ev = evaluate_sets(calibrator, q, test, alpha);
  ev.threshold_score = conformal_score_threshold(calibrator, q, grid_step);
  return ev;
}

double conformal_score_threshold(const ConformalCalibrator& calibrator, double q,
                                 double grid_step) {
  const auto xs = unit_grid(grid_step);
  std::vector<bool> pass_in(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    pass_in[i] = prediction_set(calibrator, q, xs[i]).contains_pass;
  }
  if (std::none_of(pass_in.begin(), pass_in.end(), [](bool b) { return b; })) {
    raise(Errc::PassNeverIncluded, "PASS enters no prediction set on the grid");
  }
  std::size_t start = xs.size();
  while (start > 0 && pass_in[start - 1]) --start;
  if (start < xs.size()) return xs[start];
  // PASS inclusion holds somewhere but not on a suffix; return the start of
  // the last contiguous inclusion run.
  std::size_t end = xs.size();
  while (end > 0 && !pass_in[end - 1]) --end;
  std::size_t begin = end;
  while (begin > 0 && pass_in[begin - 1]) --begin;
  return xs[begin];
}

void write_evaluations_csv(const std::filesystem::path& path, const std::string& library,
                           std::span<const std::pair<double, ConformalEvaluation>> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "library,confidence,threshold,coverage,width\n";
  for (const auto& [level, ev] : rows) {
    out << detail::csv_escape(library) << ',' << detail::format_double(level) << ','
        << detail::format_double(ev.threshold_score) << ','
        << detail::format_double(ev.coverage) << ',' << detail::format_double(ev.avg_width)
        << '\n';
  }
}

}  // namespace threshcal

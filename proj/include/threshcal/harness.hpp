#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "threshcal/dataset.hpp"

namespace threshcal {

enum class Method { ZSCORE, HIST_MIN, KDE, EMP_RECALL, PR_CURVE, ROC_FPR, YOUDEN, CONFORMAL };

enum class ClassifierKind { NONE, LOGISTIC, POLYNOMIAL, GAM };

// A method plus the classifier backing it (pr, roc-fpr and conformal run on
// calibrated probabilities; the rest work on raw scores).
struct MethodSpec {
  Method method = Method::EMP_RECALL;
  ClassifierKind classifier = ClassifierKind::NONE;

  std::string method_name() const;
  std::string classifier_name() const;  // "" when none
  std::string name() const;             // e.g. "conformal:gam"

  // Accepts "kde", "emp-recall", "pr:gam", "conformal:lr", ...
  static MethodSpec parse(const std::string& token);

  bool operator==(const MethodSpec&) const = default;
};

// Confidence-level semantics differ per method: ZSCORE interval confidence,
// KDE posterior floor, EMP_RECALL / PR_CURVE recall target, ROC_FPR
// max FPR = 1 - level, CONFORMAL coverage 1 - alpha. HIST_MIN ignores the
// level. YOUDEN ignores it too (the J maximizer is level-free).
struct RunConfig {
  std::vector<MethodSpec> methods;
  std::vector<double> confidence_levels = {0.80, 0.90, 0.95, 0.975, 0.99};
  int k_folds = 5;
  std::uint64_t seed = 0;
  int poly_degree = 3;
  int gam_knots = 10;
  std::optional<double> gam_lambda;  // nullopt selects lambda by cross-validation
  double ridge_lambda = 1e-6;
  double grid_step = 1e-3;
  int histogram_bins = 50;
  double conformal_calib_fraction = 0.5;
  int threads = 1;

  // Sorts/dedupes levels and validates every field.
  void normalize_and_validate();

  static std::vector<MethodSpec> default_methods();
};

struct ReportRow {
  std::string method;
  std::string classifier;
  double confidence = 0.0;
  int fold = 0;
  double threshold = 0.0;
  std::string metric_name;
  double metric_value = 0.0;
  bool failed = false;
  std::string failure_reason;

  bool operator==(const ReportRow&) const = default;
};

struct ReportAggregate {
  std::string method;
  std::string classifier;
  double confidence = 0.0;
  std::string metric_name;
  double threshold_mean = 0.0;
  double threshold_std = 0.0;
  double metric_mean = 0.0;
  double metric_std = 0.0;
  int folds = 0;

  bool operator==(const ReportAggregate&) const = default;
};

struct ThresholdReport {
  std::vector<ReportRow> rows;
  std::vector<ReportAggregate> aggregates;

  bool operator==(const ThresholdReport&) const = default;
};

// Recomputes aggregates from rows (mean and sample standard deviation over
// folds, grouped by method/classifier/confidence/metric).
std::vector<ReportAggregate> aggregate_rows(const std::vector<ReportRow>& rows);

// Per fold, thresholds come from the training portion only (conformal
// additionally splits it into fit and calibration halves); metrics are
// evaluated on the test fold. A method failing on one fold is recorded as
// threshold 0 with the failure reason, not a fatal error.
ThresholdReport run(const RunConfig& config, const ScoreDataset& dataset);

enum class ReportFormat { CSV, JSON };

void export_report(const ThresholdReport& report, ReportFormat format,
                   const std::filesystem::path& path);
ThresholdReport import_report_json(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const ThresholdReport& report);
void from_json(const nlohmann::json& j, ThresholdReport& report);

// CSV series for the standard diagnostic plots, one file per figure:
//   fig1 conditional histograms, fig2 ROC/PR curves, fig3 histogram valley,
//   fig4 class densities and posterior, fig5 empirical recall,
//   fig6 thresholds vs risk level, fig7 conformal coverage/width sweep,
//   fig8 conformity histogram with quantile markers.
void export_plot_data(const ScoreDataset& dataset, const RunConfig& config,
                      const std::filesystem::path& out_dir);

}  // namespace threshcal

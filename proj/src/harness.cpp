#include "threshcal/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include "csv_detail.hpp"
#include "threshcal/classifiers.hpp"
#include "threshcal/conformal.hpp"
#include "threshcal/density.hpp"
#include "threshcal/errors.hpp"
#include "threshcal/recall_curve.hpp"
#include "threshcal/rng.hpp"
#include "threshcal/roc.hpp"
#include "threshcal/zscore.hpp"

namespace threshcal {

using nlohmann::json;

std::string MethodSpec::method_name() const {
  switch (method) {
    case Method::ZSCORE: return "zscore";
    case Method::HIST_MIN: return "hist-min";
    case Method::KDE: return "kde";
    case Method::EMP_RECALL: return "emp-recall";
    case Method::PR_CURVE: return "pr";
    case Method::ROC_FPR: return "roc-fpr";
    case Method::YOUDEN: return "youden";
    case Method::CONFORMAL: return "conformal";
  }
  return "?";
}

std::string MethodSpec::classifier_name() const {
  switch (classifier) {
    case ClassifierKind::NONE: return "";
    case ClassifierKind::LOGISTIC: return "lr";
    case ClassifierKind::POLYNOMIAL: return "poly";
    case ClassifierKind::GAM: return "gam";
  }
  return "";
}

std::string MethodSpec::name() const {
  const std::string c = classifier_name();
  return c.empty() ? method_name() : method_name() + ":" + c;
}

MethodSpec MethodSpec::parse(const std::string& token) {
  std::string base = token, clf;
  if (const auto pos = token.find(':'); pos != std::string::npos) {
    base = token.substr(0, pos);
    clf = token.substr(pos + 1);
  }
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  base = lower(base);
  clf = lower(clf);

  MethodSpec spec;
  if (base == "zscore") spec.method = Method::ZSCORE;
  else if (base == "hist-min" || base == "hist_min" || base == "histmin") spec.method = Method::HIST_MIN;
  else if (base == "kde") spec.method = Method::KDE;
  else if (base == "emp-recall" || base == "emp_recall" || base == "recall") spec.method = Method::EMP_RECALL;
  else if (base == "pr" || base == "pr-curve" || base == "pr_curve") spec.method = Method::PR_CURVE;
  else if (base == "roc-fpr" || base == "roc_fpr" || base == "roc") spec.method = Method::ROC_FPR;
  else if (base == "youden") spec.method = Method::YOUDEN;
  else if (base == "conformal") spec.method = Method::CONFORMAL;
  else raise(Errc::UnknownMethod, "unknown method '" + token + "'");

  const bool takes_classifier = spec.method == Method::PR_CURVE ||
                                spec.method == Method::ROC_FPR ||
                                spec.method == Method::CONFORMAL;
  if (!takes_classifier) {
    if (!clf.empty()) {
      raise(Errc::ConfigInvalid, "method '" + base + "' takes no classifier suffix");
    }
    return spec;
  }
  if (clf.empty() || clf == "lr" || clf == "logistic" || clf == "standard") {
    spec.classifier = ClassifierKind::LOGISTIC;
  } else if (clf == "poly" || clf == "polynomial") {
    spec.classifier = ClassifierKind::POLYNOMIAL;
  } else if (clf == "gam") {
    spec.classifier = ClassifierKind::GAM;
  } else {
    raise(Errc::UnknownMethod, "unknown classifier '" + clf + "'");
  }
  return spec;
}

std::vector<MethodSpec> RunConfig::default_methods() {
  std::vector<MethodSpec> out;
  for (const char* t : {"kde", "emp-recall", "pr:lr", "pr:poly", "pr:gam", "conformal:lr",
                        "conformal:poly", "conformal:gam"}) {
    out.push_back(MethodSpec::parse(t));
  }
  return out;
}

void RunConfig::normalize_and_validate() {
  if (methods.empty()) raise(Errc::ConfigInvalid, "methods set is empty");
  std::sort(confidence_levels.begin(), confidence_levels.end());
  confidence_levels.erase(std::unique(confidence_levels.begin(), confidence_levels.end()),
                          confidence_levels.end());
  if (confidence_levels.empty()) raise(Errc::ConfigInvalid, "no confidence levels");
  for (double c : confidence_levels) {
    if (!(c > 0.0 && c < 1.0)) raise(Errc::ConfigInvalid, "confidence levels must lie in (0,1)");
  }
  if (k_folds < 2) raise(Errc::ConfigInvalid, "k_folds must be at least 2");
  if (poly_degree < 1 || poly_degree > 6) raise(Errc::ConfigInvalid, "poly_degree must be 1..6");
  if (gam_knots < 0 || gam_knots > 100) raise(Errc::ConfigInvalid, "gam_knots must be 0..100");
  if (gam_lambda && *gam_lambda < 0.0) raise(Errc::ConfigInvalid, "gam_lambda must be >= 0");
  if (ridge_lambda < 0.0) raise(Errc::ConfigInvalid, "ridge_lambda must be >= 0");
  if (!(grid_step > 0.0 && grid_step <= 0.5)) raise(Errc::ConfigInvalid, "grid_step must lie in (0,0.5]");
  if (histogram_bins < 3) raise(Errc::ConfigInvalid, "histogram_bins must be at least 3");
  if (!(conformal_calib_fraction > 0.0 && conformal_calib_fraction < 1.0)) {
    raise(Errc::ConfigInvalid, "conformal_calib_fraction must lie in (0,1)");
  }
  if (threads < 1) raise(Errc::ConfigInvalid, "threads must be at least 1");
}

namespace {

CalibratedClassifier fit_kind(ClassifierKind kind, const ScoreDataset& ds,
                              const RunConfig& cfg) {
  switch (kind) {
    case ClassifierKind::LOGISTIC:
      return fit_logistic(ds, FeatureMap::identity(), cfg.ridge_lambda);
    case ClassifierKind::POLYNOMIAL:
      return fit_logistic(ds, FeatureMap::polynomial(cfg.poly_degree), cfg.ridge_lambda);
    case ClassifierKind::GAM:
      return fit_gam(ds, cfg.gam_knots, cfg.gam_lambda);
    case ClassifierKind::NONE:
      break;
  }
  raise(Errc::ConfigInvalid, "method needs a classifier");
}

// Lazily computed per-fold resource; a failed attempt is remembered and
// rethrown for every cell that needs it.
template <typename T>
struct Cached {
  std::optional<T> value;
  std::optional<Error> error;
  bool attempted = false;
};

struct FoldContext {
  FoldContext(const RunConfig& c, int f) : cfg(c), fold(f) {}

  const RunConfig& cfg;
  int fold;
  ScoreDataset train;
  ScoreDataset test;
  std::vector<double> train_scores;
  std::vector<Label> train_labels;

  std::map<ClassifierKind, Cached<CalibratedClassifier>> platt;
  std::map<ClassifierKind, Cached<std::vector<double>>> train_probs;
  std::map<ClassifierKind, Cached<RocCurve>> prob_roc;
  std::map<ClassifierKind, Cached<ConformalCalibrator>> conformal;
  Cached<double> hist_threshold;
  Cached<PosteriorModel> posterior;
  Cached<RocCurve> raw_roc;

  const CalibratedClassifier& platt_for(ClassifierKind kind) {
    auto& slot = platt[kind];
    if (!slot.attempted) {
      slot.attempted = true;
      try {
        slot.value = fit_kind(kind, train, cfg);
      } catch (const Error& e) {
        slot.error = e;
      }
    }
    if (!slot.value) throw *slot.error;
    return *slot.value;
  }

  const std::vector<double>& probs_for(ClassifierKind kind) {
    auto& slot = train_probs[kind];
    if (!slot.value) {
      const auto& model = platt_for(kind);  // rethrows a remembered fit failure
      std::vector<double> p;
      p.reserve(train.size());
      for (const auto& r : train.records) p.push_back(predict_prob(model, r.score));
      slot.value = std::move(p);
    }
    return *slot.value;
  }

  const RocCurve& prob_roc_for(ClassifierKind kind) {
    auto& slot = prob_roc[kind];
    if (!slot.value) slot.value = roc_curve(probs_for(kind), train_labels);
    return *slot.value;
  }

  const ConformalCalibrator& conformal_for(ClassifierKind kind) {
    auto& slot = conformal[kind];
    if (!slot.attempted) {
      slot.attempted = true;
      try {
        auto [fit_part, calib_part] = split_holdout(
            train, cfg.conformal_calib_fraction,
            derive_seed(cfg.seed, 0xc0ULL + static_cast<std::uint64_t>(fold)), true);
        slot.value = calibrate(fit_kind(kind, fit_part, cfg), calib_part);
      } catch (const Error& e) {
        slot.error = e;
      }
    }
    if (!slot.value) throw *slot.error;
    return *slot.value;
  }
};

ReportRow base_row(const MethodSpec& spec, double level, int fold) {
  ReportRow row;
  row.method = spec.method_name();
  row.classifier = spec.classifier_name();
  row.confidence = level;
  row.fold = fold;
  return row;
}

std::vector<ReportRow> compute_cell(FoldContext& ctx, const MethodSpec& spec, double level) {
  const RunConfig& cfg = ctx.cfg;
  std::vector<ReportRow> rows;
  ReportRow row = base_row(spec, level, ctx.fold);
  try {
    switch (spec.method) {
      case Method::ZSCORE: {
        const ZInterval zi = z_interval(ctx.train_scores, level, IntervalMode::POPULATION);
        row.threshold = zi.lower;
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::HIST_MIN: {
        if (!ctx.hist_threshold.attempted) {
          ctx.hist_threshold.attempted = true;
          try {
            ctx.hist_threshold.value =
                histogram_local_min_threshold(ctx.train_scores, cfg.histogram_bins);
          } catch (const Error& e) {
            ctx.hist_threshold.error = e;
          }
        }
        if (!ctx.hist_threshold.value) throw *ctx.hist_threshold.error;
        row.threshold = *ctx.hist_threshold.value;
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::KDE: {
        if (!ctx.posterior.attempted) {
          ctx.posterior.attempted = true;
          try {
            ctx.posterior.value = fit_posterior(ctx.train);
          } catch (const Error& e) {
            ctx.posterior.error = e;
          }
        }
        if (!ctx.posterior.value) throw *ctx.posterior.error;
        row.threshold = kde_threshold(*ctx.posterior.value, level, cfg.grid_step);
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::EMP_RECALL: {
        row.threshold = recall_threshold(ctx.train, level);
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::PR_CURVE: {
        const auto& model = ctx.platt_for(spec.classifier);
        const RecallSelection sel =
            threshold_at_recall(ctx.probs_for(spec.classifier), ctx.train_labels, level);
        row.threshold =
            invert_probability_threshold(model, sel.threshold, cfg.grid_step).canonical_threshold;
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::ROC_FPR: {
        const auto& model = ctx.platt_for(spec.classifier);
        const double p_star = threshold_at_fpr(ctx.prob_roc_for(spec.classifier), 1.0 - level);
        if (!std::isfinite(p_star)) {
          throw Error(Errc::UnreachableProbability,
                      "FPR budget requires rejecting every record");
        }
        row.threshold =
            invert_probability_threshold(model, p_star, cfg.grid_step).canonical_threshold;
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::YOUDEN: {
        if (!ctx.raw_roc.value) {
          ctx.raw_roc.value = roc_curve(ctx.train_scores, ctx.train_labels);
        }
        const double t = youden_threshold(*ctx.raw_roc.value);
        if (!std::isfinite(t)) {
          throw Error(Errc::UnreachableProbability, "uninformative curve (J <= 0 everywhere)");
        }
        row.threshold = t;
        row.metric_name = "recall";
        row.metric_value = recall_at(ctx.test, row.threshold);
        rows.push_back(row);
        break;
      }
      case Method::CONFORMAL: {
        const auto& cal = ctx.conformal_for(spec.classifier);
        const double alpha = 1.0 - level;
        const double q = conformal_quantile(cal, alpha);
        ConformalEvaluation ev;
        try {
          ev = evaluate(cal, q, ctx.test, alpha, cfg.grid_step);
          row.threshold = ev.threshold_score;
        } catch (const Error& e) {
          ev = evaluate_sets(cal, q, ctx.test, alpha);
          row.threshold = 0.0;
          row.failed = true;
          row.failure_reason = e.what();
        }
        ReportRow width_row = row;
        row.metric_name = "coverage";
        row.metric_value = ev.coverage;
        width_row.metric_name = "width";
        width_row.metric_value = ev.avg_width;
        rows.push_back(row);
        rows.push_back(width_row);
        break;
      }
    }
  } catch (const Error& e) {
    // A method failing on one fold is data, not a crash: report threshold 0
    // with the reason. Recall at threshold 0 is still well defined.
    rows.clear();
    row.threshold = 0.0;
    row.failed = true;
    row.failure_reason = e.what();
    if (spec.method == Method::CONFORMAL) {
      ReportRow width_row = row;
      row.metric_name = "coverage";
      row.metric_value = 0.0;
      width_row.metric_name = "width";
      width_row.metric_value = 0.0;
      rows.push_back(row);
      rows.push_back(width_row);
    } else {
      row.metric_name = "recall";
      row.metric_value = recall_at(ctx.test, 0.0);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ReportRow> compute_fold(const RunConfig& cfg, const ScoreDataset& dataset,
                                    const FoldAssignment& folds, int fold) {
  FoldContext ctx{cfg, fold};
  std::tie(ctx.train, ctx.test) = fold_split(dataset, folds, fold);
  ctx.train_scores = ctx.train.scores();
  ctx.train_labels = ctx.train.labels();

  std::vector<ReportRow> rows;
  for (const MethodSpec& spec : cfg.methods) {
    for (double level : cfg.confidence_levels) {
      auto cell = compute_cell(ctx, spec, level);
      rows.insert(rows.end(), cell.begin(), cell.end());
    }
  }
  return rows;
}

bool row_order(const ReportRow& a, const ReportRow& b) {
  return std::tie(a.method, a.classifier, a.confidence, a.metric_name, a.fold) <
         std::tie(b.method, b.classifier, b.confidence, b.metric_name, b.fold);
}

}  // namespace

std::vector<ReportAggregate> aggregate_rows(const std::vector<ReportRow>& rows) {
  std::map<std::tuple<std::string, std::string, double, std::string>,
           std::vector<const ReportRow*>>
      groups;
  for (const auto& r : rows) {
    groups[{r.method, r.classifier, r.confidence, r.metric_name}].push_back(&r);
  }
  std::vector<ReportAggregate> out;
  out.reserve(groups.size());
  for (const auto& [key, members] : groups) {
    ReportAggregate agg;
    agg.method = std::get<0>(key);
    agg.classifier = std::get<1>(key);
    agg.confidence = std::get<2>(key);
    agg.metric_name = std::get<3>(key);
    agg.folds = static_cast<int>(members.size());
    const double n = static_cast<double>(members.size());
    double ts = 0.0, ms = 0.0;
    for (const auto* r : members) {
      ts += r->threshold;
      ms += r->metric_value;
    }
    agg.threshold_mean = ts / n;
    agg.metric_mean = ms / n;
    if (members.size() > 1) {
      double tv = 0.0, mv = 0.0;
      for (const auto* r : members) {
        tv += (r->threshold - agg.threshold_mean) * (r->threshold - agg.threshold_mean);
        mv += (r->metric_value - agg.metric_mean) * (r->metric_value - agg.metric_mean);
      }
      agg.threshold_std = std::sqrt(tv / (n - 1.0));
      agg.metric_std = std::sqrt(mv / (n - 1.0));
    }
    out.push_back(std::move(agg));
  }
  return out;
}

ThresholdReport run(const RunConfig& config, const ScoreDataset& dataset) {
  RunConfig cfg = config;
  cfg.normalize_and_validate();
  for (const auto& r : dataset.records) {
    if (!std::isfinite(r.score) || r.score < 0.0 || r.score > 1.0) {
      raise(Errc::ConfigInvalid, "run() requires a cleaned dataset (record '" + r.id + "')");
    }
  }
  const FoldAssignment folds = stratified_kfold(dataset, cfg.k_folds, cfg.seed);

  std::vector<std::vector<ReportRow>> per_fold(cfg.k_folds);
  if (cfg.threads > 1) {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int f; (f = next.fetch_add(1)) < cfg.k_folds;) {
        per_fold[f] = compute_fold(cfg, dataset, folds, f);
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(cfg.threads, cfg.k_folds);
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  } else {
    for (int f = 0; f < cfg.k_folds; ++f) per_fold[f] = compute_fold(cfg, dataset, folds, f);
  }

  ThresholdReport report;
  for (auto& rows : per_fold) {
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }
  std::sort(report.rows.begin(), report.rows.end(), row_order);
  report.aggregates = aggregate_rows(report.rows);
  return report;
}

namespace {

void row_to_json(json& j, const ReportRow& r) {
  j = json{{"method", r.method},          {"classifier", r.classifier},
           {"confidence", r.confidence},  {"fold", r.fold},
           {"threshold", r.threshold},    {"metric_name", r.metric_name},
           {"metric_value", r.metric_value}, {"failed", r.failed},
           {"failure_reason", r.failure_reason}};
}

ReportRow row_from_json(const json& j) {
  ReportRow r;
  j.at("method").get_to(r.method);
  j.at("classifier").get_to(r.classifier);
  j.at("confidence").get_to(r.confidence);
  j.at("fold").get_to(r.fold);
  j.at("threshold").get_to(r.threshold);
  j.at("metric_name").get_to(r.metric_name);
  j.at("metric_value").get_to(r.metric_value);
  j.at("failed").get_to(r.failed);
  j.at("failure_reason").get_to(r.failure_reason);
  return r;
}

}  // namespace

void to_json(json& j, const ThresholdReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json jr;
    row_to_json(jr, r);
    rows.push_back(std::move(jr));
  }
  json aggs = json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back(json{{"method", a.method},
                        {"classifier", a.classifier},
                        {"confidence", a.confidence},
                        {"metric_name", a.metric_name},
                        {"threshold_mean", a.threshold_mean},
                        {"threshold_std", a.threshold_std},
                        {"metric_mean", a.metric_mean},
                        {"metric_std", a.metric_std},
                        {"folds", a.folds}});
  }
  j = json{{"rows", std::move(rows)}, {"aggregates", std::move(aggs)}};
}

void from_json(const json& j, ThresholdReport& report) {
  report.rows.clear();
  report.aggregates.clear();
  for (const auto& jr : j.at("rows")) report.rows.push_back(row_from_json(jr));
  for (const auto& ja : j.at("aggregates")) {
    ReportAggregate a;
    ja.at("method").get_to(a.method);
    ja.at("classifier").get_to(a.classifier);
    ja.at("confidence").get_to(a.confidence);
    ja.at("metric_name").get_to(a.metric_name);
    ja.at("threshold_mean").get_to(a.threshold_mean);
    ja.at("threshold_std").get_to(a.threshold_std);
    ja.at("metric_mean").get_to(a.metric_mean);
    ja.at("metric_std").get_to(a.metric_std);
    ja.at("folds").get_to(a.folds);
    report.aggregates.push_back(std::move(a));
  }
}

void export_report(const ThresholdReport& report, ReportFormat format,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  if (format == ReportFormat::CSV) {
    out << "method,classifier,confidence,threshold_mean,threshold_std,"
           "metric_name,metric_mean,metric_std\n";
    for (const auto& a : report.aggregates) {
      out << a.method << ',' << a.classifier << ',' << detail::format_double(a.confidence)
          << ',' << detail::format_double(a.threshold_mean) << ','
          << detail::format_double(a.threshold_std) << ',' << a.metric_name << ','
          << detail::format_double(a.metric_mean) << ','
          << detail::format_double(a.metric_std) << '\n';
    }
  } else {
    json j;
    to_json(j, report);
    out << j.dump(2) << '\n';
  }
  if (!out) raise(Errc::IoError, "write failed: " + path.string());
}

ThresholdReport import_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::FileNotFound, path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    raise(Errc::IoError, std::string("invalid report JSON: ") + e.what());
  }
  ThresholdReport report;
  from_json(j, report);
  return report;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  return out;
}

const std::vector<ClassifierKind> kPlotClassifiers = {
    ClassifierKind::LOGISTIC, ClassifierKind::POLYNOMIAL, ClassifierKind::GAM};

std::string kind_name(ClassifierKind k) {
  MethodSpec spec;
  spec.classifier = k;
  return spec.classifier_name();
}

}  // namespace

void export_plot_data(const ScoreDataset& dataset, const RunConfig& config,
                      const std::filesystem::path& out_dir) {
  RunConfig cfg = config;
  cfg.normalize_and_validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) raise(Errc::IoError, "cannot create " + out_dir.string());

  // fig1: conditional histograms.
  {
    auto out = open_csv(out_dir / "fig1_conditional_hist.csv");
    out << "bin_lo,bin_hi,count_fail,count_pass\n";
    const int bins = cfg.histogram_bins;
    std::vector<std::size_t> fail(bins, 0), pass(bins, 0);
    for (const auto& r : dataset.records) {
      int b = std::clamp(static_cast<int>(r.score * bins), 0, bins - 1);
      (r.label == Label::PASS ? pass : fail)[b]++;
    }
    for (int b = 0; b < bins; ++b) {
      out << detail::format_double(static_cast<double>(b) / bins) << ','
          << detail::format_double(static_cast<double>(b + 1) / bins) << ',' << fail[b] << ','
          << pass[b] << '\n';
    }
  }

  const auto all_labels = dataset.labels();

  // fig2: ROC and PR curves of each calibrated classifier on the full data.
  {
    auto roc_out = open_csv(out_dir / "fig2_roc.csv");
    auto pr_out = open_csv(out_dir / "fig2_pr.csv");
    roc_out << "classifier,threshold,tpr,fpr\n";
    pr_out << "classifier,threshold,precision,recall\n";
    for (ClassifierKind kind : kPlotClassifiers) {
      CalibratedClassifier model;
      try {
        model = fit_kind(kind, dataset, cfg);
      } catch (const Error&) {
        continue;
      }
      std::vector<double> probs;
      probs.reserve(dataset.size());
      for (const auto& r : dataset.records) probs.push_back(predict_prob(model, r.score));
      const RocCurve roc = roc_curve(probs, all_labels);
      for (const auto& p : roc.points) {
        roc_out << kind_name(kind) << ',' << detail::format_double(p.threshold) << ','
                << detail::format_double(p.tpr) << ',' << detail::format_double(p.fpr) << '\n';
      }
      const PrCurve pr = pr_curve(probs, all_labels);
      for (const auto& p : pr.points) {
        pr_out << kind_name(kind) << ',' << detail::format_double(p.threshold) << ','
               << detail::format_double(p.precision) << ',' << detail::format_double(p.recall)
               << '\n';
      }
    }
  }

  // fig3: histogram valley between the two main peaks.
  {
    auto out = open_csv(out_dir / "fig3_hist_min.csv");
    out << "bin_center,count,smoothed,is_threshold\n";
    const HistogramScan scan = histogram_scan(dataset.scores(), cfg.histogram_bins);
    for (std::size_t b = 0; b < scan.counts.size(); ++b) {
      out << detail::format_double((b + 0.5) / scan.counts.size()) << ','
          << detail::format_double(scan.counts[b]) << ','
          << detail::format_double(scan.smoothed[b]) << ','
          << (static_cast<int>(b) == scan.threshold_bin ? 1 : 0) << '\n';
    }
  }

  // fig4: class densities and posterior.
  write_density_csv(fit_posterior(dataset), out_dir / "fig4_kde_posterior.csv", cfg.grid_step);

  // fig5: empirical recall curve.
  write_recall_csv(empirical_recall_curve(dataset), out_dir / "fig5_empirical_recall.csv");

  // fig6: cross-validated thresholds against FPR and precision targets.
  {
    auto out = open_csv(out_dir / "fig6_threshold_vs_risk.csv");
    out << "classifier,axis,risk,threshold_mean,threshold_std\n";
    const FoldAssignment folds = stratified_kfold(dataset, cfg.k_folds, cfg.seed);
    for (ClassifierKind kind : kPlotClassifiers) {
      std::map<std::pair<std::string, int>, std::vector<double>> samples;
      for (int f = 0; f < cfg.k_folds; ++f) {
        auto [train, test] = fold_split(dataset, folds, f);
        CalibratedClassifier model;
        try {
          model = fit_kind(kind, train, cfg);
        } catch (const Error&) {
          continue;
        }
        std::vector<double> probs;
        probs.reserve(train.size());
        for (const auto& r : train.records) probs.push_back(predict_prob(model, r.score));
        const auto labels = train.labels();
        const RocCurve roc = roc_curve(probs, labels);
        const PrCurve pr = pr_curve(probs, labels);
        for (int i = 1; i <= 49; ++i) {
          const double risk = 0.02 * i;
          const double p_fpr = threshold_at_fpr(roc, risk);
          if (std::isfinite(p_fpr)) {
            try {
              samples[{"fpr", i}].push_back(
                  invert_probability_threshold(model, p_fpr, cfg.grid_step).canonical_threshold);
            } catch (const Error&) {
            }
          }
          // smallest probability cutoff reaching the precision target
          double p_prec = -1.0;
          for (const auto& pt : pr.points) {
            if (pt.precision >= risk) {
              p_prec = pt.threshold;
              break;
            }
          }
          if (p_prec > 0.0 && p_prec < 1.0) {
            try {
              samples[{"precision", i}].push_back(
                  invert_probability_threshold(model, p_prec, cfg.grid_step).canonical_threshold);
            } catch (const Error&) {
            }
          }
        }
      }
      for (const auto& [key, vals] : samples) {
        if (vals.empty()) continue;
        const double n = static_cast<double>(vals.size());
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        out << kind_name(kind) << ',' << key.first << ','
            << detail::format_double(0.02 * key.second) << ',' << detail::format_double(mean)
            << ',' << detail::format_double(sd) << '\n';
      }
    }
  }

  // fig7/fig8: conformal sweep and conformity distribution on a held-out split.
  {
    auto perf = open_csv(out_dir / "fig7_conformal_performance.csv");
    auto hist = open_csv(out_dir / "fig8_conformity_hist.csv");
    auto quant = open_csv(out_dir / "fig8_quantiles.csv");
    perf << "classifier,confidence,coverage,avg_width\n";
    hist << "classifier,bin_lo,bin_hi,count\n";
    quant << "classifier,confidence,quantile\n";
    auto [work, test] = split_holdout(dataset, 0.5, derive_seed(cfg.seed, 0x7aULL), true);
    auto [fit_part, calib_part] =
        split_holdout(work, cfg.conformal_calib_fraction, derive_seed(cfg.seed, 0x7bULL), true);
    for (ClassifierKind kind : kPlotClassifiers) {
      ConformalCalibrator cal;
      try {
        cal = calibrate(fit_kind(kind, fit_part, cfg), calib_part);
      } catch (const Error&) {
        continue;
      }
      for (int i = 1; i <= 50; ++i) {
        const double conf = 0.02 * i;
        const double q = conf >= 1.0 - 1e-12
                             ? std::numeric_limits<double>::infinity()
                             : conformal_quantile(cal, 1.0 - conf);
        const ConformalEvaluation ev = evaluate_sets(cal, q, test, 1.0 - conf);
        perf << kind_name(kind) << ',' << detail::format_double(conf) << ','
             << detail::format_double(ev.coverage) << ','
             << detail::format_double(ev.avg_width) << '\n';
      }
      const int bins = 50;
      std::vector<std::size_t> counts(bins, 0);
      for (double s : cal.conformity) {
        counts[std::clamp(static_cast<int>(s * bins), 0, bins - 1)]++;
      }
      for (int b = 0; b < bins; ++b) {
        hist << kind_name(kind) << ',' << detail::format_double(static_cast<double>(b) / bins)
             << ',' << detail::format_double(static_cast<double>(b + 1) / bins) << ','
             << counts[b] << '\n';
      }
      for (double level : cfg.confidence_levels) {
        quant << kind_name(kind) << ',' << detail::format_double(level) << ','
              << detail::format_double(conformal_quantile(cal, 1.0 - level)) << '\n';
      }
    }
  }
}

}  // namespace threshcal

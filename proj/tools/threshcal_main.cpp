// threshcal: decision thresholds for continuous [0,1] evaluation scores
// with PASS/FAIL ground truth. Subcommands: validate, stats, threshold,
// crossval. Machine-readable output (CSV, or JSON with --json) goes to
// stdout; diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 data,
// 3 numeric.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "threshcal/classifiers.hpp"
#include "threshcal/conformal.hpp"
#include "threshcal/dataset.hpp"
#include "threshcal/density.hpp"
#include "threshcal/errors.hpp"
#include "threshcal/harness.hpp"
#include "threshcal/recall_curve.hpp"
#include "threshcal/roc.hpp"
#include "threshcal/stats_tests.hpp"
#include "threshcal/zscore.hpp"

namespace tc = threshcal;
using nlohmann::json;

namespace {

struct InputOptions {
  std::string path;
  std::string format = "csv";
  std::string score_field = "score";
  std::string label_field = "label";
  std::string pass_token = "PASS";
  std::string fail_token = "FAIL";
  std::string metric_name;
};

void add_input_flags(CLI::App* cmd, InputOptions& in, bool required = true) {
  auto* opt = cmd->add_option("--input", in.path, "labeled score file");
  if (required) opt->required();
  cmd->add_option("--format", in.format, "csv or jsonl");
  cmd->add_option("--score-field", in.score_field, "column/key holding the score");
  cmd->add_option("--label-field", in.label_field, "column/key holding the label");
  cmd->add_option("--pass-token", in.pass_token, "label value mapped to PASS");
  cmd->add_option("--fail-token", in.fail_token, "label value mapped to FAIL");
  cmd->add_option("--metric-name", in.metric_name, "metric/library name for reports");
}

tc::LoadSpec load_spec(const InputOptions& in) {
  tc::LoadSpec spec;
  spec.score_field = in.score_field;
  spec.label_field = in.label_field;
  spec.pass_token = in.pass_token;
  spec.fail_token = in.fail_token;
  spec.metric_name = in.metric_name;
  return spec;
}

std::pair<tc::ScoreDataset, tc::CleaningReport> load_clean(const InputOptions& in) {
  const auto raw = tc::load_dataset(in.path, tc::parse_format(in.format), load_spec(in));
  return tc::clean(raw);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& config_value) {
  if (flag) return *flag;
  if (config_value) return *config_value;
  if (const char* env = std::getenv("THRESHCAL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      tc::raise(tc::Errc::ConfigInvalid, "THRESHCAL_SEED is not an unsigned integer");
    }
  }
  return 0;
}

int cmd_validate(const InputOptions& in, bool as_json) {
  auto [ds, report] = load_clean(in);
  const std::size_t pass = ds.count(tc::Label::PASS);
  const std::size_t fail = ds.count(tc::Label::FAIL);
  if (as_json) {
    json j;
    json cleaning;
    to_json(cleaning, report);
    j["cleaning_report"] = cleaning;
    j["labels"] = json{{"pass", pass}, {"fail", fail}};
    if (!ds.metric_name.empty()) j["metric"] = ds.metric_name;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << "rows_in,rows_dropped_missing_score,rows_dropped_bad_label,rows_out,"
                 "pass_count,fail_count\n"
              << report.rows_in << ',' << report.rows_dropped_missing_score << ','
              << report.rows_dropped_bad_label << ',' << report.rows_out << ',' << pass << ','
              << fail << '\n';
  }
  return 0;
}

int cmd_stats(const InputOptions& in, bool pooled, bool as_json) {
  auto [ds, report] = load_clean(in);
  if (!ds.has_both_labels()) {
    tc::raise(tc::Errc::SingleClass, "stats needs PASS and FAIL records");
  }
  const auto pass = ds.scores(tc::Label::PASS);
  const auto fail = ds.scores(tc::Label::FAIL);
  const tc::TestResult t = tc::independent_t_test(pass, fail, pooled);
  const tc::TestResult u = tc::mann_whitney_u(pass, fail);
  if (as_json) {
    json jt, ju;
    to_json(jt, t);
    to_json(ju, u);
    std::cout << json::array({jt, ju}).dump(2) << '\n';
  } else {
    std::cout << "method,statistic,p_value,n_a,n_b\n";
    for (const auto& r : {t, u}) {
      std::cout << (r.method == tc::TestMethod::T_TEST ? "t_test" : "mann_whitney_u") << ','
                << r.statistic << ',' << r.p_value << ',' << r.n_a << ',' << r.n_b << '\n';
    }
  }
  return 0;
}

struct ThresholdOptions {
  std::string method;
  double level = 0.95;
  double grid_step = 1e-3;
  int bins = 50;
  int degree = 3;
  int knots = 10;
  std::string gam_lambda = "auto";
  double ridge_lambda = 1e-6;
  double calib_fraction = 0.5;
  std::optional<std::uint64_t> seed;
};

std::optional<double> parse_gam_lambda(const std::string& text) {
  if (text == "auto" || text == "AUTO") return std::nullopt;
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    tc::raise(tc::Errc::ConfigInvalid, "lambda must be a number or 'auto'");
  }
}

tc::CalibratedClassifier fit_for(const tc::MethodSpec& spec, const tc::ScoreDataset& ds,
                                 const ThresholdOptions& opts) {
  switch (spec.classifier) {
    case tc::ClassifierKind::POLYNOMIAL:
      return tc::fit_logistic(ds, tc::FeatureMap::polynomial(opts.degree), opts.ridge_lambda);
    case tc::ClassifierKind::GAM:
      return tc::fit_gam(ds, opts.knots, parse_gam_lambda(opts.gam_lambda));
    default:
      return tc::fit_logistic(ds, tc::FeatureMap::identity(), opts.ridge_lambda);
  }
}

int cmd_threshold(const InputOptions& in, const ThresholdOptions& opts, bool as_json) {
  if (!(opts.level > 0.0 && opts.level < 1.0)) {
    tc::raise(tc::Errc::OutOfRange, "--level must lie in (0,1)");
  }
  const tc::MethodSpec spec = tc::MethodSpec::parse(opts.method);
  auto [ds, report] = load_clean(in);
  const auto scores = ds.scores();

  auto emit = [&](double threshold, const std::string& metric, double value) {
    if (as_json) {
      std::cout << json{{"method", spec.method_name()},
                        {"classifier", spec.classifier_name()},
                        {"confidence", opts.level},
                        {"threshold", threshold},
                        {"metric_name", metric},
                        {"metric_value", value}}
                       .dump(2)
                << '\n';
    } else {
      std::cout << "method,classifier,confidence,threshold,metric_name,metric_value\n"
                << spec.method_name() << ',' << spec.classifier_name() << ',' << opts.level
                << ',' << threshold << ',' << metric << ',' << value << '\n';
    }
  };

  switch (spec.method) {
    case tc::Method::ZSCORE: {
      const tc::ZInterval zi = tc::z_interval(scores, opts.level);
      if (as_json) {
        json j;
        to_json(j, zi);
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << "mean,std_dev,lower,upper\n"
                  << zi.mean << ',' << zi.std_dev << ',' << zi.lower << ',' << zi.upper << '\n';
      }
      return 0;
    }
    case tc::Method::HIST_MIN: {
      const double t = tc::histogram_local_min_threshold(scores, opts.bins);
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::KDE: {
      const double t = tc::kde_threshold(ds, opts.level, opts.grid_step);
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::EMP_RECALL: {
      const double t = tc::recall_threshold(ds, opts.level);
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::PR_CURVE: {
      const auto model = fit_for(spec, ds, opts);
      std::vector<double> probs;
      probs.reserve(ds.size());
      for (const auto& r : ds.records) probs.push_back(tc::predict_prob(model, r.score));
      const auto sel = tc::threshold_at_recall(probs, ds.labels(), opts.level);
      const double t =
          tc::invert_probability_threshold(model, sel.threshold, opts.grid_step)
              .canonical_threshold;
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::ROC_FPR: {
      const auto model = fit_for(spec, ds, opts);
      std::vector<double> probs;
      probs.reserve(ds.size());
      for (const auto& r : ds.records) probs.push_back(tc::predict_prob(model, r.score));
      const auto curve = tc::roc_curve(probs, ds.labels());
      const double p_star = tc::threshold_at_fpr(curve, 1.0 - opts.level);
      if (!std::isfinite(p_star)) {
        tc::raise(tc::Errc::UnreachableProbability,
                  "FPR budget requires rejecting every record");
      }
      const double t = tc::invert_probability_threshold(model, p_star, opts.grid_step)
                           .canonical_threshold;
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::YOUDEN: {
      const auto curve = tc::roc_curve(scores, ds.labels());
      const double t = tc::youden_threshold(curve);
      emit(t, "recall", tc::recall_at(ds, t));
      return 0;
    }
    case tc::Method::CONFORMAL: {
      const std::uint64_t seed = resolve_seed(opts.seed, std::nullopt);
      auto [fit_part, calib_part] = tc::split_holdout(ds, opts.calib_fraction, seed, true);
      const auto cal = tc::calibrate(fit_for(spec, fit_part, opts), calib_part);
      const double q = tc::conformal_quantile(cal, 1.0 - opts.level);
      const double t = tc::conformal_score_threshold(cal, q, opts.grid_step);
      emit(t, "quantile", q);
      return 0;
    }
  }
  return 0;
}

struct CrossvalOptions {
  std::string config_path;
  std::string out_csv;
  std::string out_json;
  std::string plots_dir;
  std::optional<std::uint64_t> seed;
};

// Strict config parse: unknown keys are rejected.
void apply_config(const json& j, InputOptions& in, tc::RunConfig& cfg,
                  CrossvalOptions& opts, std::optional<std::uint64_t>& config_seed) {
  static const std::set<std::string> known = {
      "input",       "methods",        "confidence_levels",
      "k_folds",     "seed",           "poly_degree",
      "gam_knots",   "gam_lambda",     "ridge_lambda",
      "grid_step",   "histogram_bins", "conformal_calib_fraction",
      "threads",     "report_csv",     "report_json",
      "plots_dir"};
  static const std::set<std::string> known_input = {"path",       "format",     "score_field",
                                                    "label_field", "pass_token", "fail_token",
                                                    "metric_name"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      tc::raise(tc::Errc::ConfigInvalid, "unknown config key '" + it.key() + "'");
    }
  }
  if (j.contains("input")) {
    const json& ji = j["input"];
    for (auto it = ji.begin(); it != ji.end(); ++it) {
      if (!known_input.count(it.key())) {
        tc::raise(tc::Errc::ConfigInvalid, "unknown config key 'input." + it.key() + "'");
      }
    }
    if (ji.contains("path")) ji["path"].get_to(in.path);
    if (ji.contains("format")) ji["format"].get_to(in.format);
    if (ji.contains("score_field")) ji["score_field"].get_to(in.score_field);
    if (ji.contains("label_field")) ji["label_field"].get_to(in.label_field);
    if (ji.contains("pass_token")) ji["pass_token"].get_to(in.pass_token);
    if (ji.contains("fail_token")) ji["fail_token"].get_to(in.fail_token);
    if (ji.contains("metric_name")) ji["metric_name"].get_to(in.metric_name);
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) {
      cfg.methods.push_back(tc::MethodSpec::parse(m.get<std::string>()));
    }
  }
  if (j.contains("confidence_levels")) {
    j["confidence_levels"].get_to(cfg.confidence_levels);
  }
  if (j.contains("k_folds")) j["k_folds"].get_to(cfg.k_folds);
  if (j.contains("seed")) config_seed = j["seed"].get<std::uint64_t>();
  if (j.contains("poly_degree")) j["poly_degree"].get_to(cfg.poly_degree);
  if (j.contains("gam_knots")) j["gam_knots"].get_to(cfg.gam_knots);
  if (j.contains("gam_lambda")) {
    const json& v = j["gam_lambda"];
    cfg.gam_lambda = v.is_string() ? parse_gam_lambda(v.get<std::string>())
                                   : std::optional<double>(v.get<double>());
  }
  if (j.contains("ridge_lambda")) j["ridge_lambda"].get_to(cfg.ridge_lambda);
  if (j.contains("grid_step")) j["grid_step"].get_to(cfg.grid_step);
  if (j.contains("histogram_bins")) j["histogram_bins"].get_to(cfg.histogram_bins);
  if (j.contains("conformal_calib_fraction")) {
    j["conformal_calib_fraction"].get_to(cfg.conformal_calib_fraction);
  }
  if (j.contains("threads")) j["threads"].get_to(cfg.threads);
  if (j.contains("report_csv")) j["report_csv"].get_to(opts.out_csv);
  if (j.contains("report_json")) j["report_json"].get_to(opts.out_json);
  if (j.contains("plots_dir")) j["plots_dir"].get_to(opts.plots_dir);
}

int cmd_crossval(InputOptions in, CrossvalOptions opts) {
  tc::RunConfig cfg;
  cfg.methods = tc::RunConfig::default_methods();
  std::optional<std::uint64_t> config_seed;
  if (!opts.config_path.empty()) {
    std::ifstream f(opts.config_path, std::ios::binary);
    if (!f) tc::raise(tc::Errc::FileNotFound, opts.config_path);
    json j;
    try {
      f >> j;
    } catch (const json::parse_error& e) {
      tc::raise(tc::Errc::ConfigInvalid, std::string("invalid config JSON: ") + e.what());
    }
    // flags already carry any overrides; fill unset values from the file
    InputOptions from_file = in;
    tc::RunConfig file_cfg = cfg;
    CrossvalOptions file_opts = opts;
    apply_config(j, from_file, file_cfg, file_opts, config_seed);
    if (in.path.empty()) in = from_file;
    cfg = file_cfg;
    if (opts.out_csv.empty()) opts.out_csv = file_opts.out_csv;
    if (opts.out_json.empty()) opts.out_json = file_opts.out_json;
    if (opts.plots_dir.empty()) opts.plots_dir = file_opts.plots_dir;
  }
  if (in.path.empty()) {
    tc::raise(tc::Errc::ConfigInvalid, "no input file (use --input or input.path)");
  }
  cfg.seed = resolve_seed(opts.seed, config_seed);

  auto [ds, report] = load_clean(in);
  const tc::ThresholdReport result = tc::run(cfg, ds);
  if (!opts.out_csv.empty()) {
    tc::export_report(result, tc::ReportFormat::CSV, opts.out_csv);
    std::cerr << "report written to " << opts.out_csv << '\n';
  } else {
    const auto tmp = std::filesystem::temp_directory_path() /
                     ("threshcal_report_" + std::to_string(::getpid()) + ".csv");
    tc::export_report(result, tc::ReportFormat::CSV, tmp);
    std::ifstream echo(tmp, std::ios::binary);
    std::cout << echo.rdbuf();
    std::filesystem::remove(tmp);
  }
  if (!opts.out_json.empty()) {
    tc::export_report(result, tc::ReportFormat::JSON, opts.out_json);
    std::cerr << "report written to " << opts.out_json << '\n';
  }
  if (!opts.plots_dir.empty()) {
    tc::export_plot_data(ds, cfg, opts.plots_dir);
    std::cerr << "plot data written to " << opts.plots_dir << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statistically grounded thresholds for [0,1] evaluation scores"};
  app.require_subcommand(1);

  InputOptions in_validate, in_stats, in_threshold, in_crossval;
  bool json_validate = false, json_stats = false, json_threshold = false;
  bool pooled = false;
  ThresholdOptions topts;
  CrossvalOptions copts;
  std::optional<std::uint64_t> seed_threshold, seed_crossval;

  auto* validate = app.add_subcommand("validate", "load, clean and summarize a dataset");
  add_input_flags(validate, in_validate);
  validate->add_flag("--json", json_validate, "JSON output");

  auto* stats = app.add_subcommand("stats", "t test and Mann-Whitney U, PASS vs FAIL");
  add_input_flags(stats, in_stats);
  stats->add_flag("--pooled", pooled, "pooled-variance t test (default Welch)");
  stats->add_flag("--json", json_stats, "JSON output");

  auto* threshold = app.add_subcommand(
      "threshold",
      "one threshold on the full dataset; level semantics per method: zscore interval "
      "confidence, kde posterior floor, emp-recall/pr recall target, roc-fpr max FPR = "
      "1-level, conformal coverage 1-alpha; hist-min and youden ignore it");
  add_input_flags(threshold, in_threshold);
  threshold->add_option("--method", topts.method, "zscore|hist-min|kde|emp-recall|youden|pr[:clf]|roc-fpr[:clf]|conformal[:clf] with clf in lr|poly|gam")
      ->required();
  threshold->add_option("--level", topts.level, "confidence level in (0,1)");
  threshold->add_option("--grid-step", topts.grid_step, "score grid step");
  threshold->add_option("--bins", topts.bins, "histogram bins");
  threshold->add_option("--degree", topts.degree, "polynomial degree");
  threshold->add_option("--knots", topts.knots, "GAM interior knots");
  threshold->add_option("--lambda", topts.gam_lambda, "GAM smoothing (number or 'auto')");
  threshold->add_option("--ridge-lambda", topts.ridge_lambda, "ridge penalty for lr/poly");
  threshold->add_option("--calib-fraction", topts.calib_fraction,
                        "conformal calibration fraction");
  threshold->add_option("--seed", seed_threshold, "split seed (or THRESHCAL_SEED)");
  threshold->add_flag("--json", json_threshold, "JSON output");

  auto* crossval = app.add_subcommand("crossval",
                                      "stratified k-fold sweep over methods and levels");
  add_input_flags(crossval, in_crossval, /*required=*/false);
  crossval->add_option("--config", copts.config_path, "JSON run configuration");
  crossval->add_option("--out", copts.out_csv, "report CSV path (default: stdout)");
  crossval->add_option("--out-json", copts.out_json, "report JSON path");
  crossval->add_option("--plots", copts.plots_dir, "directory for figure CSV series");
  crossval->add_option("--seed", seed_crossval, "run seed (or THRESHCAL_SEED)");

  try {
    app.parse(argc, argv);
    if (validate->parsed()) return cmd_validate(in_validate, json_validate);
    if (stats->parsed()) return cmd_stats(in_stats, pooled, json_stats);
    if (threshold->parsed()) {
      topts.seed = seed_threshold;
      return cmd_threshold(in_threshold, topts, json_threshold);
    }
    if (crossval->parsed()) {
      copts.seed = seed_crossval;
      return cmd_crossval(in_crossval, copts);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      return app.exit(e);
    }
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const tc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

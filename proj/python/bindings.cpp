#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

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

namespace py = pybind11;
using namespace threshcal;

namespace {

ScoreDataset make_dataset(const std::vector<double>& scores,
                          const std::vector<int>& labels, const std::string& metric_name) {
  if (scores.size() != labels.size()) {
    raise(Errc::ConfigInvalid, "scores and labels differ in length");
  }
  ScoreDataset ds;
  ds.metric_name = metric_name;
  ds.records.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    LabeledScoreRecord r;
    r.id = std::to_string(i);
    r.score = scores[i];
    r.label = labels[i] ? Label::PASS : Label::FAIL;
    ds.records.push_back(std::move(r));
  }
  return ds;
}

RunConfig config_from_json_str(const std::string& text) {
  RunConfig cfg;
  const auto j = nlohmann::json::parse(text);
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& m : j["methods"]) cfg.methods.push_back(MethodSpec::parse(m.get<std::string>()));
  } else {
    cfg.methods = RunConfig::default_methods();
  }
  if (j.contains("confidence_levels")) j["confidence_levels"].get_to(cfg.confidence_levels);
  if (j.contains("k_folds")) j["k_folds"].get_to(cfg.k_folds);
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("poly_degree")) j["poly_degree"].get_to(cfg.poly_degree);
  if (j.contains("gam_knots")) j["gam_knots"].get_to(cfg.gam_knots);
  if (j.contains("gam_lambda") && !j["gam_lambda"].is_string()) {
    cfg.gam_lambda = j["gam_lambda"].get<double>();
  }
  if (j.contains("ridge_lambda")) j["ridge_lambda"].get_to(cfg.ridge_lambda);
  if (j.contains("grid_step")) j["grid_step"].get_to(cfg.grid_step);
  if (j.contains("histogram_bins")) j["histogram_bins"].get_to(cfg.histogram_bins);
  if (j.contains("threads")) j["threads"].get_to(cfg.threads);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_threshcal, m) {
  m.doc() = "core operations: dataset handling, score-distribution tests, and the "
            "threshold methods (z-interval, KDE posterior, empirical recall, ROC/PR, "
            "split conformal prediction)";

  py::register_exception<Error>(m, "ThreshcalError");

  py::enum_<Label>(m, "Label").value("FAIL", Label::FAIL).value("PASS", Label::PASS);

  py::class_<LabeledScoreRecord>(m, "LabeledScoreRecord")
      .def(py::init<>())
      .def_readwrite("id", &LabeledScoreRecord::id)
      .def_readwrite("score", &LabeledScoreRecord::score)
      .def_readwrite("label", &LabeledScoreRecord::label)
      .def_readwrite("source", &LabeledScoreRecord::source);

  py::class_<ScoreDataset>(m, "ScoreDataset")
      .def(py::init<>())
      .def_readwrite("records", &ScoreDataset::records)
      .def_readwrite("metric_name", &ScoreDataset::metric_name)
      .def("__len__", &ScoreDataset::size)
      .def("scores", py::overload_cast<>(&ScoreDataset::scores, py::const_))
      .def("count_pass", [](const ScoreDataset& d) { return d.count(Label::PASS); })
      .def("count_fail", [](const ScoreDataset& d) { return d.count(Label::FAIL); });

  py::class_<CleaningReport>(m, "CleaningReport")
      .def_readonly("rows_in", &CleaningReport::rows_in)
      .def_readonly("rows_dropped_missing_score", &CleaningReport::rows_dropped_missing_score)
      .def_readonly("rows_dropped_bad_label", &CleaningReport::rows_dropped_bad_label)
      .def_readonly("rows_out", &CleaningReport::rows_out);

  m.def("make_dataset", &make_dataset, py::arg("scores"), py::arg("labels"),
        py::arg("metric_name") = "", "Build a dataset from score and 0/1 label lists.");
  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, const std::string& format,
         const std::string& score_field, const std::string& label_field,
         const std::string& pass_token, const std::string& fail_token) {
        LoadSpec spec;
        spec.score_field = score_field;
        spec.label_field = label_field;
        spec.pass_token = pass_token;
        spec.fail_token = fail_token;
        return load_dataset(path, parse_format(format), spec);
      },
      py::arg("path"), py::arg("format") = "csv", py::arg("score_field") = "score",
      py::arg("label_field") = "label", py::arg("pass_token") = "PASS",
      py::arg("fail_token") = "FAIL");
  m.def("clean", &clean, py::arg("dataset"));
  m.def("stratified_kfold",
        [](const ScoreDataset& d, int k, std::uint64_t seed) {
          return stratified_kfold(d, k, seed).fold_of;
        },
        py::arg("dataset"), py::arg("k"), py::arg("seed") = 0);
  m.def("split_holdout", &split_holdout, py::arg("dataset"), py::arg("calib_fraction"),
        py::arg("seed") = 0, py::arg("stratified") = true);

  py::class_<TestResult>(m, "TestResult")
      .def_readonly("statistic", &TestResult::statistic)
      .def_readonly("p_value", &TestResult::p_value)
      .def_readonly("n_a", &TestResult::n_a)
      .def_readonly("n_b", &TestResult::n_b);
  m.def(
      "independent_t_test",
      [](const std::vector<double>& a, const std::vector<double>& b, bool equal_variance) {
        return independent_t_test(a, b, equal_variance);
      },
      py::arg("a"), py::arg("b"), py::arg("equal_variance") = false);
  m.def("mann_whitney_u",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return mann_whitney_u(a, b);
        },
        py::arg("a"), py::arg("b"));

  py::class_<ZInterval>(m, "ZInterval")
      .def_readonly("mean", &ZInterval::mean)
      .def_readonly("std_dev", &ZInterval::std_dev)
      .def_readonly("confidence", &ZInterval::confidence)
      .def_readonly("lower", &ZInterval::lower)
      .def_readonly("upper", &ZInterval::upper);
  m.def("z_quantile", &z_quantile, py::arg("confidence"));
  m.def(
      "z_interval",
      [](const std::vector<double>& scores, double confidence, bool mean_ci, bool clip) {
        return z_interval(scores, confidence,
                          mean_ci ? IntervalMode::MEAN_CI : IntervalMode::POPULATION, clip);
      },
      py::arg("scores"), py::arg("confidence"), py::arg("mean_ci") = false,
      py::arg("clip") = false);

  py::class_<KdeModel>(m, "KdeModel").def_readonly("bandwidth", &KdeModel::bandwidth);
  m.def(
      "fit_kde",
      [](const std::vector<double>& scores, std::optional<double> bandwidth) {
        return fit_kde(scores, bandwidth);
      },
      py::arg("scores"), py::arg("bandwidth") = py::none());
  m.def("kde_pdf", &kde_pdf, py::arg("model"), py::arg("x"));
  m.def(
      "histogram_local_min_threshold",
      [](const std::vector<double>& scores, int bins) {
        return histogram_local_min_threshold(scores, bins);
      },
      py::arg("scores"), py::arg("bins") = 50);
  m.def("kde_threshold",
        py::overload_cast<const ScoreDataset&, double, double>(&kde_threshold),
        py::arg("dataset"), py::arg("confidence"), py::arg("grid_step") = 1e-3);

  m.def("recall_threshold", &recall_threshold, py::arg("dataset"), py::arg("target"));
  m.def("recall_at", &recall_at, py::arg("dataset"), py::arg("threshold"));

  py::class_<FitDiagnostics>(m, "FitDiagnostics")
      .def_readonly("iterations", &FitDiagnostics::iterations)
      .def_readonly("deviance", &FitDiagnostics::deviance)
      .def_readonly("converged", &FitDiagnostics::converged);
  py::class_<CalibratedClassifier>(m, "CalibratedClassifier")
      .def_readonly("coefficients", &CalibratedClassifier::coefficients)
      .def_readonly("penalty_lambda", &CalibratedClassifier::penalty_lambda)
      .def_readonly("fit_diagnostics", &CalibratedClassifier::fit_diagnostics)
      .def("original_coefficients", &CalibratedClassifier::original_coefficients)
      .def("to_json", [](const CalibratedClassifier& c) {
        nlohmann::json j;
        to_json(j, c);
        return j.dump();
      });
  m.def(
      "fit_logistic",
      [](const ScoreDataset& ds, int degree, double penalty_lambda) {
        const FeatureMap map =
            degree <= 1 ? FeatureMap::identity() : FeatureMap::polynomial(degree);
        return fit_logistic(ds, map, penalty_lambda);
      },
      py::arg("dataset"), py::arg("degree") = 1, py::arg("penalty_lambda") = 1e-6);
  m.def(
      "fit_gam",
      [](const ScoreDataset& ds, int knots, std::optional<double> lam) {
        return fit_gam(ds, knots, lam);
      },
      py::arg("dataset"), py::arg("knots") = 10, py::arg("lambda") = py::none());
  m.def("predict_prob", &predict_prob, py::arg("model"), py::arg("score"));
  py::class_<CrossingSet>(m, "CrossingSet")
      .def_readonly("target_prob", &CrossingSet::target_prob)
      .def_readonly("crossings", &CrossingSet::crossings)
      .def_readonly("canonical_threshold", &CrossingSet::canonical_threshold);
  m.def("invert_probability_threshold", &invert_probability_threshold, py::arg("model"),
        py::arg("target_prob"), py::arg("grid_step") = 1e-3);

  py::class_<RocCurve>(m, "RocCurve").def_readonly("auc", &RocCurve::auc);
  m.def(
      "roc_auc",
      [](const std::vector<double>& values, const std::vector<int>& labels) {
        std::vector<Label> ls;
        ls.reserve(labels.size());
        for (int v : labels) ls.push_back(v ? Label::PASS : Label::FAIL);
        return roc_curve(values, ls).auc;
      },
      py::arg("values"), py::arg("labels"));

  py::class_<ConformalCalibrator>(m, "ConformalCalibrator")
      .def_readonly("conformity", &ConformalCalibrator::conformity)
      .def_readonly("n_calib", &ConformalCalibrator::n_calib);
  py::class_<ConformalEvaluation>(m, "ConformalEvaluation")
      .def_readonly("alpha", &ConformalEvaluation::alpha)
      .def_readonly("coverage", &ConformalEvaluation::coverage)
      .def_readonly("avg_width", &ConformalEvaluation::avg_width)
      .def_readonly("empty_fraction", &ConformalEvaluation::empty_fraction)
      .def_readonly("threshold_score", &ConformalEvaluation::threshold_score);
  m.def("calibrate", &calibrate, py::arg("classifier"), py::arg("holdout"));
  m.def("conformal_quantile", &conformal_quantile, py::arg("calibrator"), py::arg("alpha"));
  m.def(
      "prediction_set",
      [](const ConformalCalibrator& cal, double q, double score) {
        const PredictionSet s = prediction_set(cal, q, score);
        return std::make_pair(s.contains_pass, s.contains_fail);
      },
      py::arg("calibrator"), py::arg("q"), py::arg("score"));
  m.def("conformal_evaluate", &evaluate, py::arg("calibrator"), py::arg("q"), py::arg("test"),
        py::arg("alpha"), py::arg("grid_step") = 1e-3);
  m.def("conformal_score_threshold", &conformal_score_threshold, py::arg("calibrator"),
        py::arg("q"), py::arg("grid_step") = 1e-3);

  m.def(
      "run_crossval",
      [](const ScoreDataset& ds, const std::string& config_json) {
        const ThresholdReport report = run(config_from_json_str(config_json), ds);
        nlohmann::json j;
        to_json(j, report);
        return j.dump();
      },
      py::arg("dataset"), py::arg("config_json") = "{}",
      "Run the cross-validated sweep; returns the report as a JSON string.");
}

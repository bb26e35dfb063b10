#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "support/cli_runner.hpp"
#include "support/synth.hpp"
#include "threshcal/conformal.hpp"
#include "threshcal/errors.hpp"

using namespace threshcal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// A classifier that outputs the same probability everywhere.
CalibratedClassifier constant_model(double p) {
  CalibratedClassifier m;
  m.feature_map = FeatureMap::identity();
  m.feature_map.normalization = {{0.0, 1.0}};
  m.coefficients = {std::log(p / (1.0 - p)), 0.0};
  m.fit_diagnostics.converged = true;
  return m;
}

CalibratedClassifier monotone_model(double b0, double b1) {
  CalibratedClassifier m;
  m.feature_map = FeatureMap::identity();
  m.feature_map.normalization = {{0.0, 1.0}};
  m.coefficients = {b0, b1};
  m.fit_diagnostics.converged = true;
  return m;
}

ConformalCalibrator manual_calibrator(std::vector<double> conformity,
                                      CalibratedClassifier model = constant_model(0.5)) {
  ConformalCalibrator cal;
  cal.classifier = std::move(model);
  std::sort(conformity.begin(), conformity.end());
  cal.n_calib = conformity.size();
  cal.conformity = std::move(conformity);
  return cal;
}

}  // namespace

TEST_CASE("conformity scores follow the true-label probability") {
  const auto model = constant_model(0.9);
  const ScoreDataset pass_one = synth::from_vectors({0.4}, {1});
  const ScoreDataset fail_one = synth::from_vectors({0.4}, {0});
  CHECK(calibrate(model, pass_one).conformity[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(calibrate(model, fail_one).conformity[0] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("conformity list equals direct recomputation, sorted") {
  const ScoreDataset fit_ds = synth::beta_mixture(400, 2, 8, 8, 2, 31);
  const ScoreDataset holdout = synth::beta_mixture(100, 2, 8, 8, 2, 32);
  const auto model = fit_logistic(fit_ds, FeatureMap::identity(), 1e-6);
  const auto cal = calibrate(model, holdout);

  std::vector<double> expected;
  for (const auto& r : holdout.records) {
    const double p = predict_prob(model, r.score);
    expected.push_back(r.label == Label::PASS ? 1.0 - p : p);
  }
  std::sort(expected.begin(), expected.end());
  REQUIRE(cal.conformity.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(cal.conformity[i] == expected[i]);
  }
  CHECK(std::is_sorted(cal.conformity.begin(), cal.conformity.end()));
}

TEST_CASE("finite-sample quantile rank") {
  const auto cal = manual_calibrator({0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  SUBCASE("rank formula at alpha 0.1") {
    CHECK(conformal_quantile(cal, 0.1) == doctest::Approx(0.9));
  }
  SUBCASE("rank beyond n becomes +inf") {
    CHECK(std::isinf(conformal_quantile(cal, 0.01)));
  }
  SUBCASE("single calibration point") {
    const auto one = manual_calibrator({0.42});
    CHECK(conformal_quantile(one, 0.5) == doctest::Approx(0.42));
  }
  SUBCASE("quantile grows with the confidence level") {
    double prev = -1.0;
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
      const double q = conformal_quantile(cal, 1.0 - level);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("prediction sets") {
  SUBCASE("infinite quantile includes both labels") {
    const auto cal = manual_calibrator({0.5}, constant_model(0.5));
    const PredictionSet s = prediction_set(cal, kInf, 0.5);
    CHECK(s.contains_pass);
    CHECK(s.contains_fail);
    CHECK(s.width() == 2);
  }
  SUBCASE("confident prediction keeps only the matching label") {
    const auto cal = manual_calibrator({0.5}, constant_model(0.97));
    const PredictionSet s = prediction_set(cal, 0.05, 0.5);
    CHECK(s.contains_pass);
    CHECK(!s.contains_fail);
  }
  SUBCASE("ambiguous prediction with a small quantile is empty") {
    const auto cal = manual_calibrator({0.5}, constant_model(0.5));
    const PredictionSet s = prediction_set(cal, 0.3, 0.5);
    CHECK(s.width() == 0);
  }
  SUBCASE("sets are nested as the quantile grows") {
    const auto model = monotone_model(-4.0, 8.0);
    const auto cal = manual_calibrator({0.2, 0.4, 0.6}, model);
    for (double x : {0.1, 0.4, 0.45, 0.52, 0.9}) {
      const PredictionSet narrow = prediction_set(cal, 0.2, x);
      const PredictionSet wide = prediction_set(cal, 0.6, x);
      if (narrow.contains_pass) CHECK(wide.contains_pass);
      if (narrow.contains_fail) CHECK(wide.contains_fail);
    }
  }
}

TEST_CASE("evaluation over a test set") {
  const ScoreDataset test = synth::beta_mixture(200, 2, 8, 8, 2, 40);
  const auto cal = manual_calibrator({0.5}, constant_model(0.5));
  SUBCASE("vacuous sets cover everything at width two") {
    const ConformalEvaluation ev = evaluate(cal, kInf, test, 0.001);
    CHECK(ev.coverage == 1.0);
    CHECK(ev.avg_width == 2.0);
    CHECK(ev.empty_fraction == 0.0);
    CHECK(ev.threshold_score == 0.0);
  }
  SUBCASE("empty test set raises") {
    ScoreDataset empty;
    CHECK_THROWS_AS(evaluate_sets(cal, 0.5, empty, 0.1), Error);
  }
  SUBCASE("empty calibration raises") {
    ScoreDataset empty;
    CHECK_THROWS_AS(calibrate(constant_model(0.5), empty), Error);
  }
}

TEST_CASE("score threshold extraction") {
  SUBCASE("monotone classifier inverts the probability floor") {
    // p(x) = sigmoid(10x - 3.79454): p(0.42) = 0.6 exactly
    const auto model = monotone_model(std::log(0.6 / 0.4) - 4.2, 10.0);
    const auto cal = manual_calibrator({0.1}, model);
    const double t = conformal_score_threshold(cal, 0.4, 1e-3);
    CHECK(std::fabs(t - 0.42) <= 2e-3);
  }
  SUBCASE("infinite quantile admits PASS everywhere") {
    const auto cal = manual_calibrator({0.1}, constant_model(0.2));
    CHECK(conformal_score_threshold(cal, kInf, 1e-3) == 0.0);
  }
  SUBCASE("PASS never included") {
    const auto cal = manual_calibrator({0.1}, constant_model(0.2));
    try {
      conformal_score_threshold(cal, 0.5, 1e-3);  // needs p >= 0.5 but p = 0.2
      FAIL("expected PassNeverIncluded");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::PassNeverIncluded);
    }
  }
  SUBCASE("interior acceptance region uses the suffix rule") {
    // eta = 50 (x-0.3)(x-0.5)(x-0.7) + logit(0.7): PASS region at q = 0.3 is
    // (0.3, 0.5) and (0.7, 1], so the threshold lands on 0.7.
    CalibratedClassifier m;
    m.feature_map = FeatureMap::polynomial(3);
    m.feature_map.normalization = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
    m.coefficients = {-5.25 + std::log(0.7 / 0.3), 35.5, -75.0, 50.0};
    m.fit_diagnostics.converged = true;
    const auto cal = manual_calibrator({0.1}, m);
    const double t = conformal_score_threshold(cal, 0.3, 1e-3);
    CHECK(t == doctest::Approx(0.7).epsilon(2e-3));
  }
}

TEST_CASE("evaluate reports the same threshold as the extraction helper") {
  const ScoreDataset fit_ds = synth::beta_mixture(600, 2, 8, 8, 2, 50);
  const ScoreDataset cal_ds = synth::beta_mixture(400, 2, 8, 8, 2, 51);
  const ScoreDataset test_ds = synth::beta_mixture(300, 2, 8, 8, 2, 52);
  const auto cal = calibrate(fit_logistic(fit_ds, FeatureMap::identity(), 1e-6), cal_ds);
  const double q = conformal_quantile(cal, 0.2);
  const ConformalEvaluation ev = evaluate(cal, q, test_ds, 0.2);
  CHECK(ev.threshold_score == conformal_score_threshold(cal, q, 1e-3));
  CHECK(ev.coverage >= 0.7);
  CHECK(ev.avg_width >= ev.coverage);  // width counts every included label
}

TEST_CASE("single-split coverage is near the target") {
  double total = 0.0;
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    const ScoreDataset fit_ds = synth::beta_mixture(1000, 2, 8, 8, 2, 60 + s);
    const ScoreDataset cal_ds = synth::beta_mixture(1000, 2, 8, 8, 2, 70 + s);
    const ScoreDataset test_ds = synth::beta_mixture(1000, 2, 8, 8, 2, 80 + s);
    const auto cal = calibrate(fit_logistic(fit_ds, FeatureMap::identity(), 1e-6), cal_ds);
    const double q = conformal_quantile(cal, 0.1);
    total += evaluate_sets(cal, q, test_ds, 0.1).coverage;
  }
  const double mean = total / seeds;
  CHECK(mean > 0.86);
  CHECK(mean < 0.94);
}

TEST_CASE("evaluation rows export with the documented columns") {
  const auto cal = manual_calibrator({0.2, 0.4, 0.6, 0.8}, monotone_model(-4.0, 8.0));
  const ScoreDataset test = synth::beta_mixture(50, 2, 8, 8, 2, 90);
  std::vector<std::pair<double, ConformalEvaluation>> rows;
  for (double level : {0.8, 0.9}) {
    const double q = conformal_quantile(cal, 1.0 - level);
    rows.emplace_back(level, evaluate(cal, q, test, 1.0 - level));
  }
  const auto path = cli::temp_dir() / "conformal_rows.csv";
  write_evaluations_csv(path, "uptrain", rows);
  const std::string body = cli::slurp(path);
  CHECK(body.rfind("library,confidence,threshold,coverage,width\n", 0) == 0);
  CHECK(std::count(body.begin(), body.end(), '\n') == 3);
  CHECK(body.find("uptrain,0.8,") != std::string::npos);
}

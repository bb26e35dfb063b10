#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "support/cli_runner.hpp"
#include "support/synth.hpp"
#include "threshcal/errors.hpp"
#include "threshcal/recall_curve.hpp"

using namespace threshcal;

namespace {

double brute_recall(const ScoreDataset& ds, double t) {
  std::size_t hit = 0, total = 0;
  for (const auto& r : ds.records) {
    if (r.label != Label::PASS) continue;
    ++total;
    hit += r.score >= t;
  }
  return static_cast<double>(hit) / total;
}

}  // namespace

TEST_CASE("hand-checked curve") {
  const ScoreDataset ds = synth::from_vectors({0.2, 0.8, 0.1}, {1, 1, 0});
  const RecallCurve c = empirical_recall_curve(ds);
  REQUIRE(c.points.size() == 4);  // 0 plus three unique scores
  CHECK(c.positives_total == 2);
  CHECK(c.points[0].threshold == 0.0);
  CHECK(c.points[0].recall == 1.0);
  CHECK(c.points[1].threshold == doctest::Approx(0.1));
  CHECK(c.points[1].recall == 1.0);
  CHECK(c.points[2].threshold == doctest::Approx(0.2));
  CHECK(c.points[2].recall == 1.0);
  CHECK(c.points[3].threshold == doctest::Approx(0.8));
  CHECK(c.points[3].recall == 0.5);
  CHECK(recall_at(ds, 0.9) == 0.0);  // above every score
}

TEST_CASE("curve equals brute force on random tied data") {
  for (unsigned seed = 0; seed < 25; ++seed) {
    const ScoreDataset ds = synth::random_tied(40 + seed * 6, seed, 0.4);
    if (ds.count(Label::PASS) == 0) continue;
    const RecallCurve c = empirical_recall_curve(ds);
    double prev_t = -1.0, prev_r = 2.0;
    for (const auto& p : c.points) {
      CHECK(p.recall == brute_recall(ds, p.threshold));
      CHECK(p.threshold > prev_t);  // strictly increasing
      CHECK(p.recall <= prev_r);    // non-increasing
      prev_t = p.threshold;
      prev_r = p.recall;
    }
  }
}

TEST_CASE("recall threshold is maximal") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (unsigned seed = 0; seed < 40; ++seed) {
    const ScoreDataset ds = synth::random_tied(30 + seed * 4, 100 + seed, 0.5);
    if (ds.count(Label::PASS) == 0) continue;
    const double target = 0.05 + 0.9 * u(gen);
    const double t = recall_threshold(ds, target);
    CHECK(brute_recall(ds, t) >= target);

    // next larger unique score must miss the target
    std::vector<double> uniq = ds.scores();
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    const auto it = std::upper_bound(uniq.begin(), uniq.end(), t);
    if (it != uniq.end()) {
      CHECK(brute_recall(ds, *it) < target);
    }
  }
}

TEST_CASE("target one lands on the minimum PASS score") {
  const ScoreDataset ds = synth::from_vectors({0.15, 0.6, 0.35, 0.05}, {1, 1, 1, 0});
  CHECK(recall_threshold(ds, 1.0) == doctest::Approx(0.15));
}

TEST_CASE("recall threshold is non-increasing in the target") {
  const ScoreDataset ds = synth::beta_mixture(400, 2, 8, 8, 2, 3);
  double prev = 1e9;
  for (double target : {0.5, 0.7, 0.8, 0.9, 0.99}) {
    const double t = recall_threshold(ds, target);
    CHECK(t <= prev);
    prev = t;
  }
}

TEST_CASE("no positives raises") {
  const ScoreDataset ds = synth::from_vectors({0.2, 0.4}, {0, 0});
  try {
    empirical_recall_curve(ds);
    FAIL("expected NoPositves");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoPositives);
  }
  CHECK_THROWS_AS(recall_threshold(ds, 0.9), Error);
}

TEST_CASE("target must lie in (0,1]") {
  const ScoreDataset ds = synth::from_vectors({0.2, 0.4}, {1, 0});
  CHECK_THROWS_AS(recall_threshold(ds, 0.0), Error);
  CHECK_THROWS_AS(recall_threshold(ds, 1.5), Error);
}

TEST_CASE("csv export reproduces the curve") {
  const ScoreDataset ds = synth::beta_mixture(100, 2, 8, 8, 2, 9);
  const RecallCurve c = empirical_recall_curve(ds);
  const auto path = cli::temp_dir() / "recall.csv";
  write_recall_csv(c, path);
  const std::string body = cli::slurp(path);
  CHECK(body.rfind("threshold,recall\n", 0) == 0);
  CHECK(static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n')) ==
        c.points.size() + 1);
}

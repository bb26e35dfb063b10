#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "support/cli_runner.hpp"
#include "support/synth.hpp"
#include "threshcal/density.hpp"
#include "threshcal/errors.hpp"

using namespace threshcal;

TEST_CASE("degenerate samples fall back to bandwidth 0.01") {
  const std::vector<double> s = {0.4, 0.4, 0.4, 0.4};
  CHECK(fit_kde(s).bandwidth == doctest::Approx(0.01));
}

TEST_CASE("silverman bandwidth on a near-normal sample") {
  std::mt19937 gen(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> s(1000);
  for (auto& x : s) x = nd(gen);
  const KdeModel model = fit_kde(s);

  // hand recomputation of the rule on the drawn sample
  double mean = 0;
  for (double x : s) mean += x;
  mean /= s.size();
  double ss = 0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (s.size() - 1));
  std::vector<double> sorted = s;
  std::sort(sorted.begin(), sorted.end());
  auto q = [&](double p) {
    const double h = p * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    return sorted[lo] + (h - lo) * (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);
  };
  const double hand =
      0.9 * std::min(sd, (q(0.75) - q(0.25)) / 1.34) * std::pow(1000.0, -0.2);
  CHECK(model.bandwidth == doctest::Approx(hand).epsilon(1e-12));
  // sigma ~ 1, so the rule lands near 0.9 n^(-1/5)
  CHECK(model.bandwidth == doctest::Approx(0.9 * std::pow(1000.0, -0.2)).epsilon(0.15));
}

TEST_CASE("explicit bandwidth is carried verbatim") {
  const std::vector<double> s = {0.1, 0.9};
  CHECK(fit_kde(s, 0.05).bandwidth == 0.05);
  CHECK_THROWS_AS(fit_kde(s, -1.0), Error);
}

TEST_CASE("automatic bandwidth needs two samples") {
  const std::vector<double> one = {0.5};
  CHECK_THROWS_AS(fit_kde(one), Error);
  CHECK(fit_kde(one, 0.1).bandwidth == 0.1);  // explicit bandwidth is fine
}

TEST_CASE("kde pdf closed form and tail decay") {
  KdeModel m;
  m.sample = {0.5};
  m.bandwidth = 0.1;
  CHECK(kde_pdf(m, 0.5) == doctest::Approx(3.9894228).epsilon(1e-6));
  CHECK(kde_pdf(m, 5.0) < 1e-12);
  CHECK(kde_pdf(m, -4.0) < 1e-12);
}

TEST_CASE("kde pdf integrates to one") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(200);
  for (auto& x : s) x = u(gen);
  const KdeModel m = fit_kde(s);

  const double lo = -6.0 * m.bandwidth;
  const double hi = 1.0 + 6.0 * m.bandwidth;
  const int steps = 4000;
  double integral = 0.0;
  double prev = kde_pdf(m, lo);
  for (int i = 1; i <= steps; ++i) {
    const double x = lo + (hi - lo) * i / steps;
    const double cur = kde_pdf(m, x);
    CHECK(cur >= 0.0);
    integral += 0.5 * (prev + cur) * (hi - lo) / steps;
    prev = cur;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("histogram threshold splits a bimodal mixture near the density valley") {
  std::mt19937 gen(21);
  std::vector<double> s;
  for (int i = 0; i < 5000; ++i) {
    s.push_back(i % 2 ? synth::beta_draw(gen, 2, 20) : synth::beta_draw(gen, 20, 2));
  }
  const double t = histogram_local_min_threshold(s, 50);
  CHECK(t > 0.3);
  CHECK(t < 0.7);

  // oracle: valley of the true mixture density on a fine grid
  auto beta_pdf = [](double x, double a, double b) {
    return std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) + std::lgamma(a + b) -
                    std::lgamma(a) - std::lgamma(b));
  };
  double best_x = 0, best_v = 1e300;
  for (int i = 1; i < 1000; ++i) {
    const double x = i / 1000.0;
    const double v = 0.5 * beta_pdf(x, 2, 20) + 0.5 * beta_pdf(x, 20, 2);
    if (x > 0.05 && x < 0.95 && v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  CHECK(std::fabs(t - best_x) < 0.1);
}

TEST_CASE("unimodal samples have no bimodal structure") {
  std::mt19937 gen(8);
  std::vector<double> s;
  for (int i = 0; i < 2000; ++i) s.push_back(synth::beta_draw(gen, 5, 5));
  try {
    histogram_local_min_threshold(s, 20);
    FAIL("expected NoBimodalStructure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoBimodalStructure);
  }
}

TEST_CASE("two tight clusters separate cleanly") {
  std::vector<double> s;
  for (int i = 0; i < 100; ++i) {
    s.push_back(0.1 + 1e-4 * (i % 7));
    s.push_back(0.9 - 1e-4 * (i % 5));
  }
  const double t = histogram_local_min_threshold(s, 20);
  CHECK(t > 0.1);
  CHECK(t < 0.9);
}

TEST_CASE("bayes posterior closed forms") {
  PosteriorModel m;
  m.kde_pass.sample = {0.5};
  m.kde_pass.bandwidth = 0.1;
  m.kde_fail.sample = {0.5};
  m.kde_fail.bandwidth = 0.1;
  m.prior_pass = 0.5;
  SUBCASE("equal likelihoods, even prior") {
    CHECK(bayes_posterior(m, 0.31) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("likelihood ratio 3 gives 0.75") {
    // shift the FAIL kernel so pdf_pass/pdf_fail = 3 exactly at x = 0.5
    const double delta = 0.1 * std::sqrt(2.0 * std::log(3.0));
    m.kde_fail.sample = {0.5 + delta};
    CHECK(bayes_posterior(m, 0.5) == doctest::Approx(0.75).epsilon(1e-9));
  }
  SUBCASE("zero evidence far from all mass") {
    m.kde_pass.bandwidth = 0.005;
    m.kde_fail.bandwidth = 0.005;
    try {
      bayes_posterior(m, 40.0);
      FAIL("expected ZeroEvidence");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ZeroEvidence);
    }
  }
}

TEST_CASE("posterior normalizes and ignores sample duplication") {
  std::mt19937 gen(31);
  std::uniform_real_distribution<double> u(0, 1);
  const ScoreDataset ds = synth::beta_mixture(300, 2, 8, 8, 2, 13);
  const PosteriorModel m = fit_posterior(ds);
  PosteriorModel swapped;
  swapped.kde_pass = m.kde_fail;
  swapped.kde_fail = m.kde_pass;
  swapped.prior_pass = 1.0 - m.prior_pass;
  PosteriorModel doubled = m;
  doubled.kde_pass.sample.insert(doubled.kde_pass.sample.end(), m.kde_pass.sample.begin(),
                                 m.kde_pass.sample.end());
  doubled.kde_fail.sample.insert(doubled.kde_fail.sample.end(), m.kde_fail.sample.begin(),
                                 m.kde_fail.sample.end());
  for (int i = 0; i < 50; ++i) {
    const double x = u(gen);
    const double p1 = bayes_posterior(m, x);
    CHECK(p1 + bayes_posterior(swapped, x) == doctest::Approx(1.0).epsilon(1e-12));
    // duplicating every kernel rescales both likelihoods identically
    CHECK(bayes_posterior(doubled, x) == doctest::Approx(p1).epsilon(1e-12));
  }
}

TEST_CASE("kde threshold sits in the gap of separated classes") {
  std::mt19937 gen(4);
  std::uniform_real_distribution<double> lo(0.02, 0.2), hi(0.8, 0.98);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(lo(gen));
    labels.push_back(0);
    scores.push_back(hi(gen));
    labels.push_back(1);
  }
  const double t = kde_threshold(synth::from_vectors(scores, labels), 0.9);
  CHECK(t > 0.2);
  CHECK(t < 0.8);
}

TEST_CASE("unreachable confidence on fully overlapping classes") {
  // same distribution for both labels: posterior hugs the prior 0.5
  std::mt19937 gen(6);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 400; ++i) {
    scores.push_back(synth::beta_draw(gen, 4, 4));
    labels.push_back(i % 2);
  }
  try {
    kde_threshold(synth::from_vectors(scores, labels), 0.999);
    FAIL("expected UnreachableConfidence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnreachableConfidence);
  }
}

TEST_CASE("kde threshold is monotone in confidence") {
  const ScoreDataset ds = synth::beta_mixture(1500, 2, 8, 8, 2, 23);
  const PosteriorModel m = fit_posterior(ds);
  double prev = 0.0;
  for (double c : {0.5, 0.6, 0.7, 0.8, 0.9}) {
    const double t = kde_threshold(m, c, 1e-3);
    CHECK(t >= prev);
    prev = t;
  }
}

TEST_CASE("density csv export has the documented columns") {
  const ScoreDataset ds = synth::beta_mixture(200, 2, 8, 8, 2, 2);
  const auto path = cli::temp_dir() / "density.csv";
  write_density_csv(fit_posterior(ds), path, 0.01);
  const std::string body = cli::slurp(path);
  CHECK(body.rfind("x,pdf_fail,pdf_pass,posterior_pass\n", 0) == 0);
  CHECK(std::count(body.begin(), body.end(), '\n') == 102);  // header + 101 grid points
}

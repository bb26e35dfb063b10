#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/oracles.hpp"
#include "threshcal/errors.hpp"
#include "threshcal/stats_tests.hpp"

using namespace threshcal;

TEST_CASE("identical groups give t=0, p=1") {
  const std::vector<double> a = {0.1, 0.5, 0.9};
  const TestResult r = independent_t_test(a, a, true);
  CHECK(r.statistic == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pooled t matches the textbook formula") {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {2, 3, 4, 5};
  const TestResult r = independent_t_test(a, b, true);

  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  auto var = [&](const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / (v.size() - 1);
  };
  const double sp2 = ((a.size() - 1) * var(a) + (b.size() - 1) * var(b)) /
                     (a.size() + b.size() - 2.0);
  const double expected =
      (mean(a) - mean(b)) / std::sqrt(sp2 * (1.0 / a.size() + 1.0 / b.size()));
  CHECK(r.statistic == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.3153335962012297).epsilon(1e-9));
}

TEST_CASE("welch is the default and differs from pooled under unequal variance") {
  const std::vector<double> a = {0.1, 0.2, 0.15, 0.12, 0.18, 0.11};
  const std::vector<double> b = {0.4, 0.9, 0.1, 0.95, 0.05};
  const TestResult welch = independent_t_test(a, b);
  const TestResult pooled = independent_t_test(a, b, true);
  CHECK(welch.statistic != doctest::Approx(pooled.statistic).epsilon(1e-6));
  CHECK(welch.p_value > 0.0);
  CHECK(welch.p_value < 1.0);
}

TEST_CASE("constant equal samples raise ZeroVariance, unequal give infinite t") {
  const std::vector<double> c5 = {0.5, 0.5, 0.5};
  const std::vector<double> c7 = {0.7, 0.7};
  try {
    independent_t_test(c5, c5, true);
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ZeroVariance);
  }
  const TestResult r = independent_t_test(c7, c5, true);
  CHECK(std::isinf(r.statistic));
  CHECK(r.statistic > 0);
  CHECK(r.p_value == 0.0);
}

TEST_CASE("too few samples") {
  const std::vector<double> one = {0.5};
  const std::vector<double> two = {0.4, 0.6};
  CHECK_THROWS_AS(independent_t_test(one, two), Error);
  CHECK_THROWS_AS(mann_whitney_u({}, two), Error);
}

TEST_CASE("t statistic is antisymmetric and shift invariant") {
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> a(15), b(11);
    for (auto& x : a) x = u(gen);
    for (auto& x : b) x = u(gen);
    const double t_ab = independent_t_test(a, b).statistic;
    const double t_ba = independent_t_test(b, a).statistic;
    CHECK(t_ab == doctest::Approx(-t_ba).epsilon(1e-12));

    std::vector<double> a2 = a, b2 = b;
    for (auto& x : a2) x += 0.37;
    for (auto& x : b2) x += 0.37;
    CHECK(independent_t_test(a2, b2).statistic == doctest::Approx(t_ab).epsilon(1e-9));
  }
}

TEST_CASE("complete separation gives U = |a|*|b|") {
  const std::vector<double> a = {0.9, 0.8};
  const std::vector<double> b = {0.1, 0.2};
  const TestResult r = mann_whitney_u(a, b);
  CHECK(r.statistic == 4.0);
}

TEST_CASE("U equals exhaustive pair counting, ties included") {
  std::mt19937 gen(1234);
  std::uniform_int_distribution<int> grid(0, 12);
  std::uniform_int_distribution<std::size_t> len(1, 100);
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<double> a(len(gen)), b(len(gen));
    for (auto& x : a) x = grid(gen) / 12.0;
    for (auto& x : b) x = grid(gen) / 12.0;
    const double u_impl = mann_whitney_u(a, b).statistic;
    CHECK(u_impl == oracles::brute_force_u(a, b));
  }
}

TEST_CASE("U(a,b) + U(b,a) = |a|*|b|") {
  std::mt19937 gen(77);
  std::uniform_int_distribution<int> grid(0, 6);
  for (int rep = 0; rep < 30; ++rep) {
    std::vector<double> a(23), b(17);
    for (auto& x : a) x = grid(gen) / 6.0;
    for (auto& x : b) x = grid(gen) / 6.0;
    const double sum = mann_whitney_u(a, b).statistic + mann_whitney_u(b, a).statistic;
    CHECK(sum == doctest::Approx(23.0 * 17.0).epsilon(1e-12));
  }
}

TEST_CASE("widely separated large samples floor the p-value at zero") {
  std::vector<double> a(3000), b(3000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 0.9 + 1e-5 * i / a.size();
    b[i] = 0.1 + 1e-5 * i / b.size();
  }
  CHECK(independent_t_test(a, b).p_value == 0.0);
  CHECK(mann_whitney_u(a, b).p_value == 0.0);
}

TEST_CASE("all-tied data yields p = 1") {
  const std::vector<double> a(5, 0.5), b(8, 0.5);
  const TestResult r = mann_whitney_u(a, b);
  CHECK(r.statistic == doctest::Approx(20.0));  // all ties, half counted
  CHECK(r.p_value == 1.0);
}

TEST_CASE("null calibration: identical distributions rarely reject") {
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> u(0, 1);
  int ok_t = 0, ok_u = 0;
  const int runs = 20;
  for (int rep = 0; rep < runs; ++rep) {
    std::vector<double> a(120), b(140);
    for (auto& x : a) x = u(gen);
    for (auto& x : b) x = u(gen);
    ok_t += independent_t_test(a, b).p_value > 0.05;
    ok_u += mann_whitney_u(a, b).p_value > 0.05;
  }
  CHECK(ok_t >= 18);
  CHECK(ok_u >= 18);
}

TEST_CASE("results serialize with the documented fields") {
  const std::vector<double> a = {0.8, 0.9, 0.7};
  const std::vector<double> b = {0.2, 0.1, 0.3};
  nlohmann::json j;
  to_json(j, mann_whitney_u(a, b));
  CHECK(j["method"] == "mann_whitney_u");
  CHECK(j["n_a"] == 3);
  CHECK(j["n_b"] == 3);
  CHECK(j.contains("statistic"));
  CHECK(j.contains("p_value"));
}

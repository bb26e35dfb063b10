#pragma once

// Test-only oracles. Everything here is computed independently of the
// library code paths it is used to check.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "threshcal/dataset.hpp"

namespace oracles {

// U statistic by exhaustive pair counting (1 per win, 0.5 per tie).
inline double brute_force_u(std::span<const double> a, std::span<const double> b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) u += 1.0;
      else if (x == y) u += 0.5;
    }
  }
  return u;
}

// AUC as the pairwise win rate P(value_pos > value_neg) + 0.5 P(tie).
inline double pairwise_auc(std::span<const double> values,
                           std::span<const threshcal::Label> labels) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < values.size(); ++i) {
    (labels[i] == threshcal::Label::PASS ? pos : neg).push_back(values[i]);
  }
  return brute_force_u(pos, neg) / (static_cast<double>(pos.size()) * neg.size());
}

// erf from its Maclaurin series in long double; converges for the |x| the
// tests use (inverse-normal arguments stay below ~3).
inline long double erf_series(long double x) {
  const long double two_over_sqrt_pi = 1.128379167095512573896L;
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs((double)add) < 1e-22) break;
  }
  return two_over_sqrt_pi * sum;
}

inline long double normal_cdf_series(long double z) {
  return 0.5L * (1.0L + erf_series(z / 1.414213562373095048802L));
}

// Inverse normal by bisection on the series CDF.
inline double inverse_normal_bisect(double p) {
  long double lo = -10.0L, hi = 10.0L;
  while (hi - lo > 1e-13L) {
    const long double mid = 0.5L * (lo + hi);
    if (normal_cdf_series(mid) < p) lo = mid;
    else hi = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

// Gradient descent with backtracking on the logistic negative
// log-likelihood (plus an optional ridge term on non-intercept
// coefficients). X rows carry an explicit leading 1.
struct GdFit {
  std::vector<double> beta;
  double deviance = 0.0;
  double grad_maxnorm = 0.0;
};

// A gradient max-norm of 1e-5 puts the deviance within ~1e-10 of the
// optimum (quadratic remainder), far inside the 1e-6 relative comparisons
// the tests make.
inline GdFit gd_logistic(const std::vector<std::vector<double>>& x,
                         const std::vector<int>& y, double lambda,
                         int max_iter = 200000, double tol = 1e-5) {
  const std::size_t n = x.size();
  const std::size_t m = x.front().size();
  std::vector<double> beta(m, 0.0);

  auto nll = [&](const std::vector<double>& b) {
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < m; ++j) eta += b[j] * x[i][j];
      loss += (eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta))) -
              y[i] * eta;
    }
    for (std::size_t j = 1; j < m; ++j) loss += 0.5 * lambda * b[j] * b[j];
    return loss;
  };
  auto gradient = [&](const std::vector<double>& b) {
    std::vector<double> g(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double eta = 0.0;
      for (std::size_t j = 0; j < m; ++j) eta += b[j] * x[i][j];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t j = 0; j < m; ++j) g[j] += (p - y[i]) * x[i][j];
    }
    for (std::size_t j = 1; j < m; ++j) g[j] += lambda * b[j];
    return g;
  };

  double loss = nll(beta);
  double step = 1.0 / n;
  GdFit out;
  for (int it = 0; it < max_iter; ++it) {
    const auto g = gradient(beta);
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::fabs(v));
    out.grad_maxnorm = gmax;
    if (gmax < tol) break;
    double t = step * 4.0;
    std::vector<double> cand(m);
    double cand_loss;
    for (;;) {
      for (std::size_t j = 0; j < m; ++j) cand[j] = beta[j] - t * g[j];
      cand_loss = nll(cand);
      if (cand_loss <= loss || t < 1e-18) break;
      t *= 0.5;
    }
    step = t;
    beta = cand;
    loss = cand_loss;
  }
  double pure_nll = loss;
  for (std::size_t j = 1; j < m; ++j) pure_nll -= 0.5 * lambda * beta[j] * beta[j];
  out.beta = beta;
  out.deviance = 2.0 * pure_nll;
  return out;
}

}  // namespace oracles

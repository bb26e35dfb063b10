#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "threshcal/dataset.hpp"

namespace threshcal {

enum class FeatureKind { IDENTITY, POLYNOMIAL, SPLINE };

// Score -> feature vector. IDENTITY and POLYNOMIAL columns are standardized
// with the stored (mean, scale) pairs; the spline basis is left unscaled so
// the smoothness penalty acts on raw basis coefficients.
struct FeatureMap {
  FeatureKind kind = FeatureKind::IDENTITY;
  int degree = 1;                   // POLYNOMIAL
  std::vector<double> knots;        // SPLINE interior knots, ascending in (0,1)
  int spline_degree = 3;
  std::vector<std::pair<double, double>> normalization;  // per-feature (mean, scale)

  std::size_t dimension() const;
  std::vector<double> features(double score) const;
  // The spline basis spans constants, so SPLINE fits carry no separate
  // intercept column (the intercept coefficient is fixed at 0).
  bool has_intercept() const { return kind != FeatureKind::SPLINE; }

  static FeatureMap identity();
  static FeatureMap polynomial(int degree);
};

struct FitDiagnostics {
  int iterations = 0;
  double deviance = 0.0;  // 2 * negative log-likelihood, penalty excluded
  bool converged = false;
};

struct CalibratedClassifier {
  FeatureMap feature_map;
  std::vector<double> coefficients;  // beta0..betap over mapped features
  double penalty_lambda = 0.0;
  FitDiagnostics fit_diagnostics;

  double linear_predictor(double score) const;
  // Coefficients mapped back through the stored normalization (IDENTITY and
  // POLYNOMIAL maps); SPLINE coefficients are returned as stored.
  std::vector<double> original_coefficients() const;
};

void to_json(nlohmann::json& j, const CalibratedClassifier& m);
void from_json(const nlohmann::json& j, CalibratedClassifier& m);

// Penalized IRLS fit of P(PASS|score) with a ridge penalty on the
// non-intercept coefficients. Convergence: max |delta beta| < 1e-8 within
// 100 iterations.
CalibratedClassifier fit_logistic(const ScoreDataset& dataset, FeatureMap feature_map,
                                  double penalty_lambda);

// Cubic B-spline GAM with interior knots at empirical score quantiles and a
// second-difference smoothness penalty (divided differences over the
// Greville abscissae, so very large lambda flattens the logit to an affine
// function of the score). lambda = nullopt picks it from {1e-3..1e3} by
// 3-fold cross-validated deviance.
CalibratedClassifier fit_gam(const ScoreDataset& dataset, int knot_count,
                             std::optional<double> lambda);

// P(PASS | score), clamped to the open interval (0,1).
double predict_prob(const CalibratedClassifier& model, double score);

// Max-norm of the penalized log-likelihood gradient at the stored
// coefficients (first-order optimality check).
double fit_gradient_maxnorm(const CalibratedClassifier& model, const ScoreDataset& dataset);

struct CrossingSet {
  double target_prob = 0.0;
  std::vector<double> crossings;  // ascending, refined to 1e-6
  double canonical_threshold = 0.0;
};

// Scans P(PASS|x) on the [0,1] grid and refines every crossing of
// target_prob by bisection. The canonical threshold is the smallest x*
// with P(PASS) >= target on every grid point >= x* (suffix rule); when the
// probability dips back under the target at the right edge, it falls back
// to the largest upward crossing.
CrossingSet invert_probability_threshold(const CalibratedClassifier& model,
                                         double target_prob, double grid_step = 1e-3);

}  // namespace threshcal

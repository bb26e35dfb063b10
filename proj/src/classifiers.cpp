#include "threshcal/classifiers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "bspline.hpp"
#include "csv_detail.hpp"
#include "threshcal/density.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

using nlohmann::json;

namespace {

constexpr double kConvergenceTol = 1e-8;
constexpr int kMaxIterations = 100;
constexpr double kSeparationNorm = 1e6;
constexpr double kSplineRidge = 1e-8;
constexpr std::uint64_t kGamCvSeed = 0x5eedULL;

double sigmoid(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// log(1 + e^eta) - y*eta, evaluated without overflow.
double bernoulli_nll(double eta, double y) {
  const double softplus = eta > 0.0 ? eta + std::log1p(std::exp(-eta))
                                    : std::log1p(std::exp(eta));
  return softplus - y * eta;
}

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::MatrixXd penalty;   // includes any lambda factor
  bool check_separation = false;
};

double penalized_loss(const Design& d, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = d.X * beta;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) loss += bernoulli_nll(eta[i], d.y[i]);
  return loss + 0.5 * beta.dot(d.penalty * beta);
}

struct IrlsOutcome {
  Eigen::VectorXd beta;
  FitDiagnostics diagnostics;
};

IrlsOutcome run_irls(const Design& d) {
  const Eigen::Index m = d.X.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
  double loss = penalized_loss(d, beta);
  IrlsOutcome out;
  out.diagnostics.converged = false;

  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    out.diagnostics.iterations = iter;
    const Eigen::VectorXd eta = d.X * beta;
    Eigen::VectorXd p(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-10);
    }
    const Eigen::VectorXd ascent = d.X.transpose() * (d.y - p) - d.penalty * beta;
    Eigen::MatrixXd h = d.X.transpose() * w.asDiagonal() * d.X + d.penalty;
    h.diagonal().array() += 1e-12;  // solver jitter, not part of the loss
    const Eigen::VectorXd delta = h.ldlt().solve(ascent);

    double step = 1.0;
    double new_loss = loss;
    for (int half = 0; half < 60; ++half) {
      new_loss = penalized_loss(d, beta + step * delta);
      if (new_loss <= loss + 1e-12) break;
      step *= 0.5;
    }
    beta += step * delta;
    loss = std::min(loss, new_loss);

    if (d.check_separation && beta.cwiseAbs().maxCoeff() > kSeparationNorm) {
      raise(Errc::Separation, "unpenalized fit diverged (coefficient norm over 1e6)");
    }
    if ((step * delta).cwiseAbs().maxCoeff() < kConvergenceTol) {
      out.diagnostics.converged = true;
      break;
    }
  }

  const Eigen::VectorXd eta = d.X * beta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) nll += bernoulli_nll(eta[i], d.y[i]);
  out.diagnostics.deviance = 2.0 * nll;
  out.beta = std::move(beta);
  return out;
}

Eigen::MatrixXd design_matrix(const FeatureMap& map, const ScoreDataset& dataset) {
  const std::size_t dim = map.dimension();
  const bool intercept = map.has_intercept();
  Eigen::MatrixXd x(dataset.size(), dim + (intercept ? 1 : 0));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto f = map.features(dataset.records[i].score);
    Eigen::Index c = 0;
    if (intercept) x(i, c++) = 1.0;
    for (double v : f) x(i, c++) = v;
  }
  return x;
}

Eigen::VectorXd response_vector(const ScoreDataset& dataset) {
  Eigen::VectorXd y(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    y[i] = dataset.records[i].label == Label::PASS ? 1.0 : 0.0;
  }
  return y;
}

Eigen::MatrixXd ridge_penalty(std::size_t dim, double lambda) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(dim + 1, dim + 1);
  for (std::size_t j = 1; j <= dim; ++j) p(j, j) = lambda;  // intercept unpenalized
  return p;
}

// Second divided differences over the Greville abscissae, one row per
// interior triple, each row scaled to unit norm. The null space holds
// exactly the coefficient vectors affine in the abscissae, which the basis
// maps to functions affine in the score.
Eigen::MatrixXd smoothness_penalty(const detail::BsplineBasis& basis, double lambda) {
  const auto xi = basis.greville();
  const int m = basis.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(std::max(m - 2, 0), m);
  for (int j = 0; j + 2 < m; ++j) {
    const double c0 = 1.0 / ((xi[j] - xi[j + 1]) * (xi[j] - xi[j + 2]));
    const double c1 = 1.0 / ((xi[j + 1] - xi[j]) * (xi[j + 1] - xi[j + 2]));
    const double c2 = 1.0 / ((xi[j + 2] - xi[j]) * (xi[j + 2] - xi[j + 1]));
    const double norm = std::sqrt(c0 * c0 + c1 * c1 + c2 * c2);
    d(j, j) = c0 / norm;
    d(j, j + 1) = c1 / norm;
    d(j, j + 2) = c2 / norm;
  }
  Eigen::MatrixXd p = lambda * (d.transpose() * d);
  p.diagonal().array() += kSplineRidge;
  return p;
}

std::vector<double> raw_features(const FeatureMap& map, double score) {
  switch (map.kind) {
    case FeatureKind::IDENTITY:
      return {score};
    case FeatureKind::POLYNOMIAL: {
      std::vector<double> f(map.degree);
      double v = 1.0;
      for (int j = 0; j < map.degree; ++j) {
        v *= score;
        f[j] = v;
      }
      return f;
    }
    case FeatureKind::SPLINE:
      return detail::BsplineBasis(map.knots, map.spline_degree).row(score);
  }
  return {};
}

void compute_normalization(FeatureMap& map, const ScoreDataset& dataset) {
  if (map.kind == FeatureKind::SPLINE || !map.normalization.empty()) return;
  const std::size_t dim = map.dimension();
  std::vector<double> mean(dim, 0.0), ss(dim, 0.0);
  FeatureMap raw = map;  // evaluate un-normalized columns
  raw.normalization.clear();
  for (const auto& r : dataset.records) {
    const auto f = raw_features(raw, r.score);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += f[j];
  }
  const double n = static_cast<double>(dataset.size());
  for (std::size_t j = 0; j < dim; ++j) mean[j] /= n;
  for (const auto& r : dataset.records) {
    const auto f = raw_features(raw, r.score);
    for (std::size_t j = 0; j < dim; ++j) ss[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
  }
  map.normalization.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    double scale = n > 1 ? std::sqrt(ss[j] / (n - 1.0)) : 0.0;
    if (scale < 1e-12) scale = 1.0;
    map.normalization[j] = {mean[j], scale};
  }
}

CalibratedClassifier fit_with_penalty(const ScoreDataset& dataset, FeatureMap map,
                                      const Eigen::MatrixXd& penalty, double lambda,
                                      bool check_separation) {
  Design d;
  d.X = design_matrix(map, dataset);
  d.y = response_vector(dataset);
  d.penalty = penalty;
  d.check_separation = check_separation;
  IrlsOutcome out = run_irls(d);
  if (!out.diagnostics.converged) {
    // Separated data drives the unpenalized deviance to an exact zero long
    // before the coefficient norm overflows the damped Newton iteration.
    if (check_separation && out.diagnostics.deviance < 1e-6) {
      raise(Errc::Separation, "unpenalized fit diverged (deviance collapsed to zero)");
    }
    raise(Errc::NotConverged,
          "IRLS did not converge in " + std::to_string(kMaxIterations) + " iterations");
  }
  CalibratedClassifier model;
  model.feature_map = std::move(map);
  model.penalty_lambda = lambda;
  model.fit_diagnostics = out.diagnostics;
  if (model.feature_map.has_intercept()) {
    model.coefficients.assign(out.beta.data(), out.beta.data() + out.beta.size());
  } else {
    model.coefficients.assign(1, 0.0);
    model.coefficients.insert(model.coefficients.end(), out.beta.data(),
                              out.beta.data() + out.beta.size());
  }
  return model;
}

}  // namespace

std::size_t FeatureMap::dimension() const {
  switch (kind) {
    case FeatureKind::IDENTITY:
      return 1;
    case FeatureKind::POLYNOMIAL:
      return static_cast<std::size_t>(degree);
    case FeatureKind::SPLINE:
      return knots.size() + static_cast<std::size_t>(spline_degree) + 1;
  }
  return 0;
}

std::vector<double> FeatureMap::features(double score) const {
  std::vector<double> f = raw_features(*this, score);
  for (std::size_t j = 0; j < normalization.size() && j < f.size(); ++j) {
    f[j] = (f[j] - normalization[j].first) / normalization[j].second;
  }
  return f;
}

FeatureMap FeatureMap::identity() { return FeatureMap{}; }

FeatureMap FeatureMap::polynomial(int degree) {
  if (degree < 1 || degree > 6) raise(Errc::OutOfRange, "polynomial degree must be 1..6");
  FeatureMap m;
  m.kind = FeatureKind::POLYNOMIAL;
  m.degree = degree;
  return m;
}

double CalibratedClassifier::linear_predictor(double score) const {
  const auto f = feature_map.features(score);
  double eta = coefficients.at(0);
  for (std::size_t j = 0; j < f.size(); ++j) eta += coefficients.at(j + 1) * f[j];
  return eta;
}

std::vector<double> CalibratedClassifier::original_coefficients() const {
  if (feature_map.normalization.empty()) return coefficients;
  std::vector<double> out(coefficients.size());
  double intercept = coefficients[0];
  for (std::size_t j = 0; j + 1 < coefficients.size(); ++j) {
    const auto [m, s] = feature_map.normalization[j];
    out[j + 1] = coefficients[j + 1] / s;
    intercept -= coefficients[j + 1] * m / s;
  }
  out[0] = intercept;
  return out;
}

void to_json(json& j, const CalibratedClassifier& m) {
  const char* kind = m.feature_map.kind == FeatureKind::IDENTITY     ? "identity"
                     : m.feature_map.kind == FeatureKind::POLYNOMIAL ? "polynomial"
                                                                     : "spline";
  j = json{{"kind", kind},
           {"degree", m.feature_map.degree},
           {"knots", m.feature_map.knots},
           {"spline_degree", m.feature_map.spline_degree},
           {"normalization", m.feature_map.normalization},
           {"coefficients", m.coefficients},
           {"lambda", m.penalty_lambda},
           {"diagnostics",
            {{"iterations", m.fit_diagnostics.iterations},
             {"deviance", m.fit_diagnostics.deviance},
             {"converged", m.fit_diagnostics.converged}}}};
}

void from_json(const json& j, CalibratedClassifier& m) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") m.feature_map.kind = FeatureKind::IDENTITY;
  else if (kind == "polynomial") m.feature_map.kind = FeatureKind::POLYNOMIAL;
  else if (kind == "spline") m.feature_map.kind = FeatureKind::SPLINE;
  else raise(Errc::ConfigInvalid, "unknown feature map kind '" + kind + "'");
  j.at("degree").get_to(m.feature_map.degree);
  j.at("knots").get_to(m.feature_map.knots);
  j.at("spline_degree").get_to(m.feature_map.spline_degree);
  j.at("normalization").get_to(m.feature_map.normalization);
  j.at("coefficients").get_to(m.coefficients);
  j.at("lambda").get_to(m.penalty_lambda);
  const auto& d = j.at("diagnostics");
  d.at("iterations").get_to(m.fit_diagnostics.iterations);
  d.at("deviance").get_to(m.fit_diagnostics.deviance);
  d.at("converged").get_to(m.fit_diagnostics.converged);
}

CalibratedClassifier fit_logistic(const ScoreDataset& dataset, FeatureMap feature_map,
                                  double penalty_lambda) {
  if (!dataset.has_both_labels()) {
    raise(Errc::SingleClass, "logistic fit needs both PASS and FAIL records");
  }
  if (penalty_lambda < 0.0) raise(Errc::OutOfRange, "penalty_lambda must be >= 0");
  compute_normalization(feature_map, dataset);
  Eigen::MatrixXd penalty;
  if (feature_map.kind == FeatureKind::SPLINE) {
    detail::BsplineBasis basis(feature_map.knots, feature_map.spline_degree);
    penalty = smoothness_penalty(basis, penalty_lambda);
  } else {
    penalty = ridge_penalty(feature_map.dimension(), penalty_lambda);
  }
  return fit_with_penalty(dataset, std::move(feature_map), penalty, penalty_lambda,
                          penalty_lambda == 0.0);
}

namespace {

std::vector<double> quantile_knots(const ScoreDataset& dataset, int knot_count) {
  std::vector<double> sorted = dataset.scores();
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> knots;
  for (int i = 1; i <= knot_count; ++i) {
    const double p = static_cast<double>(i) / (knot_count + 1);
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double q = sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
    if (q <= 1e-9 || q >= 1.0 - 1e-9) continue;     // keep knots strictly inside (0,1)
    if (!knots.empty() && q - knots.back() <= 1e-9) continue;  // merge duplicates
    knots.push_back(q);
  }
  return knots;
}

}  // namespace

CalibratedClassifier fit_gam(const ScoreDataset& dataset, int knot_count,
                             std::optional<double> lambda) {
  if (!dataset.has_both_labels()) {
    raise(Errc::SingleClass, "GAM fit needs both PASS and FAIL records");
  }
  if (knot_count < 0) raise(Errc::OutOfRange, "knot_count must be >= 0");
  FeatureMap map;
  map.kind = FeatureKind::SPLINE;
  map.spline_degree = 3;
  map.knots = quantile_knots(dataset, knot_count);
  if (dataset.size() <= map.dimension()) {
    raise(Errc::TooFewSamples, "need more records than basis functions (" +
                                   std::to_string(map.dimension()) + ")");
  }

  double chosen = lambda.value_or(0.0);
  if (!lambda) {
    // 3-fold cross-validated deviance over a logarithmic grid; ties go to
    // the smoother fit.
    const FoldAssignment folds = stratified_kfold(dataset, 3, kGamCvSeed);
    double best_score = std::numeric_limits<double>::infinity();
    for (int e = -3; e <= 3; ++e) {
      const double lam = std::pow(10.0, e);
      double score = 0.0;
      bool feasible = true;
      for (int f = 0; f < 3 && feasible; ++f) {
        auto [train, test] = fold_split(dataset, folds, f);
        try {
          FeatureMap sub_map = map;
          detail::BsplineBasis basis(sub_map.knots, sub_map.spline_degree);
          CalibratedClassifier sub = fit_with_penalty(
              train, std::move(sub_map), smoothness_penalty(basis, lam), lam, false);
          for (const auto& r : test.records) {
            score += bernoulli_nll(sub.linear_predictor(r.score),
                                   r.label == Label::PASS ? 1.0 : 0.0);
          }
        } catch (const Error&) {
          feasible = false;
        }
      }
      if (feasible && score <= best_score) {
        best_score = score;
        chosen = lam;
      }
    }
    if (!std::isfinite(best_score)) {
      raise(Errc::NotConverged, "no lambda on the grid produced a converged fit");
    }
  } else if (chosen < 0.0) {
    raise(Errc::OutOfRange, "lambda must be >= 0");
  }

  detail::BsplineBasis basis(map.knots, map.spline_degree);
  return fit_with_penalty(dataset, std::move(map), smoothness_penalty(basis, chosen),
                          chosen, false);
}

double predict_prob(const CalibratedClassifier& model, double score) {
  const double p = sigmoid(model.linear_predictor(score));
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

double fit_gradient_maxnorm(const CalibratedClassifier& model, const ScoreDataset& dataset) {
  Design d;
  d.X = design_matrix(model.feature_map, dataset);
  d.y = response_vector(dataset);
  if (model.feature_map.kind == FeatureKind::SPLINE) {
    detail::BsplineBasis basis(model.feature_map.knots, model.feature_map.spline_degree);
    d.penalty = smoothness_penalty(basis, model.penalty_lambda);
  } else {
    d.penalty = ridge_penalty(model.feature_map.dimension(), model.penalty_lambda);
  }
  const std::size_t offset = model.feature_map.has_intercept() ? 0 : 1;
  Eigen::VectorXd beta(model.coefficients.size() - offset);
  for (Eigen::Index j = 0; j < beta.size(); ++j) beta[j] = model.coefficients[j + offset];
  Eigen::VectorXd p(d.X.rows());
  const Eigen::VectorXd eta = d.X * beta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = sigmoid(eta[i]);
  const Eigen::VectorXd grad = d.X.transpose() * (p - d.y) + d.penalty * beta;
  return grad.cwiseAbs().maxCoeff();
}

CrossingSet invert_probability_threshold(const CalibratedClassifier& model,
                                         double target_prob, double grid_step) {
  if (!(target_prob > 0.0 && target_prob < 1.0)) {
    raise(Errc::OutOfRange, "target probability must lie in (0,1)");
  }
  const auto xs = unit_grid(grid_step);
  std::vector<bool> below(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    below[i] = predict_prob(model, xs[i]) < target_prob;
  }
  if (std::all_of(below.begin(), below.end(), [](bool b) { return b; })) {
    raise(Errc::UnreachableProbability,
          "P(PASS) never reaches " + detail::format_double(target_prob));
  }

  CrossingSet out;
  out.target_prob = target_prob;
  std::vector<double> upward;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    if (below[i] == below[i + 1]) continue;
    double lo = xs[i], hi = xs[i + 1];
    while (hi - lo > 1e-6) {
      const double mid = 0.5 * (lo + hi);
      if ((predict_prob(model, mid) < target_prob) == below[i]) lo = mid;
      else hi = mid;
    }
    const double crossing = 0.5 * (lo + hi);
    out.crossings.push_back(crossing);
    if (below[i]) upward.push_back(crossing);
  }

  if (!below.front() && out.crossings.empty()) {
    out.canonical_threshold = 0.0;  // at or above target everywhere
  } else if (!upward.empty()) {
    out.canonical_threshold = upward.back();
  } else {
    // The target is reached only on a prefix: no score cutoff separates,
    // degrade to accept-all.
    out.canonical_threshold = 0.0;
  }
  return out;
}

}  // namespace threshcal

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "threshcal/dataset.hpp"

namespace threshcal {

enum class Kernel { GAUSSIAN };

struct KdeModel {
  std::vector<double> sample;
  double bandwidth = 0.0;
  Kernel kernel = Kernel::GAUSSIAN;
};

// Without an explicit bandwidth, Silverman's rule
// h = 0.9 * min(sigma, IQR/1.34) * n^(-1/5) is used, falling back to 0.01
// on a degenerate sample.
KdeModel fit_kde(std::span<const double> scores, std::optional<double> bandwidth = {});

double kde_pdf(const KdeModel& model, double x);

// Equal-width histogram scan over [0,1]. smoothed is a 3-bin moving
// average (2 bins at the edges); threshold_bin is the least-populated bin
// strictly between the two highest peaks, or -1 if no such structure.
struct HistogramScan {
  std::vector<double> counts;
  std::vector<double> smoothed;
  int threshold_bin = -1;
  double threshold = 0.0;  // bin center, valid when threshold_bin >= 0
};

HistogramScan histogram_scan(std::span<const double> scores, int bins);

double histogram_local_min_threshold(std::span<const double> scores, int bins);

struct PosteriorModel {
  KdeModel kde_pass;
  KdeModel kde_fail;
  double prior_pass = 0.5;
};

// Per-label KDEs with empirical class priors.
PosteriorModel fit_posterior(const ScoreDataset& dataset,
                             std::optional<double> bandwidth = {});

// P(PASS | x) by Bayes' rule over the two class densities.
double bayes_posterior(const PosteriorModel& model, double x);

// Smallest grid point x* such that the posterior stays at or above
// `confidence` on every grid point >= x* (the suffix rule; posteriors from
// KDEs need not be monotone).
double kde_threshold(const PosteriorModel& model, double confidence,
                     double grid_step = 1e-3);
double kde_threshold(const ScoreDataset& dataset, double confidence,
                     double grid_step = 1e-3);

// Columns: x, pdf_fail, pdf_pass, posterior_pass.
void write_density_csv(const PosteriorModel& model, const std::filesystem::path& path,
                       double grid_step = 1e-3);

// Shared grid over [0,1] with the given step; the last point is exactly 1.
std::vector<double> unit_grid(double grid_step);

}  // namespace threshcal

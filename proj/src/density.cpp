#include "threshcal/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv_detail.hpp"
#include "threshcal/distributions.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

namespace {

// Linear-interpolation quantile on a sorted copy (the numpy default).
double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<double> unit_grid(double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 0.5)) {
    raise(Errc::OutOfRange, "grid_step must lie in (0, 0.5]");
  }
  const std::size_t m = static_cast<std::size_t>(std::ceil(1.0 / grid_step - 1e-9));
  std::vector<double> xs;
  xs.reserve(m + 1);
  for (std::size_t i = 0; i < m; ++i) xs.push_back(static_cast<double>(i) * grid_step);
  xs.push_back(1.0);
  return xs;
}

KdeModel fit_kde(std::span<const double> scores, std::optional<double> bandwidth) {
  if (scores.empty() || (!bandwidth && scores.size() < 2)) {
    raise(Errc::TooFewSamples, "automatic bandwidth needs at least 2 samples");
  }
  KdeModel model;
  model.sample.assign(scores.begin(), scores.end());
  if (bandwidth) {
    if (*bandwidth <= 0.0) raise(Errc::OutOfRange, "bandwidth must be positive");
    model.bandwidth = *bandwidth;
    return model;
  }
  const std::size_t n = model.sample.size();
  double sum = 0.0;
  for (double x : model.sample) sum += x;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double x : model.sample) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted = model.sample;
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = std::min(sd, iqr / 1.34);
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  model.bandwidth = h > 0.0 ? h : 0.01;
  return model;
}

double kde_pdf(const KdeModel& model, double x) {
  const double h = model.bandwidth;
  double sum = 0.0;
  for (double xi : model.sample) sum += normal_pdf((x - xi) / h);
  return sum / (static_cast<double>(model.sample.size()) * h);
}

HistogramScan histogram_scan(std::span<const double> scores, int bins) {
  if (bins < 3) raise(Errc::OutOfRange, "need at least 3 bins");
  HistogramScan scan;
  scan.counts.assign(bins, 0.0);
  for (double s : scores) {
    int b = static_cast<int>(s * bins);
    b = std::clamp(b, 0, bins - 1);
    scan.counts[b] += 1.0;
  }
  scan.smoothed.resize(bins);
  for (int i = 0; i < bins; ++i) {
    double acc = scan.counts[i];
    int cnt = 1;
    if (i > 0) { acc += scan.counts[i - 1]; ++cnt; }
    if (i < bins - 1) { acc += scan.counts[i + 1]; ++cnt; }
    scan.smoothed[i] = acc / cnt;
  }

  // Peaks are maximal plateaus of the smoothed counts that sit strictly
  // above both flanking values (one-sided at the edges).
  struct Peak { int index; double value; };
  std::vector<Peak> peaks;
  int i = 0;
  while (i < bins) {
    int j = i;
    while (j + 1 < bins && scan.smoothed[j + 1] == scan.smoothed[i]) ++j;
    const bool left_ok = i == 0 || scan.smoothed[i - 1] < scan.smoothed[i];
    const bool right_ok = j == bins - 1 || scan.smoothed[j + 1] < scan.smoothed[i];
    if (left_ok && right_ok && scan.smoothed[i] > 0.0) {
      peaks.push_back({(i + j) / 2, scan.smoothed[i]});
    }
    i = j + 1;
  }
  if (peaks.size() < 2) return scan;
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& l, const Peak& r) { return l.value > r.value; });
  int lo = peaks[0].index, hi = peaks[1].index;
  if (lo > hi) std::swap(lo, hi);
  if (hi - lo < 2) return scan;  // no bin strictly between adjacent peaks

  int best = -1;
  for (int b = lo + 1; b < hi; ++b) {
    if (best < 0 || scan.smoothed[b] < scan.smoothed[best]) best = b;
  }
  scan.threshold_bin = best;
  scan.threshold = (best + 0.5) / bins;
  return scan;
}

double histogram_local_min_threshold(std::span<const double> scores, int bins) {
  const HistogramScan scan = histogram_scan(scores, bins);
  if (scan.threshold_bin < 0) {
    raise(Errc::NoBimodalStructure, "fewer than two separated peaks in the histogram");
  }
  return scan.threshold;
}

PosteriorModel fit_posterior(const ScoreDataset& dataset, std::optional<double> bandwidth) {
  if (!dataset.has_both_labels()) {
    raise(Errc::SingleClass, "posterior model needs both PASS and FAIL records");
  }
  PosteriorModel model;
  const auto pass_scores = dataset.scores(Label::PASS);
  const auto fail_scores = dataset.scores(Label::FAIL);
  model.kde_pass = fit_kde(pass_scores, bandwidth);
  model.kde_fail = fit_kde(fail_scores, bandwidth);
  model.prior_pass =
      static_cast<double>(pass_scores.size()) / static_cast<double>(dataset.size());
  return model;
}

double bayes_posterior(const PosteriorModel& model, double x) {
  const double lp = kde_pdf(model.kde_pass, x) * model.prior_pass;
  const double lf = kde_pdf(model.kde_fail, x) * (1.0 - model.prior_pass);
  const double evidence = lp + lf;
  if (!(evidence > 0.0)) {
    raise(Errc::ZeroEvidence, "both class likelihoods underflow at x=" +
                                  detail::format_double(x));
  }
  return lp / evidence;
}

double kde_threshold(const PosteriorModel& model, double confidence, double grid_step) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    raise(Errc::OutOfRange, "confidence must lie in (0,1)");
  }
  const auto xs = unit_grid(grid_step);
  // Grid points where the posterior is undefined (zero evidence) fail the
  // condition; the threshold must hold on the whole suffix.
  std::vector<bool> ok(xs.size(), false);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lp = kde_pdf(model.kde_pass, xs[i]) * model.prior_pass;
    const double lf = kde_pdf(model.kde_fail, xs[i]) * (1.0 - model.prior_pass);
    const double evidence = lp + lf;
    ok[i] = evidence > 0.0 && lp / evidence >= confidence;
  }
  std::size_t start = xs.size();
  while (start > 0 && ok[start - 1]) --start;
  if (start == xs.size()) {
    raise(Errc::UnreachableConfidence,
          "no grid suffix keeps the posterior at or above " +
              detail::format_double(confidence));
  }
  return xs[start];
}

double kde_threshold(const ScoreDataset& dataset, double confidence, double grid_step) {
  return kde_threshold(fit_posterior(dataset), confidence, grid_step);
}

void write_density_csv(const PosteriorModel& model, const std::filesystem::path& path,
                       double grid_step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::IoError, "cannot open " + path.string());
  out << "x,pdf_fail,pdf_pass,posterior_pass\n";
  for (double x : unit_grid(grid_step)) {
    const double pf = kde_pdf(model.kde_fail, x);
    const double pp = kde_pdf(model.kde_pass, x);
    const double lp = pp * model.prior_pass;
    const double lf = pf * (1.0 - model.prior_pass);
    out << detail::format_double(x) << ',' << detail::format_double(pf) << ','
        << detail::format_double(pp) << ',';
    if (lp + lf > 0.0) {
      out << detail::format_double(lp / (lp + lf));
    } else {
      out << "nan";
    }
    out << '\n';
  }
}

}  // namespace threshcal

#include "threshcal/zscore.hpp"

#include <algorithm>
#include <cmath>

#include "threshcal/distributions.hpp"
#include "threshcal/errors.hpp"

namespace threshcal {

using nlohmann::json;

void to_json(json& j, const ZInterval& z) {
  j = json{{"mean", z.mean},
           {"std_dev", z.std_dev},
           {"n", z.n},
           {"confidence", z.confidence},
           {"lower", z.lower},
           {"upper", z.upper},
           {"mode", z.mode == IntervalMode::POPULATION ? "population" : "mean_ci"}};
}

double z_quantile(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    raise(Errc::OutOfRange, "confidence must lie in (0,1)");
  }
  return normal_quantile(0.5 * (1.0 + confidence));
}

ZInterval z_interval_from_stats(double mean, double std_dev, std::size_t n,
                                double confidence, IntervalMode mode, bool clip) {
  const double z = z_quantile(confidence);
  double half = z * std_dev;
  if (mode == IntervalMode::MEAN_CI) half /= std::sqrt(static_cast<double>(n));
  ZInterval out;
  out.mean = mean;
  out.std_dev = std_dev;
  out.n = n;
  out.confidence = confidence;
  out.mode = mode;
  out.lower = mean - half;
  out.upper = mean + half;
  if (clip) {
    out.lower = std::clamp(out.lower, 0.0, 1.0);
    out.upper = std::clamp(out.upper, 0.0, 1.0);
  }
  return out;
}

ZInterval z_interval(std::span<const double> scores, double confidence, IntervalMode mode,
                     bool clip) {
  if (scores.size() < 2) {
    raise(Errc::TooFewSamples, "z interval needs at least 2 scores");
  }
  double sum = 0.0;
  for (double x : scores) sum += x;
  const double mean = sum / static_cast<double>(scores.size());
  double ss = 0.0;
  for (double x : scores) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(scores.size() - 1));
  return z_interval_from_stats(mean, sd, scores.size(), confidence, mode, clip);
}

}  // namespace threshcal

#pragma once

#include <cstddef>
#include <span>

#include <json.hpp>

namespace threshcal {

// POPULATION describes the spread of individual scores (mean +/- z*sigma);
// MEAN_CI is the confidence interval of the mean (mean +/- z*sigma/sqrt(n)).
// POPULATION is the default: a band for where scores fall is what a score
// threshold needs, and at the sample sizes this tool targets the mean's CI
// collapses to a sliver around the mean.
enum class IntervalMode { POPULATION, MEAN_CI };

struct ZInterval {
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t n = 0;
  double confidence = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  IntervalMode mode = IntervalMode::POPULATION;
};

void to_json(nlohmann::json& j, const ZInterval& z);

// z with Phi(z) = 1 - (1-confidence)/2.
double z_quantile(double confidence);

// sigma is the sample standard deviation (n-1 denominator). Intervals are
// reported unclipped; pass clip to clamp them into [0,1].
ZInterval z_interval(std::span<const double> scores, double confidence,
                     IntervalMode mode = IntervalMode::POPULATION, bool clip = false);

ZInterval z_interval_from_stats(double mean, double std_dev, std::size_t n,
                                double confidence,
                                IntervalMode mode = IntervalMode::POPULATION,
                                bool clip = false);

}  // namespace threshcal

#pragma once

namespace threshcal {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_sf(double x);

// Inverse of the standard normal CDF. Acklam's rational approximation with
// one Halley refinement; absolute error well below 1e-12 on (0, 1).
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b), evaluated by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided p-value of a t statistic with the given degrees of freedom.
double student_t_two_sided_p(double t, double df);

}  // namespace threshcal

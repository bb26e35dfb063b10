#pragma once

#include <algorithm>
#include <vector>

namespace threshcal::detail {

// Clamped B-spline basis on [0,1] with the given interior knots.
class BsplineBasis {
 public:
  BsplineBasis(const std::vector<double>& interior_knots, int degree)
      : degree_(degree) {
    knots_.assign(degree + 1, 0.0);
    knots_.insert(knots_.end(), interior_knots.begin(), interior_knots.end());
    knots_.insert(knots_.end(), degree + 1, 1.0);
    num_basis_ = static_cast<int>(interior_knots.size()) + degree + 1;
  }

  int size() const { return num_basis_; }

  // Values of all basis functions at x (Cox-de Boor, evaluated over the
  // d+1 functions that are non-zero on the containing span).
  std::vector<double> row(double x) const {
    const double lo = knots_[degree_];
    const double hi = knots_[knots_.size() - degree_ - 1];
    x = std::clamp(x, lo, hi);

    int span = find_span(x);
    std::vector<double> nonzero(degree_ + 1, 0.0);
    std::vector<double> left(degree_ + 1, 0.0), right(degree_ + 1, 0.0);
    nonzero[0] = 1.0;
    for (int j = 1; j <= degree_; ++j) {
      left[j] = x - knots_[span + 1 - j];
      right[j] = knots_[span + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double denom = right[r + 1] + left[j - r];
        const double temp = denom != 0.0 ? nonzero[r] / denom : 0.0;
        nonzero[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      nonzero[j] = saved;
    }

    std::vector<double> out(num_basis_, 0.0);
    for (int j = 0; j <= degree_; ++j) out[span - degree_ + j] = nonzero[j];
    return out;
  }

  // Greville abscissae: knot averages at which the basis reproduces
  // linear functions (sum_j xi_j B_j(x) = x).
  std::vector<double> greville() const {
    std::vector<double> xi(num_basis_);
    for (int j = 0; j < num_basis_; ++j) {
      double s = 0.0;
      for (int d = 1; d <= degree_; ++d) s += knots_[j + d];
      xi[j] = s / degree_;
    }
    return xi;
  }

 private:
  int find_span(double x) const {
    const int n = num_basis_ - 1;
    if (x >= knots_[n + 1]) return n;
    int lo = degree_, hi = n + 1;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (x < knots_[mid]) hi = mid;
      else lo = mid;
    }
    return lo;
  }

  int degree_;
  int num_basis_;
  std::vector<double> knots_;
};

}  // namespace threshcal::detail

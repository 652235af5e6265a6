#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "klrisk/families.hpp"

namespace klrisk {

/// Values of the (at most) four cubic B-splines that are nonzero at a point.
struct BasisRow {
  int first;  ///< index of the first nonzero basis function
  std::array<double, 4> values;

  template <class Coeffs>
  double dot(const Coeffs& a) const {
    return values[0] * a[first] + values[1] * a[first + 1] + values[2] * a[first + 2] +
           values[3] * a[first + 3];
  }
};

/// Clamped cubic B-spline basis on strictly increasing breakpoints
/// u_0 < ... < u_K; dimension m = K + 3.
class BSplineBasis {
 public:
  explicit BSplineBasis(std::vector<double> breakpoints);
  /// m basis functions on equally spaced breakpoints over [0, t_max].
  static BSplineBasis equally_spaced(double t_max, int m);

  int dim() const { return static_cast<int>(breakpoints_.size()) + 2; }
  int intervals() const { return static_cast<int>(breakpoints_.size()) - 1; }
  double lower() const { return breakpoints_.front(); }
  double upper() const { return breakpoints_.back(); }
  std::span<const double> breakpoints() const { return breakpoints_; }

  /// Breakpoint interval containing u (the last interval is closed).
  int interval_of(double u) const;

  /// Basis values (derivative = 0) or derivatives (1, 2) at u in range.
  BasisRow eval(double u, int derivative = 0) const;

  /// Greville abscissae; coefficients equal to them reproduce alpha(u) = u.
  std::vector<double> greville() const;

  /// Coefficients interpolating g at the Greville abscissae. Exact for
  /// polynomials of degree <= 3.
  Vector interpolate(const std::function<double(double)>& g) const;

  double value(const Vector& coeffs, double u, int derivative = 0) const {
    return eval(u, derivative).dot(coeffs);
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> knots_;  ///< breakpoints with the end knots repeated four times
};

/// Gram matrix of second derivatives: a' Omega a = integral of alpha''(u)^2.
/// Integrated exactly (alpha'' is piecewise linear) with a 3-point Gauss rule
/// per breakpoint interval.
Matrix penalty_matrix(const BSplineBasis& basis);

}  // namespace klrisk

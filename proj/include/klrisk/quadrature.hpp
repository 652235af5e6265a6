#pragma once

#include <functional>
#include <span>
#include <vector>

namespace klrisk {

/// Half-open bookkeeping of one subinterval of an adaptive run.
struct QuadInterval {
  double lo;
  double hi;
  double value;
  double error;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  /// Final partition of the integration range, in increasing order.
  std::vector<QuadInterval> mesh;
};

struct QuadOptions {
  double abs_tol = 1e-9;
  int max_intervals = 200;
};

using Integrand = std::function<double(double)>;

/// Globally adaptive 15-point Gauss-Kronrod quadrature on [lo, hi].
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate drops below `abs_tol`. Needing more than `max_intervals` pieces
/// raises NumericalError. Infinite endpoints are mapped onto a finite range
/// with `scale` setting the length unit of the map.
QuadResult integrate(const Integrand& f, double lo, double hi, const QuadOptions& opts = {},
                     double scale = 1.0);

/// Applies the 15-point Kronrod rule on every interval of a previously
/// computed mesh. Smooth in any parameter `f` depends on, which adaptive
/// refinement is not.
double integrate_on_mesh(const Integrand& f, std::span<const QuadInterval> mesh, double lo,
                         double hi, double scale = 1.0);

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int points);

/// Gauss-Hermite rule for the weight exp(-x^2), nodes ascending.
/// Computed once per node count and cached.
const GaussRule& gauss_hermite(int points);

}  // namespace klrisk

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>

#include "klrisk/families.hpp"

namespace klrisk {

/// Outcome of a maximization.
struct FitResult {
  Vector theta_hat;
  double loglik_at_max = 0.0;
  double grad_norm = 0.0;  ///< infinity norm of the gradient at theta_hat
  int iterations = 0;
  bool converged = false;
  int p = 0;               ///< number of free parameters
  std::size_t n_obs = 0;   ///< sample size the fit used; 0 when unknown
  std::string message;
};

using Objective = std::function<double(const Vector&)>;

struct MaximizeOptions {
  double tol = 1e-8;
  int max_iter = 500;
  /// Seed the inverse-Hessian approximation with a finite-difference Hessian
  /// at the start point (worth it for small, stiff problems).
  bool hessian_init = false;
};

/// BFGS ascent with a backtracking Armijo line search (c = 1e-4, shrink 0.5)
/// and central-difference gradients.
///
/// Converged when the gradient infinity norm falls below `tol`. Throws
/// StartError if the objective is not finite at `theta0`, and NumericalError
/// if the line search stagnates (step < 1e-14) far from a stationary point.
/// When the gain predicted by the quadratic model is below the rounding of
/// f (within 1e3 * tol of stationarity, or along very stiff directions),
/// a step is also accepted if f drops by at most 64 ulps and the gradient
/// norm shrinks; if no such step exists the fit is returned with
/// converged = false. Outside that regime every accepted step increases f.
FitResult maximize(const Objective& objective, const Vector& theta0,
                   const MaximizeOptions& opts = {});

/// Central differences with step 1e-5 * max(1, |x_k|).
Vector numeric_gradient(const Objective& f, const Vector& x);
/// Five-point stencil; used to cross-check `numeric_gradient`.
Vector numeric_gradient_4th(const Objective& f, const Vector& x);
/// Symmetric central-difference Hessian with step `rel_step * max(1, |x_k|)`.
Matrix numeric_hessian(const Objective& f, const Vector& x, double rel_step = 1e-4);

/// One point of the kappa -> J(theta_kappa) curve.
struct CurvePoint {
  FitResult fit;
  double j_value;
};

struct ConstraintMatch {
  double kappa;
  CurvePoint point;
  int iterations;
  /// True when nu exceeds J at the lower bracket end by more than the
  /// tolerance; then kappa = 0 and the fit is the unpenalized one.
  bool inactive;
};

/// Finds kappa with J(fit(kappa)) = nu by bisection in log kappa.
///
/// `fit_at(kappa)` must trace a nonincreasing J. Stops once
/// |J - nu| < 1e-8 * max(1, nu) or after 60 halvings. BracketError if
/// nu < J(hi); MonotonicityError if J rises by more than 1e-6 between
/// ordered evaluations.
ConstraintMatch match_constraint(const std::function<CurvePoint(double)>& fit_at, double nu,
                                 std::pair<double, double> kappa_bracket);

}  // namespace klrisk

#pragma once

#include <vector>

#include "klrisk/bspline.hpp"
#include "klrisk/data.hpp"
#include "klrisk/optim.hpp"

namespace klrisk {

/// Proportional-hazards model with a spline log-hazard:
///   hazard(u | z) = exp(alpha(u) + beta' z),  alpha(u) = sum_j a_j B_j(u).
struct SplineHazardModel {
  BSplineBasis basis;
  Vector a;
  Vector beta;

  double log_hazard(double u) const { return basis.value(a, u); }
  /// Concatenation (a, beta), the optimizer's parameter vector.
  Vector coefficients() const;
};

/// Spline survival log-likelihood for one dataset and basis, with the
/// data-dependent basis evaluations precomputed.
///
/// The cumulative hazard is integrated with a 7-point Gauss rule on each
/// breakpoint interval (optionally subdivided `refine` times).
class SplineLikelihood {
 public:
  SplineLikelihood(const Dataset& data, BSplineBasis basis, int refine = 1);

  int spline_dim() const { return basis_.dim(); }
  int covariate_dim() const { return covariate_dim_; }
  int dim() const { return spline_dim() + covariate_dim(); }
  const BSplineBasis& basis() const { return basis_; }
  const Matrix& omega() const { return omega_; }

  /// Log-likelihood at coefficients (a, beta).
  double loglik(const Vector& coeffs) const;
  /// Per-observation cumulative hazard exp(beta'z) * Lambda(t_i).
  std::vector<double> cumulative_hazards(const Vector& coeffs) const;
  /// Curvature J = integral of alpha''(u)^2, summed as squares of alpha''
  /// at Gauss points (equal to a' Omega a, without its cancellation).
  double curvature(const Vector& a) const;

  SplineHazardModel model_at(const Vector& coeffs) const;

 private:
  struct Node {
    BasisRow row;
    double weight;
  };
  struct Record {
    bool event;
    std::vector<double> z;
    BasisRow at_time;
    int interval;
    std::vector<Node> partial;
  };

  BSplineBasis basis_;
  int covariate_dim_;
  Matrix omega_;
  std::vector<std::vector<Node>> full_;  ///< quadrature nodes per breakpoint interval
  std::vector<Record> records_;
  std::vector<BasisRow> curvature_rows_;
  std::vector<double> curvature_weights_;
};

/// Equally spaced basis with `m` functions over [0, max observed time].
BSplineBasis default_basis(const Dataset& data, int m = 12);

/// log L(a, beta) - kappa * J(a).
double penalized_loglik(const SplineHazardModel& model, const Dataset& data, double kappa);

struct PenalizedFit {
  SplineHazardModel model;
  FitResult fit;         ///< fit.loglik_at_max is the penalized objective
  double kappa;
  double j_value;        ///< J at the estimate
  double loglik;         ///< unpenalized log-likelihood at the estimate
};

/// Maximum penalized likelihood estimate for a fixed kappa >= 0.
PenalizedFit fit_penalized(const Dataset& data, const BSplineBasis& basis, double kappa);

struct SieveFit {
  PenalizedFit fit;
  double kappa_nu;  ///< penalty weight whose estimate meets the constraint
  double lambda;    ///< Lagrange multiplier; equals kappa_nu (0 when slack)
  bool active;      ///< constraint binding
  int bisection_steps;
};

/// Maximum likelihood subject to J <= nu. A slack constraint returns the
/// unpenalized fit with lambda = 0; nu = 0 returns the best affine
/// log-hazard, for which no finite multiplier exists (lambda = +inf).
/// RangeError when no kappa in [1e-8, 1e8] brackets nu.
SieveFit fit_sieve(const Dataset& data, const BSplineBasis& basis, double nu);

struct KktResidual {
  double grad_residual;       ///< |grad loglik - lambda grad J|_inf
  double primal_feasibility;  ///< max(0, J - nu)
  bool dual_feasible;         ///< lambda >= 0
  double complementarity;     ///< |lambda (J - nu)|
};

KktResidual kkt_residual(const SplineHazardModel& model, double lambda, double nu,
                         const Dataset& data);

}  // namespace klrisk

#pragma once

#include <cstdint>
#include <vector>

#include "klrisk/data.hpp"
#include "klrisk/optim.hpp"
#include "klrisk/random_effects.hpp"

namespace klrisk {

/// Fixed parameters together with one random intercept per subject.
struct HParams {
  Vector theta;
  Vector b;
};

/// Joint log density of outcomes and random effects:
///   sum_i log f(Y_i | theta, b_i) + sum_i log phi(b_i; 0, tau^2).
double h_loglik(const RandomEffectsModel& model, const HParams& gamma, double tau,
                const GroupedDataset& data);

/// Gradient of h_loglik in (theta, b); closed form for the supported models.
Vector h_gradient(const RandomEffectsModel& model, const HParams& gamma, double tau,
                  const GroupedDataset& data);

struct HlikFit {
  HParams gamma;
  FitResult fit;     ///< theta-level fit; loglik_at_max is h_loglik at the joint optimum
  double h_value;
  int sweeps;
  double joint_grad_norm;
};

/// Joint maximization over (theta, b) by blockwise ascent. Each sweep
/// runs a quasi-Newton step on theta (with b re-solved per subject, so the
/// theta objective is the h-likelihood profiled over b) and then per-subject
/// Newton updates of b. Stops when the joint gradient is below 1e-8 in the
/// infinity norm; NumericalError after 200 sweeps. No marginal integral is
/// ever evaluated.
HlikFit fit_hlik(const RandomEffectsModel& model, const GroupedDataset& data, double tau);

/// Profile criterion maximized over the tau grid.
enum class ProfileKind {
  /// h_loglik at the joint optimum. Has an interior local maximum biased
  /// towards small tau and grows without bound as tau -> 0, so grids should
  /// stay away from 0.
  plain,
  /// h_loglik - 1/2 sum_i log(-d^2 h / db_i^2 / 2pi): b integrated out by
  /// Laplace's method. Exact marginal likelihood for the normal-normal model.
  adjusted,
};

struct TauProfile {
  double tau_hat;
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> theta_hat;  ///< fitted mu per grid point
};

TauProfile profile_tau(const RandomEffectsModel& model, const GroupedDataset& data,
                       const std::vector<double>& tau_grid,
                       ProfileKind kind = ProfileKind::plain);

/// Maximizes the Gauss-Hermite marginal likelihood over theta.
FitResult fit_marginal(const RandomEffectsModel& model, const GroupedDataset& data, double tau,
                       int nodes = 40);

struct MarginalComparison {
  Vector theta_hlik;
  Vector theta_marginal;
  double gap;  ///< |theta_hlik - theta_marginal|_inf
  double h_value;
  double marginal_loglik;
};

MarginalComparison compare_with_marginal(const RandomEffectsModel& model,
                                         const GroupedDataset& data, double tau,
                                         int nodes = 40);

/// Draws a balanced clustered dataset from the model with fixed mu and tau.
GroupedDataset simulate_grouped(const RandomEffectsModel& model, double mu, double tau,
                                std::size_t subjects, std::size_t per_subject,
                                std::uint64_t seed);

}  // namespace klrisk

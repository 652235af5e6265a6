#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "klrisk/bspline.hpp"
#include "klrisk/data.hpp"
#include "klrisk/families.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/optim.hpp"

namespace klrisk {

struct ModelScores {
  double aic;  ///< -2 L + 2 p
  double ekl;  ///< (-L + p) / n
};

/// Throws NumericalError for an unconverged fit and DomainError for n = 0 or
/// an n that disagrees with the sample size recorded in the fit.
ModelScores model_scores(const FitResult& fit, std::size_t n);

/// D = (AIC_a - AIC_b) / (2n). Positive values favor model b.
double risk_difference(const FitResult& fit_a, const FitResult& fit_b, std::size_t n);

struct LcvResult {
  double kappa_star;
  std::vector<double> kappa_grid;
  /// Held-out log-likelihood summed over folds, divided by n.
  std::vector<double> scores;
};

/// k-fold likelihood cross-validation of the penalty weight. Folds are
/// stratified on event status and shuffled by `seed`; every fold is fitted
/// with the same basis. The argmax is taken with ties broken toward the
/// larger kappa. FoldError if a training set has no events.
LcvResult lcv_select(const Dataset& data, const BSplineBasis& basis,
                     const std::vector<double>& kappa_grid, int folds, std::uint64_t seed,
                     Execution exec = Execution::parallel);

struct EklSimulation {
  double mean_ekl;
  double ekl_std_error;
  double misspec_component;
  double statistical_component;  ///< mean_ekl - misspec_component
  double mean_trace_ratio;       ///< average Tr(I^{-1} J) at the fitted parameters
  std::size_t replicates;
  std::size_t failures;
};

/// Monte Carlo expected divergence of the fitted law from the truth. Each
/// replicate draws n truth values (right-censored at C if given) from
/// stream derive_seed(seed, r), fits the MLE and evaluates the divergence on
/// the same observation scheme. Needs reps >= 100; HarnessError if more than
/// 1% of the fits fail.
EklSimulation simulate_ekl(const TrueModel& truth, const Family& fitted, std::size_t n,
                           std::size_t reps, std::optional<double> censor_time,
                           std::uint64_t seed, Execution exec = Execution::parallel);

enum class Prior { flat, jeffreys };

/// Posterior mode of a binomial probability: k/n under the flat prior,
/// (k - 1/2)/(n - 1) under Jeffreys. BoundaryError for Jeffreys with
/// k = 0 or k = n.
double map_estimate(int k, int n, Prior prior);

}  // namespace klrisk

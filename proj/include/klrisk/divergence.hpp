#pragma once

#include <cstdint>
#include <optional>

#include "klrisk/families.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/optim.hpp"

namespace klrisk {

/// Kullback-Leibler divergence of `model` from `truth` on the full data:
/// the truth expectation of log(f_truth / f_model).
///
/// Continuous laws are integrated by adaptive Gauss-Kronrod (absolute
/// tolerance 1e-9, at most 200 subintervals); binomial laws are summed.
/// Throws DivergenceUndefinedError when the truth puts mass where the model
/// density vanishes (checked on 64 truth quantiles).
double kl_full(const Law& model, const Law& truth);

/// Divergence on the data observed under fixed right censoring at C:
/// the density part on [0, C] plus the atom {X > C} weighted by S_truth(C).
/// Time-to-event families only.
double kl_censored(const Law& model, const Law& truth, double censor_time);

/// kl_censored when a censoring time is given, kl_full otherwise.
double kl(const Law& model, const Law& truth, std::optional<double> censor_time);

struct MonteCarloEstimate {
  double estimate;
  double std_error;
  std::size_t draws;
};

/// Brute-force check: sample mean and standard error of the log-likelihood
/// ratio over `n` >= 1000 truth draws.
MonteCarloEstimate kl_oracle(const Law& model, const Law& truth,
                             std::optional<double> censor_time, std::size_t n,
                             std::uint64_t seed, Execution exec = Execution::parallel);

struct MisspecificationRisk {
  Params theta_opt;
  double risk;
  /// Minimizer drifted towards the edge of the parameter box; theta_opt is
  /// then only the last iterate.
  bool at_boundary;
  FitResult fit;
};

/// Minimizes theta -> kl(P_theta | truth) over `family`. The optimizer
/// starts from the method-of-moments estimate on 1e4 truth draws.
MisspecificationRisk misspecification_risk(const Family& family, const TrueModel& truth,
                                           std::optional<double> censor_time = std::nullopt);

/// Throws DivergenceUndefinedError unless the model density is positive on
/// 64 quantiles of the truth.
void check_support(const Law& model, const Law& truth);

}  // namespace klrisk

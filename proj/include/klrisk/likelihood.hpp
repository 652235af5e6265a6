#pragma once

#include <cstddef>
#include <vector>

#include "klrisk/data.hpp"
#include "klrisk/families.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/optim.hpp"
#include "klrisk/random_effects.hpp"

namespace klrisk {

/// Exact records contribute log f(x), right-censored records log S(c).
double loglik(const Family& family, const Params& theta, const Dataset& data);

/// Per-observation contributions of `loglik`, in data order.
std::vector<double> loglik_terms(const Family& family, const Params& theta,
                                 const Dataset& data);

/// Numerical MLE: maximizes `loglik` in unconstrained coordinates, starting
/// from the closed form where one exists and from moments otherwise.
/// `theta_hat` is returned in natural coordinates; `grad_norm` refers to the
/// unconstrained ones.
FitResult fit_mle(const Family& family, const Dataset& data, const MaximizeOptions& opts = {});

/// Observed information I (minus the average Hessian of the per-observation
/// log-likelihood) and J (empirical variance of per-observation scores).
struct InfoMatrices {
  Matrix observed;
  Matrix score_variance;
};

struct ScoreInformation {
  Vector score;  ///< gradient of the total log-likelihood
  InfoMatrices info;
};

/// Central differences with h_k = 1e-5 * max(1, |theta_k|), shrunk if the
/// step would leave the parameter box.
ScoreInformation score_and_information(const Family& family, const Params& theta,
                                       const Dataset& data);

/// Tr(I^{-1} J).
double trace_ratio(const InfoMatrices& info);

/// Closed-form score of the exponential rate: events / rate - total time.
double exponential_score(double rate, const Dataset& data);

/// Marginal log-likelihood of a random-intercept model, integrating each
/// subject's conditional likelihood against N(0, tau^2) with an n-node
/// Gauss-Hermite rule centred at the subject's intercept mode and scaled by
/// the curvature there. Per-subject terms are summed in subject order.
double marginal_loglik(const RandomEffectsModel& model, const Params& theta, double tau,
                       const GroupedDataset& data, int nodes = 40,
                       Execution exec = Execution::parallel);

std::vector<double> marginal_loglik_terms(const RandomEffectsModel& model, const Params& theta,
                                          double tau, const GroupedDataset& data, int nodes,
                                          Execution exec = Execution::parallel);

/// Number of per-subject marginal integrals evaluated so far in this process.
std::size_t marginal_integral_count();

}  // namespace klrisk

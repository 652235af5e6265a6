#include "klrisk/selection.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "klrisk/divergence.hpp"
#include "klrisk/error.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/penalized.hpp"
#include "klrisk/rng.hpp"

namespace klrisk {

namespace {

void check_n(const FitResult& fit, std::size_t n) {
  if (n == 0) throw DomainError("sample size must be >= 1");
  if (fit.n_obs != 0 && fit.n_obs != n)
    throw DomainError("fit used " + std::to_string(fit.n_obs) + " observations, not " +
                      std::to_string(n));
}

/// Fisher-Yates with the library generator, so the permutation does not
/// depend on the standard library implementation.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::vector<int> stratified_folds(const Dataset& data, int folds, std::uint64_t seed) {
  std::vector<std::size_t> events, censored;
  for (std::size_t i = 0; i < data.size(); ++i) (data[i].is_event() ? events : censored).push_back(i);
  Rng rng(seed);
  shuffle(events, rng);
  shuffle(censored, rng);
  std::vector<int> fold(data.size());
  std::size_t pos = 0;
  for (std::size_t i : events) fold[i] = static_cast<int>(pos++ % folds);
  for (std::size_t i : censored) fold[i] = static_cast<int>(pos++ % folds);
  return fold;
}

struct Replicate {
  bool ok = false;
  double ekl = 0.0;
  double trace = 0.0;
};

}  // namespace

ModelScores model_scores(const FitResult& fit, std::size_t n) {
  if (!fit.converged) throw NumericalError("fit did not converge: " + fit.message);
  check_n(fit, n);
  const double l = fit.loglik_at_max;
  return {-2.0 * l + 2.0 * fit.p, (-l + fit.p) / static_cast<double>(n)};
}

double risk_difference(const FitResult& fit_a, const FitResult& fit_b, std::size_t n) {
  const double aic_a = model_scores(fit_a, n).aic;
  const double aic_b = model_scores(fit_b, n).aic;
  return (aic_a - aic_b) / (2.0 * static_cast<double>(n));
}

LcvResult lcv_select(const Dataset& data, const BSplineBasis& basis,
                     const std::vector<double>& kappa_grid, int folds, std::uint64_t seed,
                     Execution exec) {
  if (kappa_grid.empty()) throw DomainError("kappa grid is empty");
  for (double k : kappa_grid)
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("kappa grid values must be finite and > 0");
  if (folds < 2 || static_cast<std::size_t>(folds) > data.size())
    throw DomainError("folds must be between 2 and n");

  const std::vector<int> fold = stratified_folds(data, folds, seed);
  std::vector<Dataset> train, test;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? out : in).push_back(i);
    Dataset tr = data.subset(in);
    if (tr.events() == 0)
      throw FoldError("training set for fold " + std::to_string(f + 1) + " has no events");
    train.push_back(std::move(tr));
    test.push_back(data.subset(out));
  }

  const std::size_t tasks = kappa_grid.size() * static_cast<std::size_t>(folds);
  const auto held_out = map_indexed<double>(
      tasks,
      [&](std::size_t t) {
        const double kappa = kappa_grid[t / folds];
        const auto f = static_cast<std::size_t>(t % folds);
        const PenalizedFit pf = fit_penalized(train[f], basis, kappa);
        return SplineLikelihood(test[f], basis).loglik(pf.model.coefficients());
      },
      exec);

  LcvResult out{kappa_grid.front(), kappa_grid, {}};
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < kappa_grid.size(); ++g) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) total += held_out[g * folds + f];
    const double score = total / static_cast<double>(data.size());
    out.scores.push_back(score);
    if (score > best || (score == best && kappa_grid[g] > out.kappa_star)) {
      best = score;
      out.kappa_star = kappa_grid[g];
    }
  }
  return out;
}

EklSimulation simulate_ekl(const TrueModel& truth, const Family& fitted, std::size_t n,
                           std::size_t reps, std::optional<double> censor_time,
                           std::uint64_t seed, Execution exec) {
  if (reps < 100) throw DomainError("simulate_ekl needs at least 100 replicates");
  if (n == 0) throw DomainError("sample size must be >= 1");
  if (censor_time && (!(*censor_time > 0.0) || !std::isfinite(*censor_time)))
    throw DomainError("censoring time must be finite and > 0");

  const auto results = map_indexed<Replicate>(
      reps,
      [&](std::size_t r) {
        const auto draws = truth.family.sample(truth.theta, n, derive_seed(seed, r));
        std::vector<Observation> obs;
        obs.reserve(n);
        for (double x : draws)
          obs.push_back(censor_time && x > *censor_time ? Observation::censored(*censor_time)
                                                        : Observation::exact(x));
        const Dataset data(std::move(obs));
        Replicate rep;
        try {
          const FitResult fit = fit_mle(fitted, data);
          if (!fit.converged) return rep;
          rep.ekl = kl(Law{fitted, fit.theta_hat}, truth, censor_time);
          rep.trace = trace_ratio(score_and_information(fitted, fit.theta_hat, data).info);
          rep.ok = std::isfinite(rep.ekl) && std::isfinite(rep.trace);
        } catch (const NumericalError&) {
          rep.ok = false;
        }
        return rep;
      },
      exec);

  Moments ekl, trace;
  std::size_t failures = 0;
  for (const auto& rep : results) {
    if (!rep.ok) {
      ++failures;
      continue;
    }
    ekl.push(rep.ekl);
    trace.push(rep.trace);
  }
  if (static_cast<double>(failures) > 0.01 * static_cast<double>(reps))
    throw HarnessError(std::to_string(failures) + " of " + std::to_string(reps) +
                       " replicate fits failed");

  const double misspec = misspecification_risk(fitted, truth, censor_time).risk;
  return {ekl.mean, ekl.std_error(), misspec, ekl.mean - misspec, trace.mean, reps, failures};
}

double map_estimate(int k, int n, Prior prior) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (k < 0 || k > n) throw DomainError("k must lie in [0, n]");
  if (prior == Prior::flat) return static_cast<double>(k) / n;
  if (k == 0 || k == n)
    throw BoundaryError("Jeffreys posterior mode lies on the boundary for k = 0 or k = n");
  return (k - 0.5) / (n - 1);
}

}  // namespace klrisk

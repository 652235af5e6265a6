#include "klrisk/hlik.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "klrisk/error.hpp"
#include "klrisk/families.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/rng.hpp"

namespace klrisk {

namespace {

constexpr int kMaxSweeps = 200;
constexpr double kJointTol = 1e-8;

double log_prior(double b, double tau) {
  return -0.5 * std::log(2.0 * std::numbers::pi * tau * tau) - 0.5 * b * b / (tau * tau);
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be finite and > 0");
}

void check_dims(const RandomEffectsModel& model, const HParams& gamma,
                const GroupedDataset& data) {
  if (gamma.theta.size() != model.fixed_dim())
    throw DomainError("theta has length " + std::to_string(gamma.theta.size()) + ", expected " +
                      std::to_string(model.fixed_dim()));
  if (gamma.b.size() != static_cast<Eigen::Index>(data.size()))
    throw DomainError("b has length " + std::to_string(gamma.b.size()) + " but there are " +
                      std::to_string(data.size()) + " subjects");
}

/// argmax over b of log f(Y | mu + b) + log phi(b; tau), by safeguarded Newton.
Vector solve_intercepts(const RandomEffectsModel& model, const GroupedDataset& data, double mu,
                        double tau, const Vector& start) {
  Vector b(start.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    b[static_cast<Eigen::Index>(i)] = model.intercept_mode(mu, tau, data[i], start[static_cast<Eigen::Index>(i)]);
  return b;
}

double initial_mu(const RandomEffectsModel& model, const GroupedDataset& data) {
  double total = 0.0;
  for (const auto& s : data)
    for (double y : s.outcomes) total += y;
  const double mean = total / static_cast<double>(data.total_outcomes());
  if (model.kind == RandomEffectsKind::poisson_lognormal)
    return std::log(std::max(mean, 0.5 / static_cast<double>(data.total_outcomes())));
  return mean;
}

}  // namespace

double h_loglik(const RandomEffectsModel& model, const HParams& gamma, double tau,
                const GroupedDataset& data) {
  check_tau(tau);
  check_dims(model, gamma, data);
  model.check_data(data);
  const double mu = gamma.theta[0];
  double conditional = 0.0, prior = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double b = gamma.b[static_cast<Eigen::Index>(i)];
    conditional += model.conditional_loglik(mu + b, data[i]);
    prior += log_prior(b, tau);
  }
  return conditional + prior;
}

Vector h_gradient(const RandomEffectsModel& model, const HParams& gamma, double tau,
                  const GroupedDataset& data) {
  check_tau(tau);
  check_dims(model, gamma, data);
  const double mu = gamma.theta[0];
  const auto n = static_cast<Eigen::Index>(data.size());
  Vector grad(1 + n);
  grad[0] = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d1 = model.conditional_d1(mu + gamma.b[i], data[static_cast<std::size_t>(i)]);
    grad[0] += d1;
    grad[1 + i] = d1 - gamma.b[i] / (tau * tau);
  }
  return grad;
}

HlikFit fit_hlik(const RandomEffectsModel& model, const GroupedDataset& data, double tau) {
  check_tau(tau);
  model.check_data(data);
  const double prec = 1.0 / (tau * tau);

  HParams gamma{Vector::Constant(1, initial_mu(model, data)),
                Vector::Zero(static_cast<Eigen::Index>(data.size()))};
  FitResult theta_fit;
  double grad_norm = std::numeric_limits<double>::infinity();
  int sweep = 0;
  while (sweep < kMaxSweeps) {
    ++sweep;
    // theta step on the h-likelihood profiled over b
    const Vector b_ref = gamma.b;
    const Objective profile = [&](const Vector& theta) {
      const Vector b = solve_intercepts(model, data, theta[0], tau, b_ref);
      return h_loglik(model, {theta, b}, tau, data);
    };
    theta_fit = maximize(profile, gamma.theta);
    double mu = theta_fit.theta_hat[0];

    // Newton polish with the closed-form profile score and curvature
    Vector b = solve_intercepts(model, data, mu, tau, b_ref);
    for (int it = 0; it < 10; ++it) {
      double score = 0.0, curv = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double eta = mu + b[static_cast<Eigen::Index>(i)];
        const double d2 = model.conditional_d2(eta, data[i]);
        score += model.conditional_d1(eta, data[i]);
        curv += d2 * (-prec) / (d2 - prec);
      }
      if (std::abs(score) < 0.1 * kJointTol || !(curv < 0.0)) break;
      mu -= score / curv;
      b = solve_intercepts(model, data, mu, tau, b);
    }

    // b step
    gamma.theta[0] = mu;
    gamma.b = solve_intercepts(model, data, mu, tau, b);
    grad_norm = h_gradient(model, gamma, tau, data).lpNorm<Eigen::Infinity>();
    if (grad_norm < kJointTol) break;
  }
  if (!(grad_norm < kJointTol))
    throw NumericalError("h-likelihood ascent did not converge in " + std::to_string(kMaxSweeps) +
                         " sweeps (joint gradient " + std::to_string(grad_norm) + ")");

  const double value = h_loglik(model, gamma, tau, data);
  theta_fit.theta_hat = gamma.theta;
  theta_fit.loglik_at_max = value;
  theta_fit.grad_norm = grad_norm;
  theta_fit.converged = true;
  theta_fit.p = model.fixed_dim() + static_cast<int>(data.size());
  theta_fit.n_obs = data.total_outcomes();
  return {gamma, theta_fit, value, sweep, grad_norm};
}

TauProfile profile_tau(const RandomEffectsModel& model, const GroupedDataset& data,
                       const std::vector<double>& tau_grid, ProfileKind kind) {
  if (tau_grid.empty()) throw DomainError("tau grid is empty");
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    if (!(tau_grid[k] > 0.0) || !std::isfinite(tau_grid[k]))
      throw DomainError("tau grid values must be finite and > 0");
    if (k > 0 && !(tau_grid[k] > tau_grid[k - 1]))
      throw DomainError("tau grid must be sorted increasingly");
  }
  TauProfile out{tau_grid.front(), tau_grid, {}, {}};
  double best = -std::numeric_limits<double>::infinity();
  for (double tau : tau_grid) {
    const HlikFit fit = fit_hlik(model, data, tau);
    double value = fit.h_value;
    if (kind == ProfileKind::adjusted) {
      const double prec = 1.0 / (tau * tau);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double eta = fit.gamma.theta[0] + fit.gamma.b[static_cast<Eigen::Index>(i)];
        const double info = -model.conditional_d2(eta, data[i]) + prec;
        value -= 0.5 * std::log(info / (2.0 * std::numbers::pi));
      }
    }
    out.values.push_back(value);
    out.theta_hat.push_back(fit.gamma.theta[0]);
    if (value > best) {
      best = value;
      out.tau_hat = tau;
    }
  }
  return out;
}

FitResult fit_marginal(const RandomEffectsModel& model, const GroupedDataset& data, double tau,
                       int nodes) {
  check_tau(tau);
  const Objective objective = [&](const Vector& theta) {
    return marginal_loglik(model, theta, tau, data, nodes);
  };
  MaximizeOptions opts;
  opts.hessian_init = true;
  FitResult fit = maximize(objective, Vector::Constant(1, initial_mu(model, data)), opts);
  fit.n_obs = data.total_outcomes();
  return fit;
}

MarginalComparison compare_with_marginal(const RandomEffectsModel& model,
                                         const GroupedDataset& data, double tau, int nodes) {
  const HlikFit h = fit_hlik(model, data, tau);
  const FitResult m = fit_marginal(model, data, tau, nodes);
  return {h.gamma.theta, m.theta_hat,
          (h.gamma.theta - m.theta_hat).lpNorm<Eigen::Infinity>(), h.h_value, m.loglik_at_max};
}

GroupedDataset simulate_grouped(const RandomEffectsModel& model, double mu, double tau,
                                std::size_t subjects, std::size_t per_subject,
                                std::uint64_t seed) {
  check_tau(tau);
  if (subjects == 0 || per_subject == 0) throw DomainError("need at least one subject and outcome");
  Rng rng(seed);
  std::vector<Subject> out;
  out.reserve(subjects);
  const double sd = std::sqrt(model.sigma2);
  for (std::size_t i = 0; i < subjects; ++i) {
    const double b = tau * normal_quantile(rng.uniform());
    Subject s{std::to_string(i + 1), {}};
    for (std::size_t j = 0; j < per_subject; ++j) {
      const double u = rng.uniform();
      if (model.kind == RandomEffectsKind::normal_normal) {
        s.outcomes.push_back(mu + b + sd * normal_quantile(u));
      } else {
        const double rate = std::exp(mu + b);
        double p = std::exp(-rate), cdf = p;
        int k = 0;
        while (u > cdf && k < 100000) {
          ++k;
          p *= rate / k;
          cdf += p;
        }
        s.outcomes.push_back(k);
      }
    }
    out.push_back(std::move(s));
  }
  return GroupedDataset(std::move(out));
}

}  // namespace klrisk

#include "klrisk/likelihood.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>

#include "klrisk/error.hpp"
#include "klrisk/quadrature.hpp"

namespace klrisk {

namespace {

std::atomic<std::size_t> g_marginal_integrals{0};

double observation_term(const Family& family, const Params& theta, const Observation& o) {
  if (o.is_event()) return family.log_density(theta, o.time);
  if (family.is_time_to_event() && o.time < 0.0)
    throw DomainError("negative censoring time " + std::to_string(o.time));
  return family.log_survival(theta, o.time);
}

/// Difference steps that keep theta +- 2h inside the parameter box.
Vector box_steps(const Family& family, const Params& theta, double rel) {
  Vector h(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    h[k] = rel * std::max(1.0, std::abs(theta[k]));
    const bool positive = !(family.id() == FamilyId::normal && k == 0);
    if (positive) h[k] = std::min(h[k], 0.25 * theta[k]);
    if (family.id() == FamilyId::binomial) h[k] = std::min(h[k], 0.25 * (1.0 - theta[k]));
  }
  return h;
}

}  // namespace

std::vector<double> loglik_terms(const Family& family, const Params& theta,
                                 const Dataset& data) {
  family.validate(theta);
  std::vector<double> terms;
  terms.reserve(data.size());
  for (const auto& o : data) terms.push_back(observation_term(family, theta, o));
  return terms;
}

double loglik(const Family& family, const Params& theta, const Dataset& data) {
  family.validate(theta);
  CompensatedSum total;
  for (const auto& o : data) total.add(observation_term(family, theta, o));
  return total.value();
}

FitResult fit_mle(const Family& family, const Dataset& data, const MaximizeOptions& opts) {
  Params start;
  try {
    start = analytic_mle(family, data);
  } catch (const std::exception&) {
  }
  if (start.size() == 0 || !family.accepts(start)) {
    std::vector<double> times;
    times.reserve(data.size());
    for (const auto& o : data) times.push_back(o.time);
    start = family.moment_estimate(times);
  }

  const Objective objective = [&](const Vector& eta) {
    const Params theta = family.from_unconstrained(eta);
    if (!family.accepts(theta)) return -std::numeric_limits<double>::infinity();
    try {
      return loglik(family, theta, data);
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  MaximizeOptions local = opts;
  local.hessian_init = true;
  FitResult fit = maximize(objective, family.to_unconstrained(start), local);
  fit.theta_hat = family.from_unconstrained(fit.theta_hat);
  fit.n_obs = data.size();
  return fit;
}

ScoreInformation score_and_information(const Family& family, const Params& theta,
                                       const Dataset& data) {
  family.validate(theta);
  const Eigen::Index p = theta.size();
  const auto n = static_cast<Eigen::Index>(data.size());
  const Vector h = box_steps(family, theta, 1e-5);

  Vector score(p);
  Matrix obs_scores(n, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    Params up = theta, down = theta;
    up[k] += h[k];
    down[k] -= h[k];
    const auto tu = loglik_terms(family, up, data);
    const auto td = loglik_terms(family, down, data);
    double total_up = 0.0, total_down = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      obs_scores(i, k) = (tu[i] - td[i]) / (2.0 * h[k]);
      total_up += tu[i];
      total_down += td[i];
    }
    score[k] = (total_up - total_down) / (2.0 * h[k]);
  }
  for (Eigen::Index k = 0; k < p; ++k)
    if (!std::isfinite(score[k])) throw NumericalError("score is not finite");

  const Vector hh = box_steps(family, theta, 1e-4);
  auto total = [&](const Params& t) { return loglik(family, t, data); };
  Matrix hess(p, p);
  const double f0 = total(theta);
  for (Eigen::Index i = 0; i < p; ++i) {
    Params a = theta, b = theta;
    a[i] += hh[i];
    b[i] -= hh[i];
    hess(i, i) = (total(a) - 2.0 * f0 + total(b)) / (hh[i] * hh[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      double corner[4];
      const double si[4] = {1, 1, -1, -1}, sj[4] = {1, -1, 1, -1};
      for (int c = 0; c < 4; ++c) {
        Params t = theta;
        t[i] += si[c] * hh[i];
        t[j] += sj[c] * hh[j];
        corner[c] = total(t);
      }
      hess(i, j) = hess(j, i) =
          (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * hh[i] * hh[j]);
    }
  }
  if (!hess.allFinite()) throw NumericalError("Hessian is not finite");

  const double nd = static_cast<double>(n);
  const Vector mean_score = obs_scores.colwise().mean();
  const Matrix centered = obs_scores.rowwise() - mean_score.transpose();
  ScoreInformation out;
  out.score = score;
  out.info.observed = -hess / nd;
  out.info.score_variance = (centered.transpose() * centered) / nd;
  return out;
}

double trace_ratio(const InfoMatrices& info) {
  Eigen::LDLT<Matrix> ldlt(info.observed);
  if (ldlt.info() != Eigen::Success) throw NumericalError("information matrix is singular");
  return ldlt.solve(info.score_variance).trace();
}

double exponential_score(double rate, const Dataset& data) {
  if (!(rate > 0.0)) throw DomainError("exponential rate must be > 0");
  return static_cast<double>(data.events()) / rate - data.total_time();
}

std::vector<double> marginal_loglik_terms(const RandomEffectsModel& model, const Params& theta,
                                          double tau, const GroupedDataset& data, int nodes,
                                          Execution exec) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be finite and > 0");
  if (nodes < 5) throw DomainError("marginal likelihood needs at least 5 quadrature nodes");
  if (theta.size() != model.fixed_dim() || !theta.allFinite())
    throw DomainError("fixed parameters must be a finite vector of length 1");
  model.check_data(data);

  const GaussRule& rule = gauss_hermite(nodes);
  const double mu = theta[0];
  const double prec = 1.0 / (tau * tau);
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * tau * tau);
  // Nodes are centred at the mode of the integrand and scaled by its
  // curvature there, so the Hermite weight matches the integrand's bulk.
  auto subject_term = [&](std::size_t i) {
    const Subject& s = data[i];
    const double mode = model.intercept_mode(mu, tau, s);
    const double scale = std::numbers::sqrt2 / std::sqrt(prec - model.conditional_d2(mu + mode, s));
    std::vector<double> logs(rule.nodes.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double x = rule.nodes[k];
      const double b = mode + scale * x;
      logs[k] = std::log(rule.weights[k]) + x * x + model.conditional_loglik(mu + b, s) + log_norm -
                0.5 * prec * b * b;
      peak = std::max(peak, logs[k]);
    }
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - peak);
    return std::log(scale) + peak + std::log(acc);
  };
  g_marginal_integrals += data.size();
  return map_indexed<double>(data.size(), subject_term, exec);
}

double marginal_loglik(const RandomEffectsModel& model, const Params& theta, double tau,
                       const GroupedDataset& data, int nodes, Execution exec) {
  return ordered_sum(marginal_loglik_terms(model, theta, tau, data, nodes, exec));
}

std::size_t marginal_integral_count() { return g_marginal_integrals.load(); }

}  // namespace klrisk

#include "klrisk/random_effects.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "klrisk/error.hpp"

namespace klrisk {

RandomEffectsModel RandomEffectsModel::normal_normal(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw DomainError("residual variance must be finite and > 0");
  return {RandomEffectsKind::normal_normal, sigma2};
}

RandomEffectsModel RandomEffectsModel::poisson_lognormal() {
  return {RandomEffectsKind::poisson_lognormal, 1.0};
}

RandomEffectsModel RandomEffectsModel::parse(std::string_view token, double sigma2) {
  if (token == "normal-normal") return normal_normal(sigma2);
  if (token == "poisson-lognormal") return poisson_lognormal();
  throw FormatError("unknown random-effects model `" + std::string(token) +
                    "` (expected normal-normal or poisson-lognormal)");
}

std::string RandomEffectsModel::name() const {
  return kind == RandomEffectsKind::normal_normal ? "normal-normal" : "poisson-lognormal";
}

void RandomEffectsModel::check_data(const GroupedDataset& data) const {
  if (kind != RandomEffectsKind::poisson_lognormal) return;
  for (const auto& s : data)
    for (double y : s.outcomes)
      if (y < 0.0 || std::floor(y) != y)
        throw DomainError("subject " + s.id + ": Poisson outcome " + std::to_string(y) +
                          " is not a nonnegative integer");
}

double RandomEffectsModel::conditional_loglik(double eta, const Subject& subject) const {
  double total = 0.0;
  if (kind == RandomEffectsKind::normal_normal) {
    const double norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    for (double y : subject.outcomes) {
      const double r = y - eta;
      total += norm - 0.5 * r * r / sigma2;
    }
  } else {
    const double rate = std::exp(eta);
    for (double y : subject.outcomes) total += y * eta - rate - std::lgamma(y + 1.0);
  }
  return total;
}

double RandomEffectsModel::conditional_d1(double eta, const Subject& subject) const {
  double total = 0.0;
  if (kind == RandomEffectsKind::normal_normal) {
    for (double y : subject.outcomes) total += (y - eta) / sigma2;
  } else {
    const double rate = std::exp(eta);
    for (double y : subject.outcomes) total += y - rate;
  }
  return total;
}

double RandomEffectsModel::conditional_d2(double eta, const Subject& subject) const {
  const double n = static_cast<double>(subject.outcomes.size());
  if (kind == RandomEffectsKind::normal_normal) return -n / sigma2;
  return -n * std::exp(eta);
}

double RandomEffectsModel::intercept_mode(double mu, double tau, const Subject& subject,
                                          double b) const {
  const double prec = 1.0 / (tau * tau);
  auto score = [&](double v) { return conditional_d1(mu + v, subject) - prec * v; };
  for (int it = 0; it < 100; ++it) {
    const double g = score(b);
    const double h = conditional_d2(mu + b, subject) - prec;
    if (std::abs(g) <= 1e-14 * std::max(1.0, -h)) break;
    double step = -g / h;
    // the objective is concave in b, so a step that shrinks the score moves
    // toward the mode; Poisson curvature can make a full step overshoot
    int half = 0;
    for (; half < 60; ++half, step *= 0.5) {
      const double g_new = score(b + step);
      if (std::isfinite(g_new) && std::abs(g_new) < std::abs(g)) break;
    }
    if (half == 60 || b + step == b) break;
    b += step;
  }
  return b;
}

}  // namespace klrisk

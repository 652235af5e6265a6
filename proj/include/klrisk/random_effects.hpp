#pragma once

#include <string>
#include <string_view>

#include "klrisk/data.hpp"

namespace klrisk {

enum class RandomEffectsKind { normal_normal, poisson_lognormal };

/// Random-intercept model for clustered outcomes, b_i ~ N(0, tau^2):
///   normal-normal       Y_ij = mu + b_i + e_ij,  e_ij ~ N(0, sigma2)
///   poisson-lognormal   Y_ij | b_i ~ Poisson(exp(mu + b_i))
/// The fixed parameter vector is (mu). The residual variance sigma2 of the
/// normal-normal model is a known structural constant.
struct RandomEffectsModel {
  RandomEffectsKind kind = RandomEffectsKind::normal_normal;
  double sigma2 = 1.0;

  static RandomEffectsModel normal_normal(double sigma2);
  static RandomEffectsModel poisson_lognormal();
  /// `normal-normal` or `poisson-lognormal`.
  static RandomEffectsModel parse(std::string_view token, double sigma2 = 1.0);

  std::string name() const;
  int fixed_dim() const { return 1; }

  /// Throws DomainError if some outcome is impossible under the model
  /// (e.g. a non-integer Poisson count).
  void check_data(const GroupedDataset& data) const;

  /// log f(Y_i | b_i) with linear predictor eta = mu + b_i.
  double conditional_loglik(double eta, const Subject& subject) const;
  /// First and second derivative of conditional_loglik in eta.
  double conditional_d1(double eta, const Subject& subject) const;
  double conditional_d2(double eta, const Subject& subject) const;

  /// Maximizer in b of log f(Y_i | mu + b) + log phi(b; 0, tau^2), by
  /// safeguarded Newton from `start`. The objective is strictly concave for
  /// both models.
  double intercept_mode(double mu, double tau, const Subject& subject, double start = 0.0) const;
};

}  // namespace klrisk

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace klrisk {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Parameter vector of a family, in the family's natural coordinates.
using Params = Vector;

class Dataset;

enum class FamilyId { exponential, weibull, normal, binomial };

struct DensityValue {
  double log_density;
  double survival;  ///< P(X > x)
};

/// One of the supported parametric laws.
///
/// Natural parameters:
///   exponential  (rate)
///   weibull      (shape, scale)
///   normal       (mean, variance)
///   binomial     (probability); the trial count is structural, not a parameter
class Family {
 public:
  static Family exponential();
  static Family weibull();
  static Family normal();
  static Family binomial(int trials);

  /// Parses a family token: `exponential`, `weibull`, `normal`, `binomial(N)`.
  static Family parse(std::string_view token);

  FamilyId id() const { return id_; }
  int trials() const { return trials_; }
  int param_dim() const;
  std::string name() const;
  std::vector<std::string> param_names() const;

  bool is_time_to_event() const {
    return id_ == FamilyId::exponential || id_ == FamilyId::weibull;
  }
  bool is_discrete() const { return id_ == FamilyId::binomial; }

  bool accepts(const Params& theta) const;
  /// Throws DomainError unless `accepts(theta)`.
  void validate(const Params& theta) const;

  bool in_support(double x) const;

  DensityValue eval(const Params& theta, double x) const;
  double log_density(const Params& theta, double x) const;
  double survival(const Params& theta, double x) const;
  /// log P(X > x) without underflow for the time-to-event families.
  double log_survival(const Params& theta, double x) const;
  double cdf(const Params& theta, double x) const;
  double quantile(const Params& theta, double u) const;

  double mean(const Params& theta) const;
  double variance(const Params& theta) const;

  /// Inverse-CDF draws from a single seeded stream.
  std::vector<double> sample(const Params& theta, std::size_t n,
                             std::uint64_t seed) const;

  /// Method-of-moments estimate from draws; always strictly inside the box.
  Params moment_estimate(std::span<const double> draws) const;

  /// Bijection between the open parameter box and R^p (log for positive
  /// parameters, logit for probabilities, identity for the normal mean).
  Vector to_unconstrained(const Params& theta) const;
  Params from_unconstrained(const Vector& eta) const;
  /// d theta_k / d eta_k, diagonal of the Jacobian.
  Vector unconstrained_jacobian(const Vector& eta) const;

  bool operator==(const Family& other) const = default;

 private:
  Family(FamilyId id, int trials) : id_(id), trials_(trials) {}
  FamilyId id_;
  int trials_;
};

/// A family together with a valid parameter vector.
struct Law {
  Family family;
  Params theta;

  /// Parses `name:p1[,p2]`, e.g. `weibull:2.0,1.0`; validates theta.
  static Law parse(std::string_view spec);
  std::string spec() const;
};

/// Simulation ground truth.
using TrueModel = Law;

/// Closed-form maximum likelihood estimate.
///
/// Covered: exponential with exact and right-censored records
/// (events / total follow-up), normal and binomial with exact records only.
/// Everything else raises UnsupportedError; an exponential sample without
/// events raises DegenerateError.
Params analytic_mle(const Family& family, const Dataset& data);

double normal_cdf(double z);
/// Standard normal quantile, accurate to a few ulps on (0, 1).
double normal_quantile(double u);

}  // namespace klrisk

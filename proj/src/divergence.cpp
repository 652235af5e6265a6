#include "klrisk/divergence.hpp"

#include <cmath>
#include <limits>

#include "klrisk/error.hpp"
#include "klrisk/quadrature.hpp"

namespace klrisk {

namespace {

constexpr std::uint64_t kMomentSeed = 0x5EED0F4B1A5ULL;
constexpr std::size_t kMomentDraws = 10000;

/// Integration range for a continuous truth, with the shift applied to the
/// integration variable and the length unit of the infinite-range map.
struct Range {
  double lo, hi, shift, scale;
};

Range range_for(const Law& truth, std::optional<double> censor) {
  if (censor) return {0.0, *censor, 0.0, 1.0};
  if (truth.family.is_time_to_event())
    return {0.0, std::numeric_limits<double>::infinity(), 0.0,
            truth.family.quantile(truth.theta, 0.5)};
  return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          truth.theta[0], std::sqrt(truth.theta[1])};
}

double integrand(const Law& model, const Law& truth, double x) {
  if (!std::isfinite(x)) return 0.0;
  const double lf1 = truth.family.log_density(truth.theta, x);
  if (lf1 == -std::numeric_limits<double>::infinity()) return 0.0;
  const double lf2 = model.family.log_density(model.theta, x);
  return std::exp(lf1) * (lf1 - lf2);
}

/// Mesh driver for FrozenKl. The KL integrand vanishes when the anchor is
/// the truth, so the mesh is adapted to p (1 + |log p| + |log q|) instead.
double mesh_integrand(const Law& model, const Law& truth, double x) {
  if (!std::isfinite(x)) return 0.0;
  const double lf1 = truth.family.log_density(truth.theta, x);
  if (lf1 == -std::numeric_limits<double>::infinity()) return 0.0;
  const double lf2 = model.family.log_density(model.theta, x);
  return std::exp(lf1) * (1.0 + std::abs(lf1) + std::abs(lf2));
}

double censored_atom(const Law& model, const Law& truth, double c) {
  const double ls1 = truth.family.log_survival(truth.theta, c);
  if (ls1 == -std::numeric_limits<double>::infinity()) return 0.0;
  const double ls2 = model.family.log_survival(model.theta, c);
  return std::exp(ls1) * (ls1 - ls2);
}

double discrete_kl(const Law& model, const Law& truth) {
  double total = 0.0;
  for (int k = 0; k <= truth.family.trials(); ++k) {
    const double lf1 = truth.family.log_density(truth.theta, k);
    if (!model.family.in_support(k))
      throw DivergenceUndefinedError("truth puts mass outside the model support");
    total += std::exp(lf1) * (lf1 - model.family.log_density(model.theta, k));
  }
  return total;
}

void check_censoring(const Law& model, const Law& truth, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("censoring time must be finite and > 0");
  if (!model.family.is_time_to_event() || !truth.family.is_time_to_event())
    throw UnsupportedError("censored divergence needs time-to-event families");
}

/// KL as a smooth function of the model parameters: the quadrature mesh is
/// computed once and then frozen.
class FrozenKl {
 public:
  FrozenKl(const Family& family, const Law& truth, std::optional<double> censor,
           const Params& anchor)
      : family_(family), truth_(truth), censor_(censor) {
    if (truth.family.is_discrete()) return;
    range_ = range_for(truth, censor);
    const Law model{family, anchor};
    mesh_ = integrate([&](double y) { return mesh_integrand(model, truth_, y + range_.shift); },
                      range_.lo, range_.hi, {}, range_.scale)
                .mesh;
  }

  double operator()(const Params& theta) const {
    const Law model{family_, theta};
    if (truth_.family.is_discrete()) return discrete_kl(model, truth_);
    double value = integrate_on_mesh(
        [&](double y) { return integrand(model, truth_, y + range_.shift); }, mesh_, range_.lo,
        range_.hi, range_.scale);
    if (censor_) value += censored_atom(model, truth_, *censor_);
    return value;
  }

 private:
  Family family_;
  Law truth_;
  std::optional<double> censor_;
  Range range_{};
  std::vector<QuadInterval> mesh_;
};

}  // namespace

void check_support(const Law& model, const Law& truth) {
  truth.family.validate(truth.theta);
  model.family.validate(model.theta);
  if (truth.family.is_discrete() != model.family.is_discrete())
    throw DivergenceUndefinedError("cannot compare a discrete and a continuous law");
  for (int i = 0; i < 64; ++i) {
    const double x = truth.family.quantile(truth.theta, (i + 0.5) / 64.0);
    if (!model.family.in_support(x) ||
        model.family.log_density(model.theta, x) == -std::numeric_limits<double>::infinity())
      throw DivergenceUndefinedError("model " + model.spec() + " has no density at x = " +
                                     std::to_string(x) + " where truth " + truth.spec() +
                                     " does");
  }
}

double kl_full(const Law& model, const Law& truth) {
  check_support(model, truth);
  if (truth.family.is_discrete()) return discrete_kl(model, truth);
  const Range r = range_for(truth, std::nullopt);
  return integrate([&](double y) { return integrand(model, truth, y + r.shift); }, r.lo, r.hi, {},
                   r.scale)
      .value;
}

double kl_censored(const Law& model, const Law& truth, double censor_time) {
  check_censoring(model, truth, censor_time);
  check_support(model, truth);
  const double density_part =
      integrate([&](double x) { return integrand(model, truth, x); }, 0.0, censor_time).value;
  return density_part + censored_atom(model, truth, censor_time);
}

double kl(const Law& model, const Law& truth, std::optional<double> censor_time) {
  return censor_time ? kl_censored(model, truth, *censor_time) : kl_full(model, truth);
}

MonteCarloEstimate kl_oracle(const Law& model, const Law& truth,
                             std::optional<double> censor_time, std::size_t n,
                             std::uint64_t seed, Execution exec) {
  if (n < 1000) throw DomainError("kl_oracle needs at least 1000 draws");
  if (censor_time) check_censoring(model, truth, *censor_time);
  check_support(model, truth);
  const Moments m = log_ratio_moments(model, truth, censor_time, n, seed, exec);
  return {m.mean, m.std_error(), m.count};
}

MisspecificationRisk misspecification_risk(const Family& family, const TrueModel& truth,
                                           std::optional<double> censor_time) {
  truth.family.validate(truth.theta);
  const auto draws = truth.family.sample(truth.theta, kMomentDraws, kMomentSeed);
  if (family.is_time_to_event()) {
    for (double x : draws)
      if (!(x > 0.0))
        throw DivergenceUndefinedError("truth " + truth.spec() +
                                       " puts mass outside the support of " + family.name());
  }
  Params start = family.moment_estimate(draws);
  check_support({family, start}, truth);
  if (censor_time) check_censoring({family, start}, truth, *censor_time);

  MaximizeOptions opts;
  opts.hessian_init = true;
  FitResult fit;
  Params theta = start;
  // two passes: the second refreezes the mesh around the first optimum
  for (int pass = 0; pass < 2; ++pass) {
    const FrozenKl divergence(family, truth, censor_time, theta);
    const Objective objective = [&](const Vector& eta) {
      const Params t = family.from_unconstrained(eta);
      if (!family.accepts(t)) return -std::numeric_limits<double>::infinity();
      return -divergence(t);
    };
    fit = maximize(objective, family.to_unconstrained(theta), opts);
    theta = family.from_unconstrained(fit.theta_hat);
  }

  bool at_boundary = !family.accepts(theta) || fit.theta_hat.cwiseAbs().maxCoeff() > 30.0;
  double risk = std::numeric_limits<double>::quiet_NaN();
  if (family.accepts(theta)) risk = kl({family, theta}, truth, censor_time);
  return {theta, risk, at_boundary, fit};
}

}  // namespace klrisk

#include "klrisk/penalized.hpp"

#include <cmath>
#include <limits>

#include "klrisk/error.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/quadrature.hpp"

namespace klrisk {

namespace {

constexpr int kHazardRule = 7;
constexpr std::pair<double, double> kKappaRange{1e-8, 1e8};

MaximizeOptions fit_options() {
  MaximizeOptions opts;
  opts.tol = 1e-8;
  opts.max_iter = 1000;
  opts.hessian_init = true;
  return opts;
}

Vector flat_start(const Dataset& data, int spline_dim, int covariate_dim) {
  if (data.events() == 0) throw DomainError("penalized fit needs at least one event");
  Vector x = Vector::Zero(spline_dim + covariate_dim);
  x.head(spline_dim).setConstant(std::log(static_cast<double>(data.events()) / data.total_time()));
  return x;
}

PenalizedFit finish(const SplineLikelihood& lik, FitResult fit, double kappa, std::size_t n) {
  fit.n_obs = n;
  const Vector& x = fit.theta_hat;
  const double j = lik.curvature(x.head(lik.spline_dim()));
  const double ll = lik.loglik(x);
  SplineHazardModel model = lik.model_at(x);
  return {std::move(model), std::move(fit), kappa, j, ll};
}

}  // namespace

Vector SplineHazardModel::coefficients() const {
  Vector x(a.size() + beta.size());
  x << a, beta;
  return x;
}

SplineLikelihood::SplineLikelihood(const Dataset& data, BSplineBasis basis, int refine)
    : basis_(std::move(basis)), covariate_dim_(static_cast<int>(data.covariate_dim())) {
  if (refine < 1) throw DomainError("quadrature refinement must be >= 1");
  omega_ = penalty_matrix(basis_);
  const GaussRule& rule = gauss_legendre(kHazardRule);
  const auto bp = basis_.breakpoints();

  auto nodes_on = [&](double lo, double hi) {
    std::vector<Node> nodes;
    const double width = (hi - lo) / refine;
    for (int r = 0; r < refine; ++r) {
      const double a = lo + r * width;
      const double half = 0.5 * width, mid = a + half;
      for (std::size_t g = 0; g < rule.nodes.size(); ++g)
        nodes.push_back({basis_.eval(mid + half * rule.nodes[g]), half * rule.weights[g]});
    }
    return nodes;
  };

  full_.reserve(basis_.intervals());
  for (int j = 0; j < basis_.intervals(); ++j) full_.push_back(nodes_on(bp[j], bp[j + 1]));

  records_.reserve(data.size());
  for (const auto& o : data) {
    if (o.time < basis_.lower() || o.time > basis_.upper())
      throw DomainError("observation time " + std::to_string(o.time) +
                        " outside the spline range");
    Record rec{o.is_event(), o.covariates, basis_.eval(o.time), basis_.interval_of(o.time), {}};
    if (o.time > bp[rec.interval]) rec.partial = nodes_on(bp[rec.interval], o.time);
    records_.push_back(std::move(rec));
  }

  const GaussRule& sq = gauss_legendre(3);
  for (int j = 0; j < basis_.intervals(); ++j) {
    const double half = 0.5 * (bp[j + 1] - bp[j]), mid = 0.5 * (bp[j + 1] + bp[j]);
    for (std::size_t g = 0; g < sq.nodes.size(); ++g) {
      curvature_rows_.push_back(basis_.eval(mid + half * sq.nodes[g], 2));
      curvature_weights_.push_back(half * sq.weights[g]);
    }
  }
}

std::vector<double> SplineLikelihood::cumulative_hazards(const Vector& coeffs) const {
  if (coeffs.size() != dim()) throw DomainError("coefficient vector has the wrong length");
  const auto a = coeffs.head(spline_dim());
  const auto beta = coeffs.tail(covariate_dim());

  std::vector<double> before(full_.size() + 1, 0.0);
  for (std::size_t j = 0; j < full_.size(); ++j) {
    double piece = 0.0;
    for (const auto& node : full_[j]) piece += node.weight * std::exp(node.row.dot(a));
    before[j + 1] = before[j] + piece;
  }
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& rec : records_) {
    double cum = before[rec.interval];
    for (const auto& node : rec.partial) cum += node.weight * std::exp(node.row.dot(a));
    double lp = 0.0;
    for (int k = 0; k < covariate_dim_; ++k) lp += beta[k] * rec.z[k];
    out.push_back(std::exp(lp) * cum);
  }
  return out;
}

double SplineLikelihood::loglik(const Vector& coeffs) const {
  const auto cum = cumulative_hazards(coeffs);
  const auto a = coeffs.head(spline_dim());
  const auto beta = coeffs.tail(covariate_dim());
  CompensatedSum total;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (rec.event) {
      double lp = 0.0;
      for (int k = 0; k < covariate_dim_; ++k) lp += beta[k] * rec.z[k];
      total.add(rec.at_time.dot(a) + lp);
    }
    total.add(-cum[i]);
  }
  return total.value();
}

double SplineLikelihood::curvature(const Vector& a) const {
  if (a.size() != spline_dim()) throw DomainError("spline coefficient vector has the wrong length");
  double total = 0.0;
  for (std::size_t g = 0; g < curvature_rows_.size(); ++g) {
    const double second = curvature_rows_[g].dot(a);
    total += curvature_weights_[g] * second * second;
  }
  return total;
}

SplineHazardModel SplineLikelihood::model_at(const Vector& coeffs) const {
  return {basis_, coeffs.head(spline_dim()), coeffs.tail(covariate_dim())};
}

BSplineBasis default_basis(const Dataset& data, int m) {
  return BSplineBasis::equally_spaced(data.max_time(), m);
}

double penalized_loglik(const SplineHazardModel& model, const Dataset& data, double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be finite and >= 0");
  const SplineLikelihood lik(data, model.basis);
  if (model.a.size() != lik.spline_dim() || model.beta.size() != lik.covariate_dim())
    throw DomainError("model coefficients do not match the basis and covariates");
  const double j = lik.curvature(model.a);
  return lik.loglik(model.coefficients()) - (kappa > 0.0 ? kappa * j : 0.0);
}

PenalizedFit fit_penalized(const Dataset& data, const BSplineBasis& basis, double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be finite and >= 0");
  const SplineLikelihood lik(data, basis);
  const int m = lik.spline_dim();
  const Objective objective = [&](const Vector& x) {
    const double ll = lik.loglik(x);
    return kappa > 0.0 ? ll - kappa * lik.curvature(x.head(m)) : ll;
  };
  FitResult fit = maximize(objective, flat_start(data, m, lik.covariate_dim()), fit_options());
  return finish(lik, std::move(fit), kappa, data.size());
}

SieveFit fit_sieve(const Dataset& data, const BSplineBasis& basis, double nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("nu must be finite and >= 0");
  const double inf = std::numeric_limits<double>::infinity();

  if (nu == 0.0) {
    // alpha restricted to the affine null space: a = c0 + c1 * greville
    const SplineLikelihood lik(data, basis);
    const int m = lik.spline_dim(), q = lik.covariate_dim();
    const auto xi = basis.greville();
    const Vector slope = Eigen::Map<const Vector>(xi.data(), m);
    auto expand = [&](const Vector& c) {
      Vector x(m + q);
      x.head(m) = Vector::Constant(m, c[0]) + c[1] * slope;
      x.tail(q) = c.tail(q);
      return x;
    };
    Vector c0 = Vector::Zero(2 + q);
    c0[0] = flat_start(data, m, q)[0];
    FitResult fit = maximize([&](const Vector& c) { return lik.loglik(expand(c)); }, c0,
                             fit_options());
    fit.theta_hat = expand(fit.theta_hat);
    fit.p = m + q;
    return {finish(lik, std::move(fit), inf, data.size()), inf, inf, true, 0};
  }

  PenalizedFit free = fit_penalized(data, basis, 0.0);
  if (free.j_value <= nu) return {std::move(free), 0.0, 0.0, false, 0};

  auto fit_at = [&](double kappa) {
    PenalizedFit pf = fit_penalized(data, basis, kappa);
    return CurvePoint{pf.fit, pf.j_value};
  };

  double lo = 0.1, hi = 10.0;
  while (fit_at(lo).j_value < nu) {
    lo /= 10.0;
    if (lo < kKappaRange.first) throw RangeError("no kappa >= 1e-8 reaches J >= nu");
  }
  while (fit_at(hi).j_value > nu) {
    hi *= 10.0;
    if (hi > kKappaRange.second) throw RangeError("no kappa <= 1e8 brings J down to nu");
  }

  const ConstraintMatch match = match_constraint(fit_at, nu, {lo, hi});
  const SplineLikelihood lik(data, basis);
  PenalizedFit pf = finish(lik, match.point.fit, match.kappa, data.size());
  return {std::move(pf), match.kappa, match.kappa, !match.inactive, match.iterations};
}

KktResidual kkt_residual(const SplineHazardModel& model, double lambda, double nu,
                         const Dataset& data) {
  const SplineLikelihood lik(data, model.basis);
  const Vector x = model.coefficients();
  const Vector grad_ll = numeric_gradient([&](const Vector& v) { return lik.loglik(v); }, x);
  Vector grad_j = Vector::Zero(x.size());
  grad_j.head(lik.spline_dim()) = 2.0 * lik.omega() * model.a;
  const double j = lik.curvature(model.a);

  KktResidual r{};
  r.grad_residual = (lambda == 0.0) ? grad_ll.lpNorm<Eigen::Infinity>()
                                    : (grad_ll - lambda * grad_j).lpNorm<Eigen::Infinity>();
  r.primal_feasibility = std::max(0.0, j - nu);
  r.dual_feasible = lambda >= 0.0;
  r.complementarity = (lambda == 0.0) ? 0.0 : std::abs(lambda * (j - nu));
  return r;
}

}  // namespace klrisk

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "klrisk/error.hpp"
#include "klrisk/hlik.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/rng.hpp"
#include "oracle.hpp"
#include "simdata.hpp"

using namespace klrisk;

namespace {

Params p1(double a) { return Vector::Constant(1, a); }

/// Closed-form normal-normal marginal: Y_i ~ N(mu 1, sigma2 I + tau2 11').
double conjugate_marginal(const GroupedDataset& g, double mu, double sigma2, double tau2) {
  double total = 0.0;
  for (const auto& s : g) {
    const auto n = static_cast<double>(s.outcomes.size());
    double ss = 0.0, sum = 0.0;
    for (double y : s.outcomes) {
      ss += (y - mu) * (y - mu);
      sum += y - mu;
    }
    const double logdet = (n - 1.0) * std::log(sigma2) + std::log(sigma2 + n * tau2);
    const double quad = ss / sigma2 - tau2 / (sigma2 * (sigma2 + n * tau2)) * sum * sum;
    total += -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet + quad);
  }
  return total;
}

GroupedDataset unbalanced_normal(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Subject> subjects;
  for (int i = 0; i < 40; ++i) {
    const double b = 0.7 * normal_quantile(rng.uniform());
    Subject s{std::to_string(i), {}};
    for (int j = 0; j < 1 + i % 6; ++j) s.outcomes.push_back(0.3 + b + normal_quantile(rng.uniform()));
    subjects.push_back(std::move(s));
  }
  return GroupedDataset(std::move(subjects));
}

}  // namespace

TEST_CASE("censored log-likelihood") {
  const Dataset one({Observation::exact(2)});
  CHECK(loglik(Family::exponential(), p1(0.5), one) ==
        doctest::Approx(std::log(0.5) - 1.0).epsilon(1e-14));
  const Dataset two({Observation::exact(2), Observation::censored(3)});
  CHECK(loglik(Family::exponential(), p1(0.5), two) ==
        doctest::Approx(std::log(0.5) - 1.0 - 1.5).epsilon(1e-14));
  CHECK_THROWS_AS(loglik(Family::exponential(), p1(-0.5), two), DomainError);

  const auto terms = loglik_terms(Family::exponential(), p1(0.5), two);
  CHECK(terms.size() == 2);
  CHECK(terms[1] == doctest::Approx(-1.5));
}

TEST_CASE("the analytic MLE dominates a grid") {
  const Dataset d = simdata::exponential_data(1.3, 200, 5, 1.5);
  const double lam = analytic_mle(Family::exponential(), d)[0];
  const double best = loglik(Family::exponential(), p1(lam), d);
  for (int i = -50; i < 50; ++i) {
    if (i == 0) continue;
    CHECK(loglik(Family::exponential(), p1(lam * (1.0 + 0.004 * i)), d) < best);
  }
}

TEST_CASE("log-likelihood is invariant to observation order") {
  const Dataset d = simdata::exponential_data(0.8, 100, 9, 2.0);
  std::vector<std::size_t> rows(d.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = (i * 37) % rows.size();
  const Dataset perm = d.subset(rows);
  CHECK(loglik(Family::weibull(), (Vector(2) << 1.3, 1.1).finished(), perm) ==
        doctest::Approx(loglik(Family::weibull(), (Vector(2) << 1.3, 1.1).finished(), d))
            .epsilon(1e-13));
}

TEST_CASE("numerical MLE reproduces closed forms") {
  const Dataset cens({Observation::exact(1), Observation::exact(2), Observation::censored(3)});
  const FitResult fe = fit_mle(Family::exponential(), cens);
  CHECK(fe.converged);
  CHECK(std::abs(fe.theta_hat[0] - 1.0 / 3.0) < 1e-8);
  CHECK(fe.n_obs == 3);

  const Dataset norm = simdata::exact_data({0.3, 1.7, -0.4, 2.2, 0.9, 1.1});
  const FitResult fn = fit_mle(Family::normal(), norm);
  const Params exact = analytic_mle(Family::normal(), norm);
  CHECK((fn.theta_hat - exact).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(score_and_information(Family::normal(), fn.theta_hat, norm).score.lpNorm<Eigen::Infinity>() <
        1e-5);

  // weibull: score vanishes at the numerical optimum
  const Dataset w = simdata::bathtub_data(300, 4);
  const FitResult fw = fit_mle(Family::weibull(), w);
  CHECK(fw.converged);
  CHECK(score_and_information(Family::weibull(), fw.theta_hat, w).score.lpNorm<Eigen::Infinity>() <
        1e-5);
}

TEST_CASE("finite-difference score matches the exponential closed form") {
  const Dataset d = simdata::exponential_data(2.0, 500, 21, 0.8);
  for (double rate : {0.2, 0.9, 1.7, 3.5, 10.0}) {
    const double fd = score_and_information(Family::exponential(), p1(rate), d).score[0];
    const double exact = exponential_score(rate, d);
    CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
  }
}

TEST_CASE("observed information for exponential data") {
  const Dataset d = simdata::exponential_data(1.5, 400, 8);
  const double lam = analytic_mle(Family::exponential(), d)[0];
  const auto si = score_and_information(Family::exponential(), p1(lam), d);
  CHECK(std::abs(si.score[0]) < 1e-5);
  // per-observation units: n I = n / lambda^2
  CHECK(si.info.observed(0, 0) * d.size() ==
        doctest::Approx(d.size() / (lam * lam)).epsilon(1e-4));

  const auto w = score_and_information(Family::weibull(), (Vector(2) << 1.1, 0.7).finished(), d);
  CHECK(std::abs(w.info.observed(0, 1) - w.info.observed(1, 0)) < 1e-10);
  CHECK(std::abs(w.info.score_variance(0, 1) - w.info.score_variance(1, 0)) < 1e-10);
}

TEST_CASE("trace ratio is near p for a well-specified model") {
  double total = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = simdata::exponential_data(1.0, 5000, derive_seed(31, r));
    const double lam = analytic_mle(Family::exponential(), d)[0];
    total += trace_ratio(score_and_information(Family::exponential(), p1(lam), d).info);
  }
  CHECK(std::abs(total / reps - 1.0) < 0.1);
}

TEST_CASE("Gauss-Hermite marginal matches the conjugate closed form") {
  const auto model = RandomEffectsModel::normal_normal(1.0);
  const GroupedDataset g = unbalanced_normal(12);
  const double tau = std::sqrt(0.5);
  for (double mu : {-0.5, 0.3, 1.2}) {
    const double gh = marginal_loglik(model, p1(mu), tau, g, 40);
    CHECK(std::abs(gh - conjugate_marginal(g, mu, 1.0, 0.5)) < 1e-8);
    CHECK(std::abs(marginal_loglik(model, p1(mu), tau, g, 50) -
                   marginal_loglik(model, p1(mu), tau, g, 30)) < 1e-10);
  }
}

TEST_CASE("degenerate random effect gives the iid normal likelihood") {
  const auto model = RandomEffectsModel::normal_normal(1.0);
  const GroupedDataset g = unbalanced_normal(3);
  std::vector<double> all;
  for (const auto& s : g)
    for (double y : s.outcomes) all.push_back(y);
  const double iid = loglik(Family::normal(), (Vector(2) << 0.2, 1.0).finished(),
                            simdata::exact_data(all));
  CHECK(std::abs(marginal_loglik(model, p1(0.2), 1e-6, g, 40) - iid) < 1e-6);
}

TEST_CASE("moving an outcome away from its subject lowers the marginal") {
  const auto model = RandomEffectsModel::normal_normal(1.0);
  double prev = 0.0;
  for (int step = 0; step < 6; ++step) {
    const GroupedDataset g({Subject{"a", {0.0, 0.1, -0.1 + 0.5 * step}}, Subject{"b", {1.0}}});
    const double v = marginal_loglik(model, p1(0.0), 1.0, g, 40);
    if (step > 0) CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("Poisson marginal against a Simpson oracle") {
  const auto model = RandomEffectsModel::poisson_lognormal();
  const GroupedDataset g({Subject{"1", {0, 3}}, Subject{"2", {5, 7}}, Subject{"3", {1}}});
  const double mu = 0.8, tau = 0.9;
  double expected = 0.0;
  for (const auto& s : g) {
    auto f = [&](double b) {
      double lf = -0.5 * std::log(2 * std::numbers::pi * tau * tau) - 0.5 * b * b / (tau * tau);
      for (double y : s.outcomes) {
        const double eta = mu + b;
        lf += y * eta - std::exp(eta) - std::lgamma(y + 1.0);
      }
      return std::exp(lf);
    };
    expected += std::log(oracle::simpson_extrapolated(f, -12 * tau, 12 * tau, 20000));
  }
  CHECK(marginal_loglik(model, p1(mu), tau, g, 40) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("marginal argument checks") {
  const auto model = RandomEffectsModel::normal_normal(1.0);
  const GroupedDataset g({Subject{"a", {1.0}}});
  CHECK_THROWS_AS(marginal_loglik(model, p1(0.0), 0.0, g, 40), DomainError);
  CHECK_THROWS_AS(marginal_loglik(model, p1(0.0), 1.0, g, 4), DomainError);
  CHECK_THROWS_AS(marginal_loglik(RandomEffectsModel::poisson_lognormal(), p1(0.0), 1.0,
                                  GroupedDataset({Subject{"a", {1.5}}}), 40),
                  DomainError);
}

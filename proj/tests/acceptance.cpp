// Runs the acceptance criteria and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "klrisk/data.hpp"
#include "klrisk/divergence.hpp"
#include "klrisk/error.hpp"
#include "klrisk/hlik.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/penalized.hpp"
#include "klrisk/rng.hpp"
#include "klrisk/selection.hpp"
#include "oracle.hpp"
#include "simdata.hpp"

using namespace klrisk;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  Verdict() { detail.precision(10); }

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;
  std::function<void(Verdict&)> body;
};

Params p1(double a) { return Vector::Constant(1, a); }
Params p2(double a, double b) { return (Vector(2) << a, b).finished(); }

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

GroupedDataset unbalanced_normal(std::uint64_t seed, double sigma2, double tau) {
  Rng rng(seed);
  std::vector<Subject> subjects;
  for (int i = 0; i < 60; ++i) {
    const double b = tau * normal_quantile(rng.uniform());
    Subject s{"s" + std::to_string(i), {}};
    for (int j = 0; j < 1 + (i * 5) % 7; ++j)
      s.outcomes.push_back(1.5 + b + std::sqrt(sigma2) * normal_quantile(rng.uniform()));
    subjects.push_back(std::move(s));
  }
  return GroupedDataset(std::move(subjects));
}

/// Weighted least squares for mu and shrunken subject means for b.
std::pair<double, Vector> gls_blup(const GroupedDataset& g, double sigma2, double tau) {
  const double t2 = tau * tau;
  double num = 0.0, den = 0.0;
  std::vector<double> means;
  for (const auto& s : g) {
    double sum = 0.0;
    for (double y : s.outcomes) sum += y;
    const double n = static_cast<double>(s.outcomes.size());
    means.push_back(sum / n);
    const double w = 1.0 / (t2 + sigma2 / n);
    num += w * means.back();
    den += w;
  }
  const double mu = num / den;
  Vector b(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double n = static_cast<double>(g[i].outcomes.size());
    b[static_cast<Eigen::Index>(i)] = t2 / (t2 + sigma2 / n) * (means[i] - mu);
  }
  return {mu, b};
}

Dataset weibull_data(double shape, double scale, std::size_t n, std::uint64_t seed) {
  std::vector<double> xs = Family::weibull().sample(p2(shape, scale), n, seed);
  return simdata::exact_data(xs);
}

int run_cli(const std::vector<std::string>& args, std::string& out) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  out = o.str();
  return code;
}

std::string temp_file(const std::string& name, const std::string& contents) {
  const std::string path = "/tmp/klrisk_acceptance_" + name;
  FILE* f = std::fopen(path.c_str(), "w");
  std::fputs(contents.c_str(), f);
  std::fclose(f);
  return path;
}

std::vector<Criterion> criteria() {
  std::vector<Criterion> c;

  c.push_back({1, "closed-form divergences", 1.0, [](Verdict& v) {
    const double e = kl_full(Law::parse("exponential:2.0"), Law::parse("exponential:1.0"));
    const double n = kl_full(Law::parse("normal:1,1"), Law::parse("normal:0,1"));
    v.detail << "exp " << e << " (closed form " << oracle::kl_exponential(2.0, 1.0) << "), normal "
             << n << " ";
    v.require(std::abs(e - 0.306853) < 1e-6 && std::abs(e - (std::log(0.5) + 1.0)) < 1e-8,
              "exponential pair");
    v.require(std::abs(n - 0.5) < 1e-8, "normal pair");
  }});

  c.push_back({2, "censored divergence", 30.0, [](Verdict& v) {
    const Law m = Law::parse("exponential:2.0"), t = Law::parse("exponential:1.0");
    const double k = kl_censored(m, t, 1.0);
    const double closed = oracle::kl_exponential_censored(2.0, 1.0, 1.0);
    // density part by Simpson plus the atom at C
    const double simpson =
        oracle::simpson_extrapolated(
            [](double x) { return std::exp(-x) * (std::log(0.5) + x); }, 0.0, 1.0, 2000) +
        std::exp(-1.0) * (-1.0 + 2.0);
    v.detail << "value " << k << " closed " << closed << " simpson " << simpson << " ";
    v.require(std::abs(k - 0.193967) < 1e-6 && std::abs(k - closed) < 1e-6 &&
                  std::abs(k - simpson) < 1e-6,
              "quadrature oracle");
    const MonteCarloEstimate mc = kl_oracle(m, t, 1.0, 1000000, 20240501);
    v.detail << "mc " << mc.estimate << " se " << mc.std_error << " ";
    v.require(std::abs(mc.estimate - k) < 3.0 * mc.std_error, "Monte Carlo within 3 SE");

    int checked = 0, violated = 0;
    const std::vector<Law> truths{Law::parse("exponential:1.0"), Law::parse("weibull:1.5,1.0")};
    for (int i = 0; i < 20; ++i) {
      const Law model{Family::exponential(), p1(0.2 + 0.2 * i)};
      const Law& truth = truths[static_cast<std::size_t>(i % 2)];
      const double full = kl_full(model, truth);
      for (double cen : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        ++checked;
        if (kl_censored(model, truth, cen) > full + 1e-12) ++violated;
      }
    }
    v.detail << "coarsening " << checked - violated << "/" << checked << " ";
    v.require(violated == 0 && checked == 100, "coarsening inequality");
  }});

  c.push_back({3, "MLE oracles", 1.0, [](Verdict& v) {
    const Dataset cens = simdata::exponential_data(1.7, 300, 5, 1.0);
    const FitResult fe = fit_mle(Family::exponential(), cens);
    const double le = analytic_mle(Family::exponential(), cens)[0];
    const Dataset nd = simdata::exact_data(Family::normal().sample(p2(1.3, 0.8), 300, 6));
    const FitResult fn = fit_mle(Family::normal(), nd);
    const Params ln = analytic_mle(Family::normal(), nd);
    const double err = std::max(std::abs(fe.theta_hat[0] - le), (fn.theta_hat - ln).cwiseAbs().maxCoeff());
    const double score =
        std::max(score_and_information(Family::exponential(), fe.theta_hat, cens).score.lpNorm<Eigen::Infinity>(),
                 score_and_information(Family::normal(), fn.theta_hat, nd).score.lpNorm<Eigen::Infinity>());
    // the same maxima from cold starts at rate 1 and N(0, 1)
    const auto cold = [](const Family& fam, const Dataset& d, const Params& start) {
      const Objective obj = [&](const Vector& eta) {
        const Params t = fam.from_unconstrained(eta);
        return fam.accepts(t) ? loglik(fam, t, d) : -std::numeric_limits<double>::infinity();
      };
      return fam.from_unconstrained(maximize(obj, fam.to_unconstrained(start)).theta_hat);
    };
    const double cold_err =
        std::max(std::abs(cold(Family::exponential(), cens, Params::Constant(1, 1.0))[0] - le),
                 (cold(Family::normal(), nd, p2(0.0, 1.0)) - ln).cwiseAbs().maxCoeff());
    v.detail << "max error " << err << " cold start error " << cold_err << " score " << score << " ";
    v.require(err < 1e-8, "estimates");
    v.require(cold_err < 1e-8, "cold start estimates");
    v.require(score < 1e-5, "score");
    v.require(fe.converged && fn.converged, "converged");
  }});

  c.push_back({4, "expected divergence of the fitted law", 120.0, [](Verdict& v) {
    const Law truth = Law::parse("exponential:1.0");
    const EklSimulation a = simulate_ekl(truth, Family::exponential(), 200, 1000, std::nullopt, 42);
    const EklSimulation b = simulate_ekl(truth, Family::exponential(), 800, 1000, std::nullopt, 43);
    const double ratio = a.statistical_component / b.statistical_component;
    v.detail << "mean_ekl " << a.mean_ekl << " (se " << a.ekl_std_error << ") misspec "
             << a.misspec_component << " ratio n/4n " << ratio << " failures " << a.failures
             << "+" << b.failures << " ";
    v.require(a.mean_ekl >= 0.00175 && a.mean_ekl <= 0.00325, "mean_ekl band");
    v.require(a.misspec_component < 1e-10, "misspecification component");
    v.require(std::abs(ratio - 4.0) <= 0.35 * 4.0, "scaling in n");
  }});

  c.push_back({5, "information trace ratio", 60.0, [](Verdict& v) {
    const EklSimulation ex =
        simulate_ekl(Law::parse("exponential:1.0"), Family::exponential(), 500, 200, std::nullopt, 7);
    const EklSimulation wb =
        simulate_ekl(Law::parse("weibull:2.0,1.0"), Family::weibull(), 500, 200, std::nullopt, 8);
    v.detail << "exponential " << ex.mean_trace_ratio << " (p=1) weibull " << wb.mean_trace_ratio
             << " (p=2) ";
    v.require(std::abs(ex.mean_trace_ratio - 1.0) <= 0.1, "p = 1");
    v.require(std::abs(wb.mean_trace_ratio - 2.0) <= 0.2, "p = 2");
  }});

  c.push_back({6, "penalty/constraint duality", 120.0, [](Verdict& v) {
    const Dataset d = simdata::bathtub_data(400, 2718);
    const BSplineBasis basis = default_basis(d);
    double prev_j = std::numeric_limits<double>::infinity();
    double worst_coef = 0.0, worst_lambda = 0.0, worst_kkt = 0.0;
    bool decreasing = true;
    for (double kappa : {0.01, 0.1, 1.0, 10.0}) {
      const PenalizedFit pf = fit_penalized(d, basis, kappa);
      const SieveFit sf = fit_sieve(d, basis, pf.j_value);
      decreasing = decreasing && pf.j_value < prev_j;
      prev_j = pf.j_value;
      worst_coef = std::max(worst_coef, (sf.fit.model.coefficients() - pf.model.coefficients())
                                            .lpNorm<Eigen::Infinity>());
      worst_lambda = std::max(worst_lambda, std::abs(sf.lambda - kappa) / kappa);
      const KktResidual k = kkt_residual(sf.fit.model, sf.lambda, pf.j_value, d);
      v.require(k.dual_feasible, "dual feasibility");
      worst_kkt = std::max({worst_kkt, k.grad_residual, k.primal_feasibility, k.complementarity});
    }
    v.detail << "coef " << worst_coef << " lambda rel " << worst_lambda << " kkt " << worst_kkt
             << " ";
    v.require(worst_coef < 1e-6, "coefficients");
    v.require(worst_lambda < 1e-4, "multiplier");
    v.require(worst_kkt < 1e-6, "KKT residuals");
    v.require(decreasing, "J decreasing in kappa");
  }});

  c.push_back({7, "penalty limits", 60.0, [](Verdict& v) {
    const Dataset d = simdata::bathtub_data(400, 2718);
    const BSplineBasis basis = default_basis(d);
    const SplineLikelihood lik(d, basis);
    const FitResult mle =
        maximize([&](const Vector& x) { return lik.loglik(x); }, Vector::Zero(basis.dim()));
    const PenalizedFit free = fit_penalized(d, basis, 0.0);
    const PenalizedFit stiff = fit_penalized(d, basis, 1e6);
    const BSplineBasis unit = BSplineBasis::equally_spaced(2.5, 12);
    const Matrix omega = penalty_matrix(unit);
    const auto xi = unit.greville();
    Vector affine(unit.dim());
    for (int k = 0; k < unit.dim(); ++k) affine[k] = -1.0 + 2.0 * xi[static_cast<std::size_t>(k)];
    const Vector sq = unit.interpolate([](double u) { return u * u; });
    const double null_val = (omega * affine).lpNorm<Eigen::Infinity>();
    const double sq_err = std::abs(sq.dot(omega * sq) - 10.0);
    v.detail << "loglik gap " << std::abs(free.loglik - mle.loglik_at_max) << " stiff J "
             << stiff.j_value << " affine " << null_val << " u^2 error " << sq_err << " ";
    v.require(std::abs(free.loglik - mle.loglik_at_max) < 1e-8, "kappa = 0");
    v.require(stiff.j_value < 1e-6, "kappa = 1e6");
    v.require(null_val < 1e-12, "affine null space");
    v.require(sq_err < 1e-10, "4T");
  }});

  c.push_back({8, "marginal likelihood quadrature", 10.0, [](Verdict& v) {
    const auto model = RandomEffectsModel::normal_normal(1.0);
    const GroupedDataset g = unbalanced_normal(12, 1.0, 0.7);
    double worst = 0.0, nodes = 0.0;
    for (double mu : {-0.5, 0.3, 1.2})
      for (double tau : {0.3, 0.7, 1.5}) {
        const double gh = marginal_loglik(model, p1(mu), tau, g, 40);
        worst = std::max(worst, std::abs(gh - conjugate_marginal(g, mu, 1.0, tau * tau)));
        nodes = std::max(nodes, std::abs(marginal_loglik(model, p1(mu), tau, g, 50) -
                                         marginal_loglik(model, p1(mu), tau, g, 30)));
      }
    v.detail << "conjugate gap " << worst << " 30 vs 50 nodes " << nodes << " ";
    v.require(worst < 1e-8, "conjugate closed form");
    v.require(nodes < 1e-10, "node refinement");
  }});

  c.push_back({9, "h-likelihood oracles", 180.0, [](Verdict& v) {
    const double sigma2 = 1.3, tau = 0.9;
    const auto nn = RandomEffectsModel::normal_normal(sigma2);
    const GroupedDataset g = unbalanced_normal(7, sigma2, tau);
    const HlikFit fit = fit_hlik(nn, g, tau);
    const auto [mu, b] = gls_blup(g, sigma2, tau);
    const double err =
        std::max(std::abs(fit.gamma.theta[0] - mu), (fit.gamma.b - b).lpNorm<Eigen::Infinity>());
    const MarginalComparison cmp = compare_with_marginal(nn, g, tau);
    v.detail << "GLS/BLUP error " << err << " marginal gap " << cmp.gap << " ";
    v.require(err < 1e-8, "GLS/BLUP");
    v.require(cmp.gap < 1e-8, "normal-normal gap");

    const auto pl = RandomEffectsModel::poisson_lognormal();
    std::vector<double> signed_gap;
    bool finite = true;
    for (std::uint64_t r = 0; r < 100; ++r) {
      const GroupedDataset pg = simulate_grouped(pl, 0.5, 1.0, 100, 3, derive_seed(99, r));
      const MarginalComparison m = compare_with_marginal(pl, pg, 1.0);
      const double d = m.theta_hlik[0] - m.theta_marginal[0];
      finite = finite && std::isfinite(d);
      signed_gap.push_back(d);
    }
    std::sort(signed_gap.begin(), signed_gap.end());
    double mean = 0.0;
    for (double d : signed_gap) mean += d / 100.0;
    v.detail << "Poisson mu_h - mu_marginal: mean " << mean << " min " << signed_gap.front()
             << " median " << 0.5 * (signed_gap[49] + signed_gap[50]) << " max "
             << signed_gap.back() << " ";
    v.require(finite, "finite Poisson gaps");
  }});

  c.push_back({10, "model selection", 300.0, [](Verdict& v) {
    FitResult a, b;
    a.loglik_at_max = -118.0, a.p = 2, a.converged = true;
    b.loglik_at_max = -115.0, b.p = 3, b.converged = true;
    const ModelScores sa = model_scores(a, 100), sb = model_scores(b, 100);
    v.require(sa.aic == 240.0 && sb.aic == 236.0 && sa.ekl == 1.2 && sa.aic == 2.0 * 100 * sa.ekl,
              "AIC/EKL identities");
    v.require(risk_difference(a, b, 100) == (sa.aic - sb.aic) / 200.0 &&
                  risk_difference(a, a, 100) == 0.0,
              "D identities");

    int favored = 0;
    for (std::uint64_t r = 0; r < 100; ++r) {
      const Dataset d = weibull_data(2.0, 1.0, 500, derive_seed(2025, r));
      if (risk_difference(fit_mle(Family::exponential(), d), fit_mle(Family::weibull(), d), 500) >
          0.0)
        ++favored;
    }
    v.detail << "D favors Weibull " << favored << "/100 ";
    v.require(favored >= 95, "D direction");

    const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
    int rejected = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Dataset d = simdata::bathtub_data(400, derive_seed(77, s));
      const LcvResult lcv = lcv_select(d, default_basis(d), grid, 5, s);
      if (lcv.kappa_star < grid.back()) ++rejected;
    }
    v.detail << "LCV rejects largest kappa " << rejected << "/20 ";
    v.require(rejected >= 18, "LCV");
  }});

  c.push_back({11, "MAP demonstration", 1.0, [](Verdict& v) {
    bool flat = true;
    for (int n = 1; n <= 50; ++n)
      for (int k = 0; k <= n; ++k)
        flat = flat && map_estimate(k, n, Prior::flat) == static_cast<double>(k) / n;
    const double j = map_estimate(6, 10, Prior::jeffreys);
    v.detail << "jeffreys(6,10) " << j << " ";
    v.require(flat, "flat prior");
    v.require(std::abs(j - 5.5 / 9.0) < 1e-12, "Jeffreys");
    v.require(map_estimate(5, 10, Prior::flat) == 0.5 && map_estimate(5, 10, Prior::jeffreys) == 0.5,
              "symmetric case");
  }});

  c.push_back({12, "command-line contract", 60.0, [](Verdict& v) {
    const std::string good = temp_file("good.csv", "time,status\n1,1\n2,1\n3,0\n");
    const std::string bath =
        temp_file("bath.csv", serialize_dataset(simdata::bathtub_data(150, 8)));
    const std::vector<std::vector<std::string>> seeded{
        {"kl", "--true", "weibull:2,1", "--model", "exponential:1.1", "--oracle", "20000", "--seed", "9"},
        {"simulate-ekl", "--true", "exponential:1", "--family", "exponential", "--n", "50", "--reps",
         "100", "--seed", "4"},
        {"penfit", "--data", bath, "--knots", "8", "--lcv", "--kappa-grid", "0.01,1,100", "--seed", "3"},
        {"fit", "--family", "weibull", "--data", bath}};
    int identical = 0;
    for (const auto& args : seeded) {
      std::string x, y;
      if (run_cli(args, x) == 0 && run_cli(args, y) == 0 && x == y && !x.empty()) ++identical;
    }
    v.detail << "byte-identical " << identical << "/" << seeded.size() << " ";
    v.require(identical == static_cast<int>(seeded.size()), "repeatable output");

    struct Case {
      std::vector<std::string> args;
      int code;
    };
    const std::vector<Case> cases{
        {{"fit", "--family", "exponential", "--data", good}, 0},
        {{"map-demo", "--k", "6", "--n", "10"}, 0},
        {{"--help"}, 0},
        {{}, 1},
        {{"fit", "--family", "nosuch", "--data", good}, 1},
        {{"fit", "--family", "exponential", "--data", "/nonexistent.csv"}, 1},
        {{"fit", "--family", "exponential", "--data", temp_file("b1.csv", "time,status\n1,2\n")}, 1},
        {{"fit", "--family", "exponential", "--data", temp_file("b2.csv", "time,status\n")}, 1},
        {{"fit", "--family", "exponential", "--data", temp_file("b3.csv", "time,status\nx,1\n")}, 1},
        {{"kl", "--true", "exponential:1", "--model", "exponential:-2"}, 1},
        {{"kl", "--true", "normal:0,1", "--model", "exponential:2"}, 1},
        {{"map-demo", "--k", "11", "--n", "10"}, 1},
        {{"sieve", "--data", bath, "--nu", "1e-30", "--knots", "8"}, 2},
    };
    int right = 0;
    for (const auto& k : cases) {
      std::string out;
      const int code = run_cli(k.args, out);
      if (code == k.code) ++right;
      else v.detail << "[exit " << code << " expected " << k.code << "] ";
    }
    v.detail << "exit codes " << right << "/" << cases.size() << " ";
    v.require(right == static_cast<int>(cases.size()), "exit codes");
  }});

  return c;
}

}  // namespace

int main() {
  int failed = 0;
  for (const Criterion& c : criteria()) {
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "[exception: " << e.what() << "] ";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.time_limit) {
      v.pass = false;
      v.detail << "[over time limit " << c.time_limit << " s] ";
    }
    if (!v.pass) ++failed;
    std::printf("%s [%d] %s: %s(%.2f s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                v.detail.str().c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of 12 criteria passed\n", 12 - failed);
  return failed == 0 ? 0 : 1;
}

#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "klrisk/divergence.hpp"
#include "klrisk/hlik.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/rng.hpp"

using namespace klrisk;

TEST_CASE("pooled moments equal a single pass") {
  Rng rng(1);
  std::vector<double> xs(1000);
  for (double& x : xs) x = rng.uniform() * 10.0 - 3.0;
  Moments all, left, right;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    all.push(xs[i]);
    (i < 377 ? left : right).push(xs[i]);
  }
  left.merge(right);
  CHECK(left.count == all.count);
  CHECK(left.mean == doctest::Approx(all.mean).epsilon(1e-14));
  CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-12));

  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  CHECK(all.variance() == doctest::Approx(ss / 999.0).epsilon(1e-12));
  CHECK(all.std_error() == doctest::Approx(std::sqrt(ss / 999.0 / 1000.0)).epsilon(1e-12));

  Moments empty;
  empty.merge(all);
  CHECK(empty.mean == all.mean);
}

TEST_CASE("Monte Carlo kernel: serial and parallel are bit-identical") {
  const Law m = Law::parse("weibull:1.5,1.2"), t = Law::parse("exponential:1.0");
  for (auto censor : {std::optional<double>{}, std::optional<double>{0.8}}) {
    const Moments s = log_ratio_moments(m, t, censor, 100003, 77, Execution::serial);
    const Moments p = log_ratio_moments(m, t, censor, 100003, 77, Execution::parallel);
    CHECK(s.count == 100003);
    CHECK(s.mean == p.mean);
    CHECK(s.m2 == p.m2);
  }
  CHECK(log_ratio_moments(m, t, {}, 5000, 1, Execution::parallel).mean !=
        log_ratio_moments(m, t, {}, 5000, 2, Execution::parallel).mean);
}

TEST_CASE("marginal likelihood kernel: serial and parallel are bit-identical") {
  const auto model = RandomEffectsModel::poisson_lognormal();
  const GroupedDataset g = simulate_grouped(model, 0.2, 0.8, 300, 4, 10);
  const Vector mu = Vector::Constant(1, 0.3);
  CHECK(marginal_loglik(model, mu, 0.8, g, 40, Execution::serial) ==
        marginal_loglik(model, mu, 0.8, g, 40, Execution::parallel));
}

TEST_CASE("map_indexed keeps index order and rethrows the first failure") {
  const auto out = map_indexed<double>(
      1000, [](std::size_t i) { return std::sqrt(static_cast<double>(i)); }, Execution::parallel);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == std::sqrt(static_cast<double>(i)));

  try {
    map_indexed<int>(
        100,
        [](std::size_t i) -> int {
          if (i == 40 || i == 90) throw std::runtime_error("task " + std::to_string(i));
          return 0;
        },
        Execution::parallel);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "task 40");
  }
}

TEST_CASE("ordered sum") {
  CHECK(ordered_sum({1e16, 1.0, -1e16}) == 0.0);
  CHECK(ordered_sum({}) == 0.0);
}

TEST_CASE("derived seeds give distinct streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  Rng a(derive_seed(5, 3)), b(derive_seed(5, 3));
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
  Rng c(0);
  for (int i = 0; i < 10000; ++i) {
    const double u = c.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

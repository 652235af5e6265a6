// Serial vs parallel timings of the data-parallel kernels.

#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "klrisk/divergence.hpp"
#include "klrisk/hlik.hpp"
#include "klrisk/kernels.hpp"
#include "klrisk/likelihood.hpp"
#include "klrisk/penalized.hpp"
#include "klrisk/selection.hpp"
#include "simdata.hpp"

using namespace klrisk;

namespace {

double seconds(const std::function<double(Execution)>& f, Execution exec, double& result) {
  const auto start = std::chrono::steady_clock::now();
  result = f(exec);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, const std::function<double(Execution)>& f) {
  double rs = 0.0, rp = 0.0;
  const double ts = seconds(f, Execution::serial, rs);
  const double tp = seconds(f, Execution::parallel, rp);
  std::printf("%-22s serial %8.3f s  parallel %8.3f s  speedup %5.2f  %s\n", name, ts, tp, ts / tp,
              rs == rp ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  const Law model = Law::parse("weibull:1.5,1.2"), truth = Law::parse("exponential:1.0");
  report("log_ratio_moments", [&](Execution e) {
    return log_ratio_moments(model, truth, 1.5, 4000000, 1, e).mean;
  });

  const auto pl = RandomEffectsModel::poisson_lognormal();
  const GroupedDataset g = simulate_grouped(pl, 0.5, 1.0, 20000, 4, 2);
  report("marginal_loglik", [&](Execution e) {
    return marginal_loglik(pl, Vector::Constant(1, 0.4), 1.0, g, 40, e);
  });

  report("simulate_ekl", [&](Execution e) {
    return simulate_ekl(Law::parse("weibull:2,1"), Family::weibull(), 500, 400, std::nullopt, 3, e)
        .mean_ekl;
  });

  const Dataset d = simdata::bathtub_data(400, 4);
  report("lcv_select", [&](Execution e) {
    return lcv_select(d, default_basis(d), {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}, 5, 5, e)
        .kappa_star;
  });
}

#include "klrisk/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "klrisk/rng.hpp"

namespace klrisk {

void Moments::merge(const Moments& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count), nb = static_cast<double>(other.count);
  const double total = na + nb;
  const double delta = other.mean - mean;
  mean += delta * nb / total;
  m2 += other.m2 + delta * delta * na * nb / total;
  count += other.count;
}

double Moments::std_error() const {
  return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

Moments log_ratio_moments(const Law& model, const Law& truth, std::optional<double> censor,
                          std::size_t n, std::uint64_t seed, Execution exec) {
  const std::size_t streams = std::min(kMonteCarloStreams, n);
  const std::size_t base = n / streams, extra = n % streams;
  double atom = 0.0;
  if (censor)
    atom = truth.family.log_survival(truth.theta, *censor) -
           model.family.log_survival(model.theta, *censor);

  auto run_stream = [&](std::size_t s) {
    const std::size_t count = base + (s < extra ? 1 : 0);
    const auto draws = truth.family.sample(truth.theta, count, derive_seed(seed, s));
    Moments m;
    for (double x : draws) {
      if (censor && x > *censor) {
        m.push(atom);
      } else {
        m.push(truth.family.log_density(truth.theta, x) -
               model.family.log_density(model.theta, x));
      }
    }
    return m;
  };

  const auto parts = map_indexed<Moments>(streams, run_stream, exec);
  Moments total;
  for (const auto& part : parts) total.merge(part);
  return total;
}

double ordered_sum(const std::vector<double>& terms) {
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

}  // namespace klrisk

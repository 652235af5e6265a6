#pragma once

// Data-parallel kernels. Every kernel has a serial reference path selected
// by Execution::serial; both paths split the work into the same fixed
// chunks and combine chunk results in index order, so their outputs are
// bit-identical whatever the thread count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <vector>

#include "klrisk/families.hpp"

namespace klrisk {

enum class Execution { serial, parallel };

/// Count, mean and sum of squared deviations of a stream of values.
struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void push(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }
  /// Pooled update (Chan et al.).
  void merge(const Moments& other);
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double std_error() const;
};

/// Number of independent random streams a Monte Carlo kernel is split into.
inline constexpr std::size_t kMonteCarloStreams = 64;

/// Moments of the log-likelihood ratio log(dP_truth/dP_model) over `n`
/// draws from the truth, optionally right-censored at `censor`.
/// Stream s uses seed derive_seed(seed, s).
Moments log_ratio_moments(const Law& model, const Law& truth, std::optional<double> censor,
                          std::size_t n, std::uint64_t seed, Execution exec);

/// out[i] = f(i) for i in [0, count). Exceptions are collected per index and
/// the one with the lowest index is rethrown.
template <class T, class F>
std::vector<T> map_indexed(std::size_t count, F&& f, Execution exec) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<long long>(count);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  } else {
    for (long long i = 0; i < n; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Sum in index order.
double ordered_sum(const std::vector<double>& terms);

/// Neumaier-compensated running sum. Log-likelihood totals use it so that
/// finite-difference gradients are not swamped by summation rounding.
struct CompensatedSum {
  double total = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double next = total + x;
    carry += std::abs(total) >= std::abs(x) ? (total - next) + x : (x - next) + total;
    total = next;
  }
  double value() const { return total + carry; }
};

}  // namespace klrisk

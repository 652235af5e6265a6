#include "klrisk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <queue>
#include <string>

#include "klrisk/error.hpp"

namespace klrisk {

namespace {

// Kronrod abscissae (positive half, descending) and weights; the 7-point
// Gauss rule uses the odd-indexed abscissae.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

/// Integration variable map; identity for finite ranges.
struct Mapping {
  enum class Kind { finite, upper_infinite, lower_infinite, both_infinite } kind;
  double lo, hi, scale;

  static Mapping make(double lo, double hi, double scale) {
    const bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);
    if (lo_inf && hi_inf) return {Kind::both_infinite, -1.0, 1.0, scale};
    if (hi_inf) return {Kind::upper_infinite, lo, hi, scale};
    if (lo_inf) return {Kind::lower_infinite, lo, hi, scale};
    return {Kind::finite, lo, hi, scale};
  }
  double t_lo() const { return kind == Kind::finite ? lo : (kind == Kind::both_infinite ? -1.0 : 0.0); }
  double t_hi() const { return kind == Kind::finite ? hi : 1.0; }

  /// f(x(t)) * x'(t); the integrand is taken as 0 where the map degenerates.
  double eval(const Integrand& f, double t) const {
    switch (kind) {
      case Kind::finite: return f(t);
      case Kind::upper_infinite: {
        const double s = 1.0 - t;
        if (s <= 0.0) return 0.0;
        return f(lo + scale * t / s) * scale / (s * s);
      }
      case Kind::lower_infinite: {
        const double s = 1.0 - t;
        if (s <= 0.0) return 0.0;
        return f(hi - scale * t / s) * scale / (s * s);
      }
      case Kind::both_infinite: {
        const double s = 1.0 - t * t;
        if (s <= 0.0) return 0.0;
        return f(scale * t / s) * scale * (1.0 + t * t) / (s * s);
      }
    }
    return 0.0;
  }
};

QuadInterval kronrod(const Integrand& f, const Mapping& map, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = map.eval(f, center);
  double kron = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double sum = map.eval(f, center - dx) + map.eval(f, center + dx);
    kron += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  kron *= half;
  gauss *= half;
  return {a, b, kron, std::abs(kron - gauss)};
}

template <class Builder>
const GaussRule& cached_rule(std::map<int, std::unique_ptr<GaussRule>>& cache, std::mutex& mu,
                             int points, Builder build) {
  std::lock_guard lock(mu);
  auto& slot = cache[points];
  if (!slot) slot = std::make_unique<GaussRule>(build(points));
  return *slot;
}

GaussRule build_legendre(int n) {
  GaussRule rule{std::vector<double>(n), std::vector<double>(n)};
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return rule;
}

GaussRule build_hermite(int n) {
  // Orthonormal Hermite three-term recurrence with Newton root polishing.
  constexpr double pim4 = 0.7511255444649425;  // pi^(-1/4)
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  double z = 0.0;
  auto newton = [n](double& root) {
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = root * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = root;
      root = z1 - p1 / pp;
      if (std::abs(root - z1) <= 3e-15 * std::max(1.0, std::abs(root))) break;
    }
    return pp;
  };
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    newton(z);
    // one more pass so the weight uses the polished root
    const double pp = newton(z);
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) x[m - 1] = 0.0;
  std::reverse(x.begin(), x.end());
  std::reverse(w.begin(), w.end());
  return {std::move(x), std::move(w)};
}

}  // namespace

QuadResult integrate(const Integrand& f, double lo, double hi, const QuadOptions& opts,
                     double scale) {
  if (std::isnan(lo) || std::isnan(hi) || !(lo <= hi))
    throw DomainError("integration range must satisfy lo <= hi");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("integration scale must be > 0");
  QuadResult result;
  if (lo == hi) return result;

  const Mapping map = Mapping::make(lo, hi, scale);
  auto worse = [](const QuadInterval& a, const QuadInterval& b) { return a.error < b.error; };
  std::priority_queue<QuadInterval, std::vector<QuadInterval>, decltype(worse)> queue(worse);

  QuadInterval first = kronrod(f, map, map.t_lo(), map.t_hi());
  double total = first.value, err = first.error;
  queue.push(first);
  while (!(err <= opts.abs_tol)) {
    if (!std::isfinite(total) || !std::isfinite(err))
      throw NumericalError("quadrature produced a non-finite value");
    if (static_cast<int>(queue.size()) >= opts.max_intervals)
      throw NumericalError("quadrature did not converge within " +
                           std::to_string(opts.max_intervals) + " intervals (error estimate " +
                           std::to_string(err) + ")");
    const QuadInterval worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const QuadInterval left = kronrod(f, map, worst.lo, mid);
    const QuadInterval right = kronrod(f, map, mid, worst.hi);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
  }

  result.mesh.reserve(queue.size());
  while (!queue.empty()) {
    result.mesh.push_back(queue.top());
    queue.pop();
  }
  std::sort(result.mesh.begin(), result.mesh.end(),
            [](const QuadInterval& a, const QuadInterval& b) { return a.lo < b.lo; });
  // re-sum in mesh order so the value does not depend on heap history
  result.value = 0.0;
  result.error = 0.0;
  for (const auto& piece : result.mesh) {
    result.value += piece.value;
    result.error += piece.error;
  }
  return result;
}

double integrate_on_mesh(const Integrand& f, std::span<const QuadInterval> mesh, double lo,
                         double hi, double scale) {
  const Mapping map = Mapping::make(lo, hi, scale);
  double total = 0.0;
  for (const auto& piece : mesh) total += kronrod(f, map, piece.lo, piece.hi).value;
  return total;
}

const GaussRule& gauss_legendre(int points) {
  if (points < 1) throw DomainError("Gauss-Legendre rule needs >= 1 point");
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  static std::mutex mu;
  return cached_rule(cache, mu, points, build_legendre);
}

const GaussRule& gauss_hermite(int points) {
  if (points < 1) throw DomainError("Gauss-Hermite rule needs >= 1 point");
  static std::map<int, std::unique_ptr<GaussRule>> cache;
  static std::mutex mu;
  return cached_rule(cache, mu, points, build_hermite);
}

}  // namespace klrisk

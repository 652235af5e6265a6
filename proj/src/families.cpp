#include "klrisk/families.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "klrisk/data.hpp"
#include "klrisk/error.hpp"
#include "klrisk/rng.hpp"

namespace klrisk {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

double parse_number(std::string_view s, const char* what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw FormatError(std::string(what) + ": `" + std::string(s) + "` is not a number");
  return v;
}

double binomial_log_pmf(int trials, double p, int k) {
  return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) +
         k * std::log(p) + (trials - k) * std::log1p(-p);
}

bool is_integer(double x) { return std::floor(x) == x; }

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("normal quantile needs u in (0,1)");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (u < lo) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - lo) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement; the residual is formed on the smaller tail.
  const double resid = (x < 0.0) ? normal_cdf(x) - u : (1.0 - u) - normal_cdf(-x);
  const double t = resid * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - t / (1.0 + 0.5 * x * t);
}

Family Family::exponential() { return {FamilyId::exponential, 0}; }
Family Family::weibull() { return {FamilyId::weibull, 0}; }
Family Family::normal() { return {FamilyId::normal, 0}; }
Family Family::binomial(int trials) {
  if (trials < 1) throw DomainError("binomial trial count must be >= 1");
  return {FamilyId::binomial, trials};
}

Family Family::parse(std::string_view token) {
  if (token == "exponential") return exponential();
  if (token == "weibull") return weibull();
  if (token == "normal") return normal();
  if (token.starts_with("binomial(") && token.ends_with(")")) {
    auto inner = token.substr(9, token.size() - 10);
    int n = 0;
    auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), n);
    if (inner.empty() || ec != std::errc() || ptr != inner.data() + inner.size())
      throw FormatError("binomial trial count `" + std::string(inner) + "` is not an integer");
    return binomial(n);
  }
  throw FormatError("unknown family `" + std::string(token) +
                    "` (expected exponential, weibull, normal, binomial(N))");
}

int Family::param_dim() const {
  switch (id_) {
    case FamilyId::exponential: return 1;
    case FamilyId::weibull: return 2;
    case FamilyId::normal: return 2;
    case FamilyId::binomial: return 1;
  }
  return 0;
}

std::string Family::name() const {
  switch (id_) {
    case FamilyId::exponential: return "exponential";
    case FamilyId::weibull: return "weibull";
    case FamilyId::normal: return "normal";
    case FamilyId::binomial: return "binomial(" + std::to_string(trials_) + ")";
  }
  return {};
}

std::vector<std::string> Family::param_names() const {
  switch (id_) {
    case FamilyId::exponential: return {"rate"};
    case FamilyId::weibull: return {"shape", "scale"};
    case FamilyId::normal: return {"mean", "variance"};
    case FamilyId::binomial: return {"probability"};
  }
  return {};
}

bool Family::accepts(const Params& theta) const {
  if (theta.size() != param_dim() || !theta.allFinite()) return false;
  switch (id_) {
    case FamilyId::exponential: return theta[0] > 0.0;
    case FamilyId::weibull: return theta[0] > 0.0 && theta[1] > 0.0;
    case FamilyId::normal: return theta[1] > 0.0;
    case FamilyId::binomial: return theta[0] > 0.0 && theta[0] < 1.0;
  }
  return false;
}

void Family::validate(const Params& theta) const {
  if (!accepts(theta)) {
    std::string msg = "invalid parameters for " + name() + ": (";
    for (Eigen::Index k = 0; k < theta.size(); ++k)
      msg += (k ? ", " : "") + std::to_string(theta[k]);
    throw DomainError(msg + ")");
  }
}

bool Family::in_support(double x) const {
  if (!std::isfinite(x)) return false;
  switch (id_) {
    case FamilyId::exponential:
    case FamilyId::weibull: return x >= 0.0;
    case FamilyId::normal: return true;
    case FamilyId::binomial: return is_integer(x) && x >= 0.0 && x <= trials_;
  }
  return false;
}

DensityValue Family::eval(const Params& theta, double x) const {
  validate(theta);
  if (!in_support(x))
    throw DomainError("x = " + std::to_string(x) + " outside the support of " + name());
  switch (id_) {
    case FamilyId::exponential: {
      const double rate = theta[0];
      return {std::log(rate) - rate * x, std::exp(-rate * x)};
    }
    case FamilyId::weibull: {
      const double k = theta[0], s = theta[1];
      const double z = x / s;
      const double zk = std::pow(z, k);
      double logf;
      if (x == 0.0) {
        logf = (k == 1.0) ? std::log(k / s)
                          : (k > 1.0 ? -std::numeric_limits<double>::infinity()
                                     : std::numeric_limits<double>::infinity());
      } else {
        logf = std::log(k / s) + (k - 1.0) * std::log(z) - zk;
      }
      return {logf, std::exp(-zk)};
    }
    case FamilyId::normal: {
      const double mu = theta[0], var = theta[1];
      const double r = x - mu;
      return {-0.5 * (kLogTwoPi + std::log(var)) - 0.5 * r * r / var,
              0.5 * std::erfc(r / std::sqrt(2.0 * var))};
    }
    case FamilyId::binomial: {
      const double p = theta[0];
      const int k = static_cast<int>(x);
      double tail = 0.0;
      for (int j = trials_; j > k; --j) tail += std::exp(binomial_log_pmf(trials_, p, j));
      return {binomial_log_pmf(trials_, p, k), std::min(1.0, tail)};
    }
  }
  return {};
}

double Family::log_density(const Params& theta, double x) const {
  return eval(theta, x).log_density;
}

double Family::survival(const Params& theta, double x) const {
  if (is_time_to_event() && x < 0.0) {
    validate(theta);
    return 1.0;
  }
  if (id_ == FamilyId::binomial && std::isfinite(x) && !in_support(x)) {
    validate(theta);
    if (x < 0.0) return 1.0;
    if (x > trials_) return 0.0;
    return eval(theta, std::floor(x)).survival;
  }
  return eval(theta, x).survival;
}

double Family::log_survival(const Params& theta, double x) const {
  if (is_time_to_event()) {
    validate(theta);
    if (x <= 0.0) return 0.0;
    if (id_ == FamilyId::exponential) return -theta[0] * x;
    return -std::pow(x / theta[1], theta[0]);
  }
  return std::log(survival(theta, x));
}

double Family::cdf(const Params& theta, double x) const {
  if (id_ == FamilyId::normal) {
    validate(theta);
    return normal_cdf((x - theta[0]) / std::sqrt(theta[1]));
  }
  if (id_ == FamilyId::exponential) {
    validate(theta);
    return x <= 0.0 ? 0.0 : -std::expm1(-theta[0] * x);
  }
  if (id_ == FamilyId::weibull) {
    validate(theta);
    return x <= 0.0 ? 0.0 : -std::expm1(-std::pow(x / theta[1], theta[0]));
  }
  return 1.0 - survival(theta, x);
}

double Family::quantile(const Params& theta, double u) const {
  validate(theta);
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile level must lie in (0,1)");
  switch (id_) {
    case FamilyId::exponential: return -std::log1p(-u) / theta[0];
    case FamilyId::weibull: return theta[1] * std::pow(-std::log1p(-u), 1.0 / theta[0]);
    case FamilyId::normal: return theta[0] + std::sqrt(theta[1]) * normal_quantile(u);
    case FamilyId::binomial: {
      double acc = 0.0;
      for (int k = 0; k < trials_; ++k) {
        acc += std::exp(binomial_log_pmf(trials_, theta[0], k));
        if (acc >= u) return k;
      }
      return trials_;
    }
  }
  return 0.0;
}

double Family::mean(const Params& theta) const {
  validate(theta);
  switch (id_) {
    case FamilyId::exponential: return 1.0 / theta[0];
    case FamilyId::weibull: return theta[1] * std::tgamma(1.0 + 1.0 / theta[0]);
    case FamilyId::normal: return theta[0];
    case FamilyId::binomial: return trials_ * theta[0];
  }
  return 0.0;
}

double Family::variance(const Params& theta) const {
  validate(theta);
  switch (id_) {
    case FamilyId::exponential: return 1.0 / (theta[0] * theta[0]);
    case FamilyId::weibull: {
      const double g1 = std::tgamma(1.0 + 1.0 / theta[0]);
      const double g2 = std::tgamma(1.0 + 2.0 / theta[0]);
      return theta[1] * theta[1] * (g2 - g1 * g1);
    }
    case FamilyId::normal: return theta[1];
    case FamilyId::binomial: return trials_ * theta[0] * (1.0 - theta[0]);
  }
  return 0.0;
}

std::vector<double> Family::sample(const Params& theta, std::size_t n,
                                   std::uint64_t seed) const {
  validate(theta);
  if (n == 0) throw DomainError("sample size must be >= 1");
  Rng rng(seed);
  std::vector<double> draws(n);
  for (auto& x : draws) x = quantile(theta, rng.uniform());
  return draws;
}

Params Family::moment_estimate(std::span<const double> draws) const {
  if (draws.size() < 2) throw DomainError("moment estimate needs at least two draws");
  const double n = static_cast<double>(draws.size());
  const double m = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double v = 0.0;
  for (double x : draws) v += (x - m) * (x - m);
  v /= n;
  Params theta(param_dim());
  switch (id_) {
    case FamilyId::exponential:
      if (!(m > 0.0)) throw DomainError("exponential moments need a positive mean");
      theta << 1.0 / m;
      break;
    case FamilyId::weibull: {
      if (!(m > 0.0) || !(v > 0.0))
        throw DomainError("weibull moments need positive mean and variance");
      // squared coefficient of variation is decreasing in the shape
      const double cv2 = v / (m * m);
      auto cv2_of = [](double k) {
        const double g1 = std::tgamma(1.0 + 1.0 / k);
        return std::tgamma(1.0 + 2.0 / k) / (g1 * g1) - 1.0;
      };
      double lo = 0.1, hi = 50.0;
      if (cv2 >= cv2_of(lo)) {
        hi = lo;
      } else if (cv2 <= cv2_of(hi)) {
        lo = hi;
      } else {
        for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
          const double mid = 0.5 * (lo + hi);
          (cv2_of(mid) > cv2 ? lo : hi) = mid;
        }
      }
      const double k = 0.5 * (lo + hi);
      theta << k, m / std::tgamma(1.0 + 1.0 / k);
      break;
    }
    case FamilyId::normal:
      if (!(v > 0.0)) throw DomainError("normal moments need positive variance");
      theta << m, v;
      break;
    case FamilyId::binomial:
      theta << std::clamp(m / trials_, 1e-6, 1.0 - 1e-6);
      break;
  }
  return theta;
}

Vector Family::to_unconstrained(const Params& theta) const {
  validate(theta);
  Vector eta(param_dim());
  switch (id_) {
    case FamilyId::exponential: eta << std::log(theta[0]); break;
    case FamilyId::weibull: eta << std::log(theta[0]), std::log(theta[1]); break;
    case FamilyId::normal: eta << theta[0], std::log(theta[1]); break;
    case FamilyId::binomial: eta << std::log(theta[0] / (1.0 - theta[0])); break;
  }
  return eta;
}

Params Family::from_unconstrained(const Vector& eta) const {
  Params theta(param_dim());
  switch (id_) {
    case FamilyId::exponential: theta << std::exp(eta[0]); break;
    case FamilyId::weibull: theta << std::exp(eta[0]), std::exp(eta[1]); break;
    case FamilyId::normal: theta << eta[0], std::exp(eta[1]); break;
    case FamilyId::binomial: theta << 1.0 / (1.0 + std::exp(-eta[0])); break;
  }
  return theta;
}

Vector Family::unconstrained_jacobian(const Vector& eta) const {
  const Params theta = from_unconstrained(eta);
  Vector jac(param_dim());
  switch (id_) {
    case FamilyId::exponential: jac << theta[0]; break;
    case FamilyId::weibull: jac << theta[0], theta[1]; break;
    case FamilyId::normal: jac << 1.0, theta[1]; break;
    case FamilyId::binomial: jac << theta[0] * (1.0 - theta[0]); break;
  }
  return jac;
}

Law Law::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw FormatError("law spec `" + std::string(spec) + "` must look like name:p1[,p2]");
  Family family = Family::parse(spec.substr(0, colon));
  std::vector<double> values;
  auto rest = spec.substr(colon + 1);
  while (true) {
    const auto comma = rest.find(',');
    values.push_back(parse_number(rest.substr(0, comma), "law parameter"));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (static_cast<int>(values.size()) != family.param_dim())
    throw FormatError(family.name() + " takes " + std::to_string(family.param_dim()) +
                      " parameter(s), got " + std::to_string(values.size()));
  Params theta = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  family.validate(theta);
  return {family, theta};
}

std::string Law::spec() const {
  std::string out = family.name() + ":";
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, theta[k]);
    out += (k ? "," : "") + std::string(buf, ptr);
  }
  return out;
}

Params analytic_mle(const Family& family, const Dataset& data) {
  switch (family.id()) {
    case FamilyId::exponential: {
      for (const auto& o : data)
        if (o.time < 0.0) throw DomainError("negative time in exponential data");
      const auto events = data.events();
      if (events == 0) throw DegenerateError("no events: exponential MLE is zero");
      Params theta(1);
      theta << static_cast<double>(events) / data.total_time();
      return theta;
    }
    case FamilyId::normal: {
      if (data.has_censoring())
        throw UnsupportedError("normal closed-form MLE needs exact observations only");
      const double n = static_cast<double>(data.size());
      const double m = data.total_time() / n;
      double v = 0.0;
      for (const auto& o : data) v += (o.time - m) * (o.time - m);
      v /= n;
      if (!(v > 0.0)) throw DegenerateError("normal MLE variance is zero");
      Params theta(2);
      theta << m, v;
      return theta;
    }
    case FamilyId::binomial: {
      if (data.has_censoring())
        throw UnsupportedError("binomial closed-form MLE needs exact observations only");
      double successes = 0.0;
      for (const auto& o : data) {
        if (!family.in_support(o.time))
          throw DomainError("binomial count outside 0.." + std::to_string(family.trials()));
        successes += o.time;
      }
      Params theta(1);
      theta << successes / (static_cast<double>(family.trials()) * static_cast<double>(data.size()));
      return theta;
    }
    case FamilyId::weibull:
      throw UnsupportedError("weibull has no closed-form MLE");
  }
  throw UnsupportedError("unsupported family");
}

}  // namespace klrisk

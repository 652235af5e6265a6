#include "klrisk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "klrisk/error.hpp"

namespace klrisk {

namespace {

double step_for(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

double checked(const Objective& f, const Vector& x) {
  const double v = f(x);
  if (!std::isfinite(v)) throw NumericalError("objective not finite at a difference point");
  return v;
}

std::string describe(const Vector& x, double f, double gnorm, int iter) {
  std::ostringstream os;
  os.precision(6);
  os << "iteration " << iter << ", objective " << f << ", |grad|_inf " << gnorm << ", theta (";
  for (Eigen::Index k = 0; k < x.size(); ++k) os << (k ? ", " : "") << x[k];
  os << ")";
  return os.str();
}

}  // namespace

Vector numeric_gradient(const Objective& f, const Vector& x) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step_for(x[k], 1e-5);
    xp[k] = x[k] + h;
    const double fp = checked(f, xp);
    xp[k] = x[k] - h;
    const double fm = checked(f, xp);
    xp[k] = x[k];
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Vector numeric_gradient_4th(const Objective& f, const Vector& x) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = step_for(x[k], 1e-3);
    double v[4];
    const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
    for (int i = 0; i < 4; ++i) {
      xp[k] = x[k] + offsets[i] * h;
      v[i] = checked(f, xp);
    }
    xp[k] = x[k];
    g[k] = (-v[0] + 8.0 * v[1] - 8.0 * v[2] + v[3]) / (12.0 * h);
  }
  return g;
}

Matrix numeric_hessian(const Objective& f, const Vector& x, double rel_step) {
  const Eigen::Index n = x.size();
  Matrix hess(n, n);
  const double f0 = checked(f, x);
  Vector xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = step_for(x[i], rel_step);
    xp[i] = x[i] + hi;
    const double fp = checked(f, xp);
    xp[i] = x[i] - hi;
    const double fm = checked(f, xp);
    xp[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = step_for(x[j], rel_step);
      double corner[4];
      const double si[4] = {1, 1, -1, -1}, sj[4] = {1, -1, 1, -1};
      for (int c = 0; c < 4; ++c) {
        xp[i] = x[i] + si[c] * hi;
        xp[j] = x[j] + sj[c] * hj;
        corner[c] = checked(f, xp);
      }
      xp[i] = x[i];
      xp[j] = x[j];
      hess(i, j) = hess(j, i) = (corner[0] - corner[1] - corner[2] + corner[3]) / (4.0 * hi * hj);
    }
  }
  return hess;
}

FitResult maximize(const Objective& objective, const Vector& theta0,
                   const MaximizeOptions& opts) {
  const Eigen::Index n = theta0.size();
  if (n == 0) throw DomainError("maximize needs at least one parameter");
  FitResult result;
  result.p = static_cast<int>(n);

  Vector x = theta0;
  double f = objective(x);
  if (!std::isfinite(f)) throw StartError("objective is not finite at the starting point");
  Vector g = numeric_gradient(objective, x);

  const Matrix identity = Matrix::Identity(n, n);
  Matrix inv_hess = identity;  // inverse Hessian of the minimization problem -f
  bool scaled = false;
  if (opts.hessian_init) {
    const Matrix curvature = -numeric_hessian(objective, x);
    Eigen::LLT<Matrix> llt(curvature);
    if (llt.info() == Eigen::Success) {
      inv_hess = llt.solve(identity);
      scaled = true;
    }
  }

  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm < opts.tol) {
      result.converged = true;
      break;
    }
    Vector dir = inv_hess * g;
    if (!(g.dot(dir) > 0.0)) {
      inv_hess = identity;
      scaled = false;
      dir = g;
    }

    double t = 1.0;
    double f_new = f;
    Vector x_new = x;
    bool accepted = false;
    const double slope = g.dot(dir);
    while (t >= 1e-14) {
      x_new = x + t * dir;
      f_new = objective(x_new);
      if (std::isfinite(f_new) && f_new > f && f_new - f >= 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    Vector g_new;
    // Near stationarity, or along stiff directions, the gain the quadratic
    // model predicts is below the rounding of f and Armijo cannot see it.
    const double rounding =
        64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    const bool rounding_regime =
        gnorm < 1e3 * opts.tol || (scaled && 0.5 * slope < 16.0 * rounding);
    if (!accepted && rounding_regime) {
      // accept a step that keeps f within rounding and shrinks the gradient
      for (t = 1.0; t >= 1e-6; t *= 0.5) {
        x_new = x + t * dir;
        f_new = objective(x_new);
        if (!(f_new >= f - rounding)) continue;
        g_new = numeric_gradient(objective, x_new);
        if (g_new.lpNorm<Eigen::Infinity>() < gnorm) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      if (!inv_hess.isIdentity()) {
        inv_hess = identity;
        scaled = false;
        continue;
      }
      if (rounding_regime) {
        result.message = "line search stalled at rounding level; " + describe(x, f, gnorm, iter);
        break;
      }
      throw NumericalError("line search stagnated: " + describe(x, f, gnorm, iter));
    }

    if (g_new.size() == 0) g_new = numeric_gradient(objective, x_new);
    const Vector s = x_new - x;
    const Vector y = g - g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_hess = (sy / y.squaredNorm()) * identity;
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix left = identity - rho * s * y.transpose();
      inv_hess = left * inv_hess * left.transpose() + rho * s * s.transpose();
    }
    x = x_new;
    f = f_new;
    g = g_new;
  }

  result.theta_hat = x;
  result.loglik_at_max = f;
  result.grad_norm = g.lpNorm<Eigen::Infinity>();
  result.iterations = iter;
  if (!result.converged && result.message.empty())
    result.message = "iteration limit reached; " + describe(x, f, result.grad_norm, iter);
  return result;
}

ConstraintMatch match_constraint(const std::function<CurvePoint(double)>& fit_at, double nu,
                                 std::pair<double, double> kappa_bracket) {
  auto [lo, hi] = kappa_bracket;
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi))
    throw DomainError("kappa bracket must satisfy 0 < lo < hi < inf");
  if (!(nu >= 0.0)) throw DomainError("constraint level nu must be >= 0");

  const double tol = 1e-8 * std::max(1.0, nu);
  CurvePoint at_lo = fit_at(lo);
  if (std::abs(at_lo.j_value - nu) < tol) return {lo, std::move(at_lo), 0, false};
  if (nu >= at_lo.j_value) {
    CurvePoint free = fit_at(0.0);
    if (free.j_value > nu)
      throw BracketError("nu lies between J(kappa = 0) and J(kappa = lo); lower the bracket");
    return {0.0, std::move(free), 0, true};
  }
  CurvePoint at_hi = fit_at(hi);
  if (at_hi.j_value > at_lo.j_value + 1e-6)
    throw MonotonicityError("J increases from the low to the high end of the bracket");
  if (nu < at_hi.j_value)
    throw BracketError("nu is below J at the upper end of the bracket; widen it");

  if (std::abs(at_hi.j_value - nu) < tol) return {hi, std::move(at_hi), 0, false};

  double j_lo = at_lo.j_value, j_hi = at_hi.j_value;
  double kappa = hi;
  CurvePoint point = std::move(at_hi);
  int iter = 0;
  while (iter < 60) {
    ++iter;
    kappa = std::sqrt(lo * hi);
    point = fit_at(kappa);
    const double j = point.j_value;
    if (j > j_lo + 1e-6 || j < j_hi - 1e-6)
      throw MonotonicityError("J(kappa) is not monotone near kappa = " + std::to_string(kappa));
    if (std::abs(j - nu) < tol) break;
    if (j > nu) {
      lo = kappa;
      j_lo = j;
    } else {
      hi = kappa;
      j_hi = j;
    }
  }
  return {kappa, std::move(point), iter, false};
}

}  // namespace klrisk

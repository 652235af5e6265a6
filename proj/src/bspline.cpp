#include "klrisk/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "klrisk/error.hpp"
#include "klrisk/quadrature.hpp"

namespace klrisk {

namespace {
constexpr int kDegree = 3;
}

BSplineBasis::BSplineBasis(std::vector<double> breakpoints) : breakpoints_(std::move(breakpoints)) {
  if (breakpoints_.size() < 2) throw DomainError("a spline basis needs at least two breakpoints");
  for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
    if (!std::isfinite(breakpoints_[i])) throw DomainError("breakpoints must be finite");
    if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))
      throw DomainError("breakpoints must be strictly increasing (index " + std::to_string(i) + ")");
  }
  knots_.assign(kDegree, breakpoints_.front());
  knots_.insert(knots_.end(), breakpoints_.begin(), breakpoints_.end());
  knots_.insert(knots_.end(), kDegree, breakpoints_.back());
}

BSplineBasis BSplineBasis::equally_spaced(double t_max, int m) {
  if (m < 4) throw DomainError("a cubic spline basis needs m >= 4 functions");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw DomainError("spline range must be (0, t_max] with t_max > 0");
  const int intervals = m - kDegree;
  std::vector<double> bp(intervals + 1);
  for (int i = 0; i <= intervals; ++i) bp[i] = t_max * i / intervals;
  bp.back() = t_max;
  return BSplineBasis(std::move(bp));
}

int BSplineBasis::interval_of(double u) const {
  if (!(u >= lower() && u <= upper()))
    throw DomainError("u = " + std::to_string(u) + " outside the spline range [" +
                      std::to_string(lower()) + ", " + std::to_string(upper()) + "]");
  if (u == upper()) return intervals() - 1;
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), u);
  return static_cast<int>(it - breakpoints_.begin()) - 1;
}

BasisRow BSplineBasis::eval(double u, int derivative) const {
  if (derivative < 0 || derivative > 2) throw DomainError("basis derivative order must be 0, 1 or 2");
  const int j = interval_of(u);
  const int span = j + kDegree;
  const auto& t = knots_;

  // Cox-de Boor table with derivatives (Piegl & Tiller, algorithm A2.3).
  double ndu[4][4];
  double left[4], right[4];
  ndu[0][0] = 1.0;
  for (int r = 1; r <= kDegree; ++r) {
    left[r] = u - t[span + 1 - r];
    right[r] = t[span + r] - u;
    double saved = 0.0;
    for (int s = 0; s < r; ++s) {
      ndu[r][s] = right[s + 1] + left[r - s];
      const double temp = ndu[s][r - 1] / ndu[r][s];
      ndu[s][r] = saved + right[s + 1] * temp;
      saved = left[r - s] * temp;
    }
    ndu[r][r] = saved;
  }

  BasisRow row{j, {}};
  if (derivative == 0) {
    for (int s = 0; s <= kDegree; ++s) row.values[s] = ndu[s][kDegree];
    return row;
  }

  double a[2][4];
  for (int r = 0; r <= kDegree; ++r) {
    int s1 = 0, s2 = 1;
    a[0][0] = 1.0;
    double d = 0.0;
    for (int k = 1; k <= derivative; ++k) {
      d = 0.0;
      const int rk = r - k, pk = kDegree - k;
      if (r >= k) {
        a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
        d = a[s2][0] * ndu[rk][pk];
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : kDegree - r;
      for (int q = j1; q <= j2; ++q) {
        a[s2][q] = (a[s1][q] - a[s1][q - 1]) / ndu[pk + 1][rk + q];
        d += a[s2][q] * ndu[rk + q][pk];
      }
      if (r <= pk) {
        a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
        d += a[s2][k] * ndu[r][pk];
      }
      std::swap(s1, s2);
    }
    row.values[r] = d;
  }
  const double factor = derivative == 1 ? 3.0 : 6.0;
  for (auto& v : row.values) v *= factor;
  return row;
}

std::vector<double> BSplineBasis::greville() const {
  std::vector<double> xi(dim());
  for (int j = 0; j < dim(); ++j) xi[j] = (knots_[j + 1] + knots_[j + 2] + knots_[j + 3]) / 3.0;
  return xi;
}

Vector BSplineBasis::interpolate(const std::function<double(double)>& g) const {
  const auto xi = greville();
  const int m = dim();
  Matrix colloc = Matrix::Zero(m, m);
  Vector rhs(m);
  for (int i = 0; i < m; ++i) {
    const BasisRow row = eval(xi[i]);
    for (int s = 0; s < 4; ++s) colloc(i, row.first + s) = row.values[s];
    rhs[i] = g(xi[i]);
  }
  return colloc.partialPivLu().solve(rhs);
}

Matrix penalty_matrix(const BSplineBasis& basis) {
  const int m = basis.dim();
  Matrix omega = Matrix::Zero(m, m);
  const GaussRule& rule = gauss_legendre(3);
  const auto bp = basis.breakpoints();
  for (int j = 0; j < basis.intervals(); ++j) {
    const double half = 0.5 * (bp[j + 1] - bp[j]);
    const double mid = 0.5 * (bp[j + 1] + bp[j]);
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
      const BasisRow row = basis.eval(mid + half * rule.nodes[g], 2);
      const double w = half * rule.weights[g];
      for (int r = 0; r < 4; ++r)
        for (int s = 0; s < 4; ++s)
          omega(row.first + r, row.first + s) += w * row.values[r] * row.values[s];
    }
  }
  return omega;
}

}  // namespace klrisk

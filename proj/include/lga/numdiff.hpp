#pragma once

// Central finite differences, used by gradient checks.

#include <algorithm>
#include <cmath>
#include <functional>

#include "lga/ndcore.hpp"

namespace lga::numdiff {

/// Step for coordinate value x: h = scale * (1 + |x|).
inline double step_for(double x, double scale = 1e-5) { return scale * (1.0 + std::abs(x)); }

/// Gradient of a scalar function by central differences, one coordinate at a time.
inline Vector gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                       double scale = 1e-5) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step_for(x[i], scale);
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// (F(x + h d) - F(x - h d)) / 2h for a vector- or matrix-valued F.
template <class F>
auto directional(const F& f, const Vector& x, const Vector& d, double h = 1e-5) {
  using Out = std::decay_t<decltype(f(x))>;
  Out hi = f(Vector(x + h * d));
  Out lo = f(Vector(x - h * d));
  return Out((hi - lo) / (2.0 * h));
}

/// Jacobian-transpose contraction by central differences over the entries
/// of a matrix argument: out(i, c) = d f / d m(i, c).
inline Matrix matrix_gradient(const std::function<double(const Matrix&)>& f, const Matrix& m,
                              double scale = 1e-5) {
  Matrix g(m.rows(), m.cols());
  Matrix mp = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double h = step_for(m(i, c), scale);
      mp(i, c) = m(i, c) + h;
      const double fp = f(mp);
      mp(i, c) = m(i, c) - h;
      const double fm = f(mp);
      mp(i, c) = m(i, c);
      g(i, c) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

/// |a - b| / max(|a|, |b|), Frobenius norms; 0 when both vanish.
template <class A, class B>
double relative_error(const A& a, const B& b) {
  const double denom = std::max(a.norm(), b.norm());
  return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

}  // namespace lga::numdiff

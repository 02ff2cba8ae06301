#pragma once

// Dense linear algebra types, seeded random streams, and the spectral
// helpers shared by the rest of the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <utility>

#include "lga/error.hpp"

namespace lga {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Seeded random stream. Two streams built from the same seed produce the
/// same sequence; `substream` derives an independent stream keyed by a label
/// or index without advancing the parent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng substream(std::string_view label) const { return Rng(mix(seed_ ^ mix(fnv1a(label)))); }
  Rng substream(std::uint64_t index) const {
    return Rng(mix(seed_ ^ mix(index + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(engine_); }

  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Vector normal_vector(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Uniformly distributed direction on the unit sphere in `d` dimensions.
inline Vector sample_unit_sphere(Rng& rng, std::size_t d) {
  detail::require(d >= 1, "sample_unit_sphere: dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  for (;;) {
    Vector v = rng.normal_vector(n);
    const double norm = v.norm();
    if (norm > 1e-300) return v / norm;
  }
}

/// n x m matrix with orthonormal columns, obtained from the QR factorization
/// of a Gaussian matrix. Column signs are fixed so that R has a positive
/// diagonal, which makes the output a deterministic function of the draw.
inline Matrix orthonormal_columns(Rng& rng, std::size_t n, std::size_t m) {
  detail::require(m >= 1 && n >= m, "orthonormal_columns: need n >= m >= 1");
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd gauss = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

struct EigenPair {
  double value = 0.0;
  Vector vector;
};

using LinearOperator = std::function<Vector(const Vector&)>;

/// Dominant (largest |eigenvalue|) eigenpair of a symmetric operator.
///
/// Iterates v <- A v / |A v| from a random unit start until the angle between
/// successive iterates (up to sign) drops below `tol`, or `iters` is
/// exhausted. The eigenvalue is the signed Rayleigh quotient. The returned
/// vector has its first nonzero component positive.
inline EigenPair power_iteration(const LinearOperator& apply, std::size_t dim,
                                 std::size_t iters, double tol, Rng& rng) {
  detail::require(dim >= 1, "power_iteration: dimension must be >= 1");
  Vector v = sample_unit_sphere(rng, dim);
  Vector av = apply(v);
  for (std::size_t it = 0; it < iters; ++it) {
    if (!all_finite(av)) throw NumericalError("power_iteration: non-finite iterate", it);
    const double norm = av.norm();
    if (norm == 0.0) break;  // v lies in the null space; eigenvalue 0
    Vector next = av / norm;
    const double sign = next.dot(v) < 0 ? -1.0 : 1.0;
    const double step = (next - sign * v).norm();
    v = std::move(next);
    av = apply(v);
    if (step < tol) break;
  }
  if (!all_finite(av)) throw NumericalError("power_iteration: non-finite iterate", iters);

  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      if (v[i] < 0) {
        v = -v;
        av = -av;
      }
      break;
    }
  }
  return {v.dot(av), std::move(v)};
}

}  // namespace lga

#pragma once

// Linear least-squares harness for studying label gradient alignment in the
// setting where (1/n) X^T X is diagonal for both the labeled and the
// unlabeled inputs. Contains the closed-form least-squares and gradient
// descent iterates, the full-batch gradient-descent form of the alignment
// dynamics on materialized design matrices, its per-coordinate scalar
// reduction, and executable checks of the coordinate-separability and
// fixed-point properties.
//
// Notation used below: lambda_l / lambda_u are the diagonal entries of
// (1/n_l) X_l^T X_l and (1/n_u) X_u^T X_u, b = (1/n_l) X_l^T y_l, and the
// learning-progress coefficient of coordinate i is c_i = lambda_l_i theta_i / b_i,
// which equals 1 at the least-squares solution.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lga/error.hpp"
#include "lga/ndcore.hpp"

namespace lga::linreg {

/// (X^T X)^{-1} X^T y computed from the eigendecomposition of (1/n) X^T X:
/// theta* = (1/n) sum_i q_i q_i^T X^T y / lambda_i.
inline Vector theta_star_eigsum(const Matrix& x, const Vector& y) {
  const double n = static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((x.transpose() * x) / n);
  const Vector xty = x.transpose() * y;
  Vector out = Vector::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const Vector q = eig.eigenvectors().col(i);
    out += q * (q.dot(xty) / (n * eig.eigenvalues()[i]));
  }
  return out;
}

/// Least-squares minimizer via the normal equations, cross-checked against
/// the eigen-sum form.
inline Vector theta_star(const Matrix& x, const Vector& y) {
  detail::require(x.rows() == y.size(), "theta_star: shape mismatch");
  detail::require(x.rows() >= x.cols(), "theta_star: X^T X is singular (fewer rows than columns)");
  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300))) {
    throw InvalidArgument("theta_star: X^T X is singular");
  }
  const Vector sol = gram.llt().solve(x.transpose() * y);
  const Vector alt = theta_star_eigsum(x, y);
  const double scale = std::max(1.0, sol.cwiseAbs().maxCoeff());
  if ((sol - alt).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw NumericalError("theta_star: normal-equation and eigen-sum solutions disagree", 0);
  }
  return sol;
}

/// k-th gradient descent iterate from theta_0 = 0 on (1/2n)|y - X theta|^2,
/// in closed form over the eigenbasis of (1/n) X^T X.
inline Vector gd_closed_form(const Matrix& x, const Vector& y, double alpha, std::size_t k) {
  detail::require(x.rows() == y.size(), "gd_closed_form: shape mismatch");
  const double n = static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig((x.transpose() * x) / n);
  if (eig.info() != Eigen::Success) throw NumericalError("gd_closed_form: eigendecomposition failed", 0);
  const Vector xty = x.transpose() * y;
  const double kk = static_cast<double>(k);
  Vector out = Vector::Zero(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double lam = eig.eigenvalues()[i];
    const Vector q = eig.eigenvectors().col(i);
    // (1 - (1 - a lam)^k) / lam, with the lam -> 0 limit a k.
    const double gain = std::abs(lam) < 1e-14 ? alpha * kk : -std::expm1(kk * std::log1p(-alpha * lam)) / lam;
    out += q * (gain * q.dot(xty) / n);
  }
  return out;
}

/// k plain gradient descent steps from theta = 0.
inline Vector gd_iterate(const Matrix& x, const Vector& y, double alpha, std::size_t k) {
  const double n = static_cast<double>(x.rows());
  Vector theta = Vector::Zero(x.cols());
  for (std::size_t s = 0; s < k; ++s) theta -= alpha * (x.transpose() * (x * theta - y)) / n;
  return theta;
}

struct DiagonalProblem {
  Vector lambda_l;
  Vector lambda_u;
  Vector b;
  std::size_t n_l = 16;
  std::size_t n_u = 4;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(b.size()); }
};

inline void validate(const DiagonalProblem& p) {
  detail::require(p.b.size() >= 1, "DiagonalProblem: empty");
  detail::require(p.lambda_l.size() == p.b.size() && p.lambda_u.size() == p.b.size(),
                  "DiagonalProblem: eigenvalue and b dimensions differ");
  detail::require((p.lambda_l.array() > 0).all() && (p.lambda_u.array() >= 0).all(),
                  "DiagonalProblem: need lambda_l > 0 and lambda_u >= 0");
  detail::require(all_finite(p.b), "DiagonalProblem: b must be finite");
  detail::require(p.n_l >= p.dim() && p.n_u >= p.dim(), "DiagonalProblem: need n >= m for both sets");
}

struct DiagonalDesign {
  Matrix x_l;
  Vector y_l;
  Matrix x_u;
};

/// X = sqrt(n) U diag(sqrt(lambda)) with U orthonormal, so (1/n) X^T X =
/// diag(lambda); y_l = X_l diag(1/lambda_l) b so that (1/n_l) X_l^T y_l = b.
/// The orthonormal factors depend only on the stream, not on the
/// eigenvalues, so re-running with the same seed varies only column scales.
inline DiagonalDesign make_diagonal_design(const DiagonalProblem& prob, Rng& rng) {
  validate(prob);
  Rng lrng = rng.substream("design/labeled");
  Rng urng = rng.substream("design/unlabeled");
  const Matrix ul = orthonormal_columns(lrng, prob.n_l, prob.dim());
  const Matrix uu = orthonormal_columns(urng, prob.n_u, prob.dim());
  DiagonalDesign d;
  d.x_l = std::sqrt(static_cast<double>(prob.n_l)) * ul * prob.lambda_l.cwiseSqrt().asDiagonal();
  d.x_u = std::sqrt(static_cast<double>(prob.n_u)) * uu * prob.lambda_u.cwiseSqrt().asDiagonal();
  d.y_l = d.x_l * prob.lambda_l.cwiseInverse().cwiseProduct(prob.b);
  return d;
}

enum class NormMode {
  /// sum_i r_i^2 / StopGradient(r_i^2): coordinate i pushes y_u by 1/r_i.
  kStopGradient,
  /// sum_i r_i^2 / (eps_norm + sqrt(r_i^4)) with the instantaneous r^4.
  kFullNormalized,
};

inline std::string to_string(NormMode m) {
  return m == NormMode::kStopGradient ? "stopgrad" : "full";
}

/// Coordinates with |r| below this contribute no label update in
/// stop-gradient mode.
inline constexpr double kStopGradFloor = 1e-12;

/// d/dr of one normalized coordinate term (1/2) r^2 / denom, denom frozen.
inline double norm_coef(NormMode mode, double r, double eps_norm) {
  if (mode == NormMode::kStopGradient) return std::abs(r) < kStopGradFloor ? 0.0 : 1.0 / r;
  const double denom = eps_norm + std::sqrt(r * r * r * r);
  return denom == 0.0 ? 0.0 : r / denom;
}

struct SimplifiedParams {
  double lr_theta = 1e-3;
  double lr_w = 1e-3;
  double eps_norm = 1e-3;
  std::size_t k_max = 1000;
  NormMode mode = NormMode::kFullNormalized;
  /// c is recorded at k = 0, every `record_every` steps, and at k_max.
  std::size_t record_every = 1;
};

struct SimplifiedLgaState {
  Vector theta;
  Vector y_u;
  std::size_t k = 0;
};

struct Trajectory {
  std::vector<std::size_t> k;
  std::vector<Vector> theta;
  std::vector<Vector> c;
};

inline Vector progress_coefficients(const DiagonalProblem& p, const Vector& theta) {
  Vector c(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    c[i] = p.b[i] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : p.lambda_l[i] * theta[i] / p.b[i];
  }
  return c;
}

using SimplifiedObserver = std::function<void(const SimplifiedLgaState&)>;

namespace internal {

inline bool is_record_step(const SimplifiedParams& p, std::size_t k) {
  return k == 0 || k == p.k_max || (p.record_every > 0 && k % p.record_every == 0);
}

}  // namespace internal

/// One full-batch step of the dynamics below; b = (1/n_l) X_l^T y_l.
inline void simplified_lga_step(const DiagonalDesign& design, const Vector& b,
                                const SimplifiedParams& params, SimplifiedLgaState& s) {
  const double nl = static_cast<double>(design.x_l.rows());
  const double nu = static_cast<double>(design.x_u.rows());
  const Vector g_l = design.x_l.transpose() * (design.x_l * s.theta) / nl - b;
  const Vector g_u = design.x_u.transpose() * (design.x_u * s.theta - s.y_u) / nu;
  const Vector r = g_l - g_u;
  Vector coef(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) coef[i] = norm_coef(params.mode, r[i], params.eps_norm);
  s.theta -= params.lr_theta * g_u;
  // d r_i / d y_u = (1/n_u) X_u e_i
  s.y_u -= params.lr_w * (design.x_u * coef) / nu;
  ++s.k;
  if (!all_finite(s.theta) || !all_finite(s.y_u)) {
    throw NumericalError("simplified_lga_run: non-finite state", s.k);
  }
}

inline SimplifiedLgaState initial_state(const DiagonalProblem& prob, const DiagonalDesign& design) {
  return {Vector::Zero(static_cast<Eigen::Index>(prob.dim())), Vector::Zero(design.x_u.rows()), 0};
}

/// Full-batch gradient descent form of the alignment dynamics on the
/// materialized matrices:
///
///   g_l = (1/n_l) X_l^T (X_l theta - y_l),  g_u = (1/n_u) X_u^T (X_u theta - y_u)
///   r = g_l - g_u
///   theta <- theta - lr_theta g_u
///   y_u   <- y_u - lr_w grad_{y_u} (1/2)|r|^2_normalized
///
/// starting from theta = 0, y_u = 0 unless `start` is given.
inline Trajectory simplified_lga_run(const DiagonalProblem& prob, const DiagonalDesign& design,
                                     const SimplifiedParams& params,
                                     const SimplifiedLgaState* start = nullptr,
                                     const SimplifiedObserver& observer = {}) {
  validate(prob);
  const double nl = static_cast<double>(design.x_l.rows());
  SimplifiedLgaState s = start != nullptr ? *start : initial_state(prob, design);
  const Vector b = design.x_l.transpose() * design.y_l / nl;

  Trajectory traj;
  auto record = [&] {
    if (!internal::is_record_step(params, s.k)) return;
    traj.k.push_back(s.k);
    traj.theta.push_back(s.theta);
    traj.c.push_back(progress_coefficients(prob, s.theta));
  };
  record();
  if (observer) observer(s);
  while (s.k < params.k_max) {
    simplified_lga_step(design, b, params, s);
    record();
    if (observer) observer(s);
  }
  return traj;
}

struct ScalarDimParams {
  double lambda_l = 1.0;
  double lambda_u = 1.0;
  double b = 1.0;
  std::size_t n_u = 4;
};

/// One coordinate of the dynamics above, with u_i = (1/n_u) e_i^T X_u^T y_u:
///
///   g_l = lambda_l theta - b,  g_u = lambda_u theta - u,  r = g_l - g_u
///   theta <- theta - lr_theta g_u
///   u     <- u - lr_w (lambda_u / n_u) coef(r)
///
/// Returns c at the recorded steps.
inline std::vector<double> scalar_recurrence_run(const ScalarDimParams& dim, const SimplifiedParams& params) {
  detail::require(dim.n_u >= 1, "scalar_recurrence_run: n_u must be >= 1");
  double theta = 0.0;
  double u = 0.0;
  std::vector<double> out;
  auto c = [&] { return dim.b == 0.0 ? std::numeric_limits<double>::quiet_NaN() : dim.lambda_l * theta / dim.b; };
  if (internal::is_record_step(params, 0)) out.push_back(c());
  const double u_gain = params.lr_w * dim.lambda_u / static_cast<double>(dim.n_u);
  for (std::size_t k = 1; k <= params.k_max; ++k) {
    const double g_l = dim.lambda_l * theta - dim.b;
    const double g_u = dim.lambda_u * theta - u;
    const double r = g_l - g_u;
    theta -= params.lr_theta * g_u;
    u -= u_gain * norm_coef(params.mode, r, params.eps_norm);
    if (!std::isfinite(theta) || !std::isfinite(u)) throw NumericalError("scalar_recurrence_run: non-finite state", k);
    if (internal::is_record_step(params, k)) out.push_back(c());
  }
  return out;
}

enum class EigenSide { kLabeled, kUnlabeled };

struct Perturbation {
  EigenSide side = EigenSide::kUnlabeled;
  std::size_t dim = 0;
  double value = 1.0;
};

struct Prop1Result {
  std::vector<double> deviations;  // per perturbation
  double max_deviation = 0.0;
};

/// Runs the dynamics on `base` and on each perturbed copy (one eigenvalue
/// replaced), always with the same design seed, and reports
/// max_k |c_{k,i}(perturbed) - c_{k,i}(base)| for the watched coordinate i.
inline Prop1Result prop1_independence_check(const DiagonalProblem& base, std::size_t watched,
                                            const std::vector<Perturbation>& perturbations,
                                            const SimplifiedParams& params, std::uint64_t design_seed) {
  validate(base);
  detail::require(watched < base.dim(), "prop1_independence_check: watched dimension out of range");
  auto run = [&](const DiagonalProblem& p) {
    Rng rng(design_seed);
    return simplified_lga_run(p, make_diagonal_design(p, rng), params);
  };
  const Trajectory ref = run(base);
  Prop1Result out;
  for (const auto& pert : perturbations) {
    detail::require(pert.dim < base.dim(), "prop1_independence_check: perturbed dimension out of range");
    DiagonalProblem p = base;
    (pert.side == EigenSide::kLabeled ? p.lambda_l : p.lambda_u)[static_cast<Eigen::Index>(pert.dim)] = pert.value;
    const Trajectory t = run(p);
    double dev = 0.0;
    for (std::size_t s = 0; s < t.c.size(); ++s) {
      const auto w = static_cast<Eigen::Index>(watched);
      dev = std::max(dev, std::abs(t.c[s][w] - ref.c[s][w]));
    }
    out.deviations.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  return out;
}

struct FixedPointReport {
  bool converged = false;
  std::size_t iterations = 0;
  double grad_inf = 0.0;       // |grad L(theta, X_l, y_l)|_inf
  double theta_err_inf = 0.0;  // |theta - theta*|_inf
  Vector c;
  bool pass = false;
};

/// Iterates the dynamics until both theta and y_u stop moving
/// (max |step| <= step_tol) or max_iters, then compares theta against the
/// least-squares solution on the labeled data.
inline FixedPointReport fixed_point_check(const DiagonalProblem& prob, const DiagonalDesign& design,
                                          const SimplifiedParams& params, double tol,
                                          std::size_t max_iters = 1'000'000,
                                          const SimplifiedLgaState* start = nullptr,
                                          double step_tol = 1e-12) {
  validate(prob);
  const double nl = static_cast<double>(design.x_l.rows());
  FixedPointReport rep;
  SimplifiedLgaState s = start != nullptr ? *start : initial_state(prob, design);
  const Vector b = design.x_l.transpose() * design.y_l / nl;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Vector theta_prev = s.theta;
    const Vector y_prev = s.y_u;
    simplified_lga_step(design, b, params, s);
    const double step = std::max((s.theta - theta_prev).cwiseAbs().maxCoeff(),
                                 (s.y_u - y_prev).cwiseAbs().maxCoeff());
    if (step <= step_tol) {
      rep.converged = true;
      break;
    }
  }
  rep.iterations = s.k;
  const Vector grad = design.x_l.transpose() * (design.x_l * s.theta - design.y_l) / nl;
  rep.grad_inf = grad.cwiseAbs().maxCoeff();
  rep.theta_err_inf = (s.theta - theta_star(design.x_l, design.y_l)).cwiseAbs().maxCoeff();
  rep.c = progress_coefficients(prob, s.theta);
  rep.pass = rep.grad_inf <= tol && rep.theta_err_inf <= tol;
  return rep;
}

}  // namespace lga::linreg

#pragma once

// Adam (dense and per-row sparse), exponential moving averages, the
// per-coordinate normalized squared distance, and the labeled-gradient
// coefficient schedule.

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "lga/error.hpp"
#include "lga/ndcore.hpp"

namespace lga {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::size_t step = 0;
  Vector m;
  Vector v;
  AdamConfig cfg;
};

inline AdamState make_adam_state(std::size_t dim, AdamConfig cfg = {}) {
  const auto n = static_cast<Eigen::Index>(dim);
  return {0, Vector::Zero(n), Vector::Zero(n), cfg};
}

/// One bias-corrected Adam step. Returns the new parameters and state.
inline std::pair<Vector, AdamState> adam_update(AdamState state, const Vector& params,
                                                const Vector& grad, double lr) {
  detail::require(params.size() == grad.size() && state.m.size() == grad.size() &&
                      state.v.size() == grad.size(),
                  "adam_update: dimension mismatch");
  detail::require(lr > 0, "adam_update: learning rate must be positive");
  if (!all_finite(grad)) throw NumericalError("adam_update: non-finite gradient", state.step + 1);

  const auto& c = state.cfg;
  state.step += 1;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double t = static_cast<double>(state.step);
  const double m_corr = 1.0 - std::pow(c.beta1, t);
  const double v_corr = 1.0 - std::pow(c.beta2, t);
  Vector out = params.array() -
               lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + c.epsilon);
  return {std::move(out), std::move(state)};
}

/// Adam over the rows of a matrix where each step touches only some rows.
/// Every row keeps its own step counter so bias correction reflects that
/// row's update count.
struct RowAdamState {
  Matrix m;
  Matrix v;
  std::vector<std::size_t> steps;
  AdamConfig cfg;
};

inline RowAdamState make_row_adam_state(std::size_t rows, std::size_t cols, AdamConfig cfg = {}) {
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  return {Matrix::Zero(r, c), Matrix::Zero(r, c), std::vector<std::size_t>(rows, 0), cfg};
}

/// Applies Adam to rows `rows` of `params`; `grad` row k belongs to params
/// row rows[k]. Rows must be distinct.
inline void row_adam_update(RowAdamState& state, Matrix& params, std::span<const std::size_t> rows,
                            const Matrix& grad, double lr) {
  detail::require(grad.rows() == static_cast<Eigen::Index>(rows.size()) &&
                      grad.cols() == params.cols(),
                  "row_adam_update: gradient shape mismatch");
  detail::require(lr > 0, "row_adam_update: learning rate must be positive");
  if (!all_finite(grad)) throw NumericalError("row_adam_update: non-finite gradient", 0);
  const auto& c = state.cfg;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(rows[k]);
    detail::require(r < params.rows(), "row_adam_update: row index out of range");
    const auto g = grad.row(static_cast<Eigen::Index>(k));
    state.m.row(r) = c.beta1 * state.m.row(r) + (1.0 - c.beta1) * g;
    state.v.row(r) = c.beta2 * state.v.row(r) + (1.0 - c.beta2) * g.cwiseAbs2();
    const double t = static_cast<double>(++state.steps[rows[k]]);
    const double m_corr = 1.0 - std::pow(c.beta1, t);
    const double v_corr = 1.0 - std::pow(c.beta2, t);
    params.row(r).array() -= lr * (state.m.row(r).array() / m_corr) /
                             ((state.v.row(r).array() / v_corr).sqrt() + c.epsilon);
  }
}

struct EmaState {
  double decay = 0.99;
  Vector value;
  bool initialized = false;
};

/// First observation is copied in; later ones blend with weight (1 - decay).
inline EmaState ema_update(EmaState state, const Vector& x) {
  detail::require(state.decay >= 0.0 && state.decay < 1.0, "ema_update: decay must be in [0, 1)");
  if (!state.initialized) {
    state.value = x;
    state.initialized = true;
    return state;
  }
  detail::require(x.size() == state.value.size(), "ema_update: dimension mismatch");
  state.value = state.decay * state.value + (1.0 - state.decay) * x;
  return state;
}

struct NormalizerState {
  double eps_norm = 1e-3;
  EmaState ema_v4{0.999, {}, false};
};

struct NormalizedDistance {
  double dist = 0.0;
  Vector backcoef;  // d dist / d r with the denominator held fixed
  NormalizerState state;
};

/// sum_i r_i^2 / (eps_norm + sqrt(EMA(r_i^4))).
///
/// The EMA of r^4 is updated with this r before the distance is evaluated.
/// A coordinate whose denominator is exactly zero (r_i = 0, eps_norm = 0)
/// contributes nothing.
inline NormalizedDistance normalized_sq_dist(const Vector& r, NormalizerState norm) {
  detail::require(norm.eps_norm >= 0.0, "normalized_sq_dist: eps_norm must be non-negative");
  if (!all_finite(r)) throw NumericalError("normalized_sq_dist: non-finite residual", 0);
  norm.ema_v4 = ema_update(std::move(norm.ema_v4), r.array().square().square().matrix());

  NormalizedDistance out;
  out.backcoef = Vector::Zero(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const double denom = norm.eps_norm + std::sqrt(norm.ema_v4.value[i]);
    if (denom == 0.0) continue;
    out.dist += r[i] * r[i] / denom;
    out.backcoef[i] = 2.0 * r[i] / denom;
  }
  out.state = std::move(norm);
  return out;
}

enum class ScheduleKind { kConstant, kLinearRamp };

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::kConstant;
  double t_max = 1.0;
  std::size_t warmup_iters = 0;
};

/// Coefficient on the labeled gradient at iteration i (1-based).
inline double schedule_T(const ScheduleConfig& cfg, std::size_t i) {
  if (cfg.kind == ScheduleKind::kConstant || cfg.warmup_iters == 0) return cfg.t_max;
  const double frac = static_cast<double>(i) / static_cast<double>(cfg.warmup_iters);
  return cfg.t_max * std::min(1.0, frac);
}

}  // namespace lga

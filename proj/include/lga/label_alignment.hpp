#pragma once

// Label gradient alignment training loop.
//
// Every iteration draws a labeled minibatch and an unlabeled minibatch
// together with the matching rows of the imputed-label parameters w, then
//
//   g_l     = grad L(theta, X_l, y_l)
//   g_u     = grad L(theta, X_u, f(w))
//   theta  <- opt(theta, g_u + T(i) g_l)
//   w      <- opt(w, d/dw |EMA(g_l) - g_u|^2_normalized)
//
// where f is the identity (regression) or a row-wise softmax
// (classification), and the normalizer denominator and EMA are constants
// under differentiation.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "lga/error.hpp"
#include "lga/metrics.hpp"
#include "lga/models.hpp"
#include "lga/ndcore.hpp"
#include "lga/optim.hpp"
#include "lga/synthdata.hpp"

namespace lga {

enum class LabelParam { kIdentity, kSoftmax };
enum class OptimizerKind { kAdam, kSgd };
/// Vector whose alignment is tracked: the applied step or the raw gradient.
enum class AlignmentUpdate { kDisplacement, kGradient };

struct ImputedLabelState {
  Matrix w;
  RowAdamState adam;
  LabelParam param = LabelParam::kSoftmax;

  /// f(w) for the given rows of w.
  Matrix labels_of(const Matrix& w_rows) const {
    return param == LabelParam::kSoftmax ? softmax_rows(w_rows) : w_rows;
  }
  Matrix labels() const { return labels_of(w); }
};

/// w = 0, which for the softmax parameterization means uniform labels.
inline ImputedLabelState make_imputed_labels(std::size_t n_unlabeled, std::size_t k, LabelParam param,
                                             AdamConfig adam = {}) {
  const auto rows = static_cast<Eigen::Index>(n_unlabeled);
  const auto cols = static_cast<Eigen::Index>(k);
  return {Matrix::Zero(rows, cols), make_row_adam_state(n_unlabeled, k, adam), param};
}

struct LgaConfig {
  double lr_theta = 1e-3;
  double lr_w = 1e-2;
  std::size_t batch_labeled = 100;
  std::size_t batch_unlabeled = 100;
  std::size_t iterations = 1000;
  double eps_norm = 1e-3;
  double ema_grad_decay = 0.99;
  double ema_norm_decay = 0.999;
  ScheduleConfig schedule;
  AdamConfig adam;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  LabelParam label_param = LabelParam::kSoftmax;
  std::uint64_t seed = 0;
  /// Metrics are recorded every `record_every` iterations and at the last one.
  std::size_t record_every = 50;
  bool track_alignment = false;
  AlignmentUpdate alignment_update = AlignmentUpdate::kDisplacement;
  PowerBudget probe;
  /// Evaluation rows used for the alignment Hessian; 0 means all test rows.
  std::size_t probe_rows = 0;
};

struct TrainRecord {
  std::size_t iteration = 0;
  double labeled_loss = 0.0;
  double unlabeled_loss = std::numeric_limits<double>::quiet_NaN();
  double grad_dist = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double alignment = std::numeric_limits<double>::quiet_NaN();
  double wall_time = 0.0;  // seconds since the start of the run
};

/// Distinct row indices drawn uniformly without replacement (partial
/// Fisher-Yates). size == n yields a random permutation.
inline std::vector<std::size_t> sample_rows(Rng& rng, std::size_t n, std::size_t size) {
  detail::require(size <= n, "sample_rows: batch larger than dataset");
  detail::require(size >= 1, "sample_rows: empty batch");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < size; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(size);
  return idx;
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

struct PairedBatch {
  std::vector<std::size_t> rows;
  Matrix x;
  Matrix w;
};

/// Unlabeled inputs and their imputed-label parameters sampled with one
/// shared index list.
inline PairedBatch sample_paired_minibatch(Rng& rng, const Matrix& x_unlabeled,
                                           const ImputedLabelState& labels, std::size_t size) {
  detail::require(x_unlabeled.rows() == labels.w.rows(),
                  "sample_paired_minibatch: inputs and label parameters disagree in row count");
  PairedBatch b;
  b.rows = sample_rows(rng, static_cast<std::size_t>(x_unlabeled.rows()), size);
  b.x = gather_rows(x_unlabeled, b.rows);
  b.w = gather_rows(labels.w, b.rows);
  return b;
}

struct LabelGradient {
  double dist = 0.0;
  Matrix g_w;  // gradient for the sampled rows of w
  NormalizerState normalizer;
};

/// Gradient of |target - g_u(f(w))|^2_normalized with respect to the sampled
/// w rows, where g_u = grad L(theta, x, f(w)). The normalizer is advanced with
/// this residual before the distance is taken.
template <DifferentiableModel M>
LabelGradient label_gradient(const M& model, const Vector& theta, const Matrix& x, const Matrix& w,
                             LabelParam param, const Vector& target, const Vector& g_u,
                             NormalizerState normalizer) {
  const Vector r = target - g_u;
  NormalizedDistance nd = normalized_sq_dist(r, std::move(normalizer));
  // r depends on the labels only through -g_u.
  const Matrix g_y = -model.grad_label_contraction(theta, x, nd.backcoef);
  LabelGradient out{nd.dist, g_y, std::move(nd.state)};
  if (param == LabelParam::kSoftmax) {
    const Matrix y = softmax_rows(w);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double inner = y.row(i).dot(g_y.row(i));
      out.g_w.row(i) = y.row(i).array() * (g_y.row(i).array() - inner);
    }
  }
  return out;
}

struct LgaState {
  Vector theta;
  AdamState theta_adam;
  ImputedLabelState labels;
  EmaState grad_ema;
  NormalizerState normalizer;
};

template <DifferentiableModel M>
LgaState make_lga_state(const M& model, const LgaConfig& cfg, std::size_t n_unlabeled, Vector theta) {
  detail::require(theta.size() == static_cast<Eigen::Index>(model.num_params()),
                  "make_lga_state: theta has wrong dimension");
  LgaState s;
  s.theta = std::move(theta);
  s.theta_adam = make_adam_state(model.num_params(), cfg.adam);
  s.labels = make_imputed_labels(n_unlabeled, model.output_dim(), cfg.label_param, cfg.adam);
  s.grad_ema = EmaState{cfg.ema_grad_decay, {}, false};
  s.normalizer = NormalizerState{cfg.eps_norm, EmaState{cfg.ema_norm_decay, {}, false}};
  return s;
}

struct StepMetrics {
  double labeled_loss = 0.0;
  double unlabeled_loss = 0.0;
  double grad_dist = 0.0;
  Vector g_theta;
  Matrix g_w;
  Vector displacement;  // theta_new - theta_old
};

inline Vector apply_update(OptimizerKind kind, AdamState& adam, const Vector& params,
                           const Vector& grad, double lr) {
  if (kind == OptimizerKind::kSgd) {
    detail::require(lr > 0, "sgd: learning rate must be positive");
    if (!all_finite(grad)) throw NumericalError("sgd: non-finite gradient", adam.step + 1);
    ++adam.step;
    return params - lr * grad;
  }
  auto [next, state] = adam_update(std::move(adam), params, grad, lr);
  adam = std::move(state);
  return next;
}

/// One iteration (1-based index i) on the given minibatches.
template <DifferentiableModel M>
StepMetrics lga_step(const M& model, LgaState& s, const Matrix& x_l, const Matrix& y_l,
                     const PairedBatch& ub, const LgaConfig& cfg, std::size_t i) {
  detail::require(x_l.rows() > 0 && ub.x.rows() > 0, "lga_step: empty batch");
  detail::require(ub.w.rows() == ub.x.rows() &&
                      ub.rows.size() == static_cast<std::size_t>(ub.x.rows()),
                  "lga_step: unlabeled batch is not paired");
  StepMetrics out;
  const Matrix y_u = s.labels.labels_of(ub.w);

  const Vector g_l = model.grad_theta(s.theta, x_l, y_l);
  const Vector g_u = model.grad_theta(s.theta, ub.x, y_u);
  if (!all_finite(g_l) || !all_finite(g_u)) throw NumericalError("lga_step: non-finite gradient", i);
  out.labeled_loss = model.loss(s.theta, x_l, y_l);
  out.unlabeled_loss = model.loss(s.theta, ub.x, y_u);
  out.g_theta = g_u + schedule_T(cfg.schedule, i) * g_l;

  s.grad_ema = ema_update(std::move(s.grad_ema), g_l);
  LabelGradient lg = label_gradient(model, s.theta, ub.x, ub.w, s.labels.param, s.grad_ema.value,
                                    g_u, std::move(s.normalizer));
  if (!all_finite(lg.g_w)) throw NumericalError("lga_step: non-finite label gradient", i);
  s.normalizer = std::move(lg.normalizer);
  out.grad_dist = lg.dist;
  out.g_w = std::move(lg.g_w);

  Vector next = apply_update(cfg.optimizer, s.theta_adam, s.theta, out.g_theta, cfg.lr_theta);
  out.displacement = next - s.theta;
  s.theta = std::move(next);

  if (cfg.optimizer == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < ub.rows.size(); ++k) {
      s.labels.w.row(static_cast<Eigen::Index>(ub.rows[k])) -=
          cfg.lr_w * out.g_w.row(static_cast<Eigen::Index>(k));
      ++s.labels.adam.steps[ub.rows[k]];
    }
  } else {
    row_adam_update(s.labels.adam, s.labels.w, ub.rows, out.g_w, cfg.lr_w);
  }
  return out;
}

struct LgaResult {
  std::vector<TrainRecord> records;
  Vector theta;
  Matrix w;
};

struct SupervisedResult {
  std::vector<TrainRecord> records;
  Vector theta;
};

/// Optional per-iteration observer, called after each update.
using LgaObserver = std::function<void(std::size_t iteration, const LgaState&, const StepMetrics&)>;

namespace detail {

inline void validate(const LgaConfig& cfg, const Dataset& labeled, std::size_t n_unlabeled,
                     bool need_unlabeled) {
  require(cfg.iterations >= 1, "config: iterations must be >= 1");
  require(cfg.lr_theta > 0, "config: lr_theta must be positive");
  require(labeled.labeled(), "config: labeled set has no labels");
  require(cfg.batch_labeled >= 1 && cfg.batch_labeled <= labeled.size(),
          "config: labeled batch size must be in [1, n_labeled]");
  require(cfg.record_every >= 1, "config: record_every must be >= 1");
  if (!need_unlabeled) return;
  require(cfg.lr_w > 0, "config: lr_w must be positive");
  require(cfg.batch_unlabeled >= 1 && cfg.batch_unlabeled <= n_unlabeled,
          "config: unlabeled batch size must be in [1, n_unlabeled]");
  require(cfg.eps_norm >= 0, "config: eps_norm must be non-negative");
  require(cfg.ema_grad_decay >= 0 && cfg.ema_grad_decay < 1, "config: ema_grad_decay must be in [0, 1)");
  require(cfg.ema_norm_decay >= 0 && cfg.ema_norm_decay < 1, "config: ema_norm_decay must be in [0, 1)");
}

inline bool is_record_iteration(const LgaConfig& cfg, std::size_t i) {
  return i % cfg.record_every == 0 || i == cfg.iterations;
}

inline std::optional<AlignmentProbe> make_probe(const LgaConfig& cfg, const Dataset* test) {
  if (!cfg.track_alignment) return std::nullopt;
  require(test != nullptr && test->labeled(), "config: alignment tracking needs a labeled test set");
  const Dataset probe_set = cfg.probe_rows == 0 ? *test : head(*test, cfg.probe_rows);
  return AlignmentProbe(probe_set.x, *probe_set.y, cfg.probe);
}

template <DifferentiableModel M>
void fill_eval(TrainRecord& rec, const M& model, const Vector& theta, const Dataset* test) {
  if (test == nullptr) return;
  const Evaluation ev = evaluate(model, theta, *test);
  rec.test_loss = ev.loss;
  rec.test_acc = ev.accuracy;
}

}  // namespace detail

/// Runs cfg.iterations LGA steps. theta starts at `theta_init` when given,
/// else at model.init_params on a seeded stream.
template <DifferentiableModel M>
LgaResult lga_train(const M& model, const LgaConfig& cfg, const Dataset& labeled,
                    const Dataset& unlabeled, const Dataset* test = nullptr,
                    std::optional<Vector> theta_init = std::nullopt,
                    const LgaObserver& observer = {}) {
  detail::validate(cfg, labeled, unlabeled.size(), true);
  const auto start = std::chrono::steady_clock::now();
  const Rng root(cfg.seed);
  Rng init_rng = root.substream("init");
  Rng lab_rng = root.substream("batches/labeled");
  Rng unl_rng = root.substream("batches/unlabeled");

  Vector theta = theta_init ? std::move(*theta_init) : model.init_params(init_rng);
  LgaState s = make_lga_state(model, cfg, unlabeled.size(), std::move(theta));
  auto probe = detail::make_probe(cfg, test);

  LgaResult result;
  for (std::size_t i = 1; i <= cfg.iterations; ++i) {
    const auto lrows = sample_rows(lab_rng, labeled.size(), cfg.batch_labeled);
    const Matrix x_l = gather_rows(labeled.x, lrows);
    const Matrix y_l = gather_rows(*labeled.y, lrows);
    const PairedBatch ub = sample_paired_minibatch(unl_rng, unlabeled.x, s.labels, cfg.batch_unlabeled);

    const Vector theta_before = probe && detail::is_record_iteration(cfg, i) ? s.theta : Vector();
    const StepMetrics m = lga_step(model, s, x_l, y_l, ub, cfg, i);
    if (observer) observer(i, s, m);

    if (detail::is_record_iteration(cfg, i)) {
      TrainRecord rec;
      rec.iteration = i;
      rec.labeled_loss = m.labeled_loss;
      rec.unlabeled_loss = m.unlabeled_loss;
      rec.grad_dist = m.grad_dist;
      detail::fill_eval(rec, model, s.theta, test);
      const Vector& update = cfg.alignment_update == AlignmentUpdate::kGradient ? m.g_theta : m.displacement;
      if (probe && update.norm() > 0) rec.alignment = alignment(*probe, model, theta_before, update);
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(rec);
    }
  }
  result.theta = std::move(s.theta);
  result.w = std::move(s.labels.w);
  return result;
}

template <DifferentiableModel M>
LgaResult lga_train(const M& model, const LgaConfig& cfg, const RingsData& data) {
  return lga_train(model, cfg, data.labeled, data.unlabeled, &data.test);
}

/// Baseline: the same optimizer on labeled minibatches only.
template <DifferentiableModel M>
SupervisedResult supervised_train(const M& model, const LgaConfig& cfg, const Dataset& labeled,
                                  const Dataset* test = nullptr,
                                  std::optional<Vector> theta_init = std::nullopt) {
  detail::validate(cfg, labeled, 0, false);
  const auto start = std::chrono::steady_clock::now();
  const Rng root(cfg.seed);
  Rng init_rng = root.substream("init");
  Rng lab_rng = root.substream("batches/labeled");

  Vector theta = theta_init ? std::move(*theta_init) : model.init_params(init_rng);
  detail::require(theta.size() == static_cast<Eigen::Index>(model.num_params()),
                  "supervised_train: theta has wrong dimension");
  AdamState adam = make_adam_state(model.num_params(), cfg.adam);
  auto probe = detail::make_probe(cfg, test);

  SupervisedResult result;
  for (std::size_t i = 1; i <= cfg.iterations; ++i) {
    const auto lrows = sample_rows(lab_rng, labeled.size(), cfg.batch_labeled);
    const Matrix x_l = gather_rows(labeled.x, lrows);
    const Matrix y_l = gather_rows(*labeled.y, lrows);
    const Vector g = model.grad_theta(theta, x_l, y_l);
    if (!all_finite(g)) throw NumericalError("supervised_train: non-finite gradient", i);
    const double labeled_loss = detail::is_record_iteration(cfg, i) ? model.loss(theta, x_l, y_l) : 0.0;
    Vector next = apply_update(cfg.optimizer, adam, theta, g, cfg.lr_theta);
    const Vector displacement = next - theta;

    if (detail::is_record_iteration(cfg, i)) {
      TrainRecord rec;
      rec.iteration = i;
      rec.labeled_loss = labeled_loss;
      detail::fill_eval(rec, model, next, test);
      const Vector& update = cfg.alignment_update == AlignmentUpdate::kGradient ? g : displacement;
      if (probe && update.norm() > 0) rec.alignment = alignment(*probe, model, theta, update);
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.records.push_back(rec);
    }
    theta = std::move(next);
  }
  result.theta = std::move(theta);
  return result;
}

template <DifferentiableModel M>
SupervisedResult supervised_train(const M& model, const LgaConfig& cfg, const RingsData& data) {
  return supervised_train(model, cfg, data.labeled, &data.test);
}

}  // namespace lga

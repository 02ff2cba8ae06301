#pragma once

// Differentiable model families: a linear regressor with squared error, and
// a rectifier MLP with either softmax cross-entropy or squared error on its
// outputs. Every model exposes the derivative quantities the training loop
// and diagnostics need, all computed analytically:
//
//   loss                    L(theta, X, Y), mean over rows
//   grad_theta              dL/dtheta
//   logit_jvp               (dz_i/dtheta) u for every row i
//   grad_label_contraction  d/dY [grad_theta(theta, X, Y) . v]
//   hvp                     (d^2 L / dtheta^2) v, forward-over-reverse
//
// grad_theta is affine in Y for both losses, so grad_label_contraction does
// not depend on Y and equals -(1/n) * logit_jvp(theta, X, v).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <cstddef>
#include <string>
#include <vector>

#include "lga/error.hpp"
#include "lga/ndcore.hpp"

namespace lga {

enum class LossKind { kMeanSquaredError, kSoftmaxCrossEntropy };

/// kStrict rejects cross-entropy label rows that are off the simplex.
/// kAffine skips that check and evaluates the gradient formula as an affine
/// function of arbitrary label values (used when differentiating in Y).
enum class LabelCheck { kStrict, kAffine };

/// Floor applied to probabilities inside the cross-entropy log.
inline constexpr double kProbabilityFloor = 1e-12;

inline std::string to_string(LossKind kind) {
  return kind == LossKind::kMeanSquaredError ? "mse" : "softmax_ce";
}

/// Row-wise softmax of a logit matrix.
inline Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    p.row(i) = (z.row(i).array() - zmax).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

namespace detail {

inline void check_labels(LossKind kind, const Matrix& y, LabelCheck check) {
  require(all_finite(y), "labels must be finite");
  if (kind != LossKind::kSoftmaxCrossEntropy || check == LabelCheck::kAffine) return;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    if (std::abs(y.row(i).sum() - 1.0) > 1e-6 || y.row(i).minCoeff() < -1e-12) {
      throw InvalidArgument("cross-entropy label row " + std::to_string(i) +
                            " is not in the probability simplex");
    }
  }
}

inline double output_loss(LossKind kind, const Matrix& z, const Matrix& y) {
  const auto n = static_cast<double>(z.rows());
  if (kind == LossKind::kMeanSquaredError) return 0.5 * (z - y).squaredNorm() / n;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (y(i, c) == 0.0) continue;
      const double logp = std::max(z(i, c) - lse, std::log(kProbabilityFloor));
      total -= y(i, c) * logp;
    }
  }
  return total / n;
}

// dL/dz for the mean loss. For cross-entropy this is (p - y)/n, the simplex
// form that keeps the gradient affine in y.
inline Matrix output_grad(LossKind kind, const Matrix& z, const Matrix& y) {
  const auto n = static_cast<double>(z.rows());
  if (kind == LossKind::kMeanSquaredError) return (z - y) / n;
  return (softmax_rows(z) - y) / n;
}

// Directional derivative of output_grad along a logit tangent zdot.
inline Matrix output_grad_tangent(LossKind kind, const Matrix& z, const Matrix& zdot) {
  const auto n = static_cast<double>(z.rows());
  if (kind == LossKind::kMeanSquaredError) return zdot / n;
  const Matrix p = softmax_rows(z);
  const Matrix pz = p.cwiseProduct(zdot);
  Matrix pdot = pz;
  for (Eigen::Index i = 0; i < p.rows(); ++i) pdot.row(i) -= p.row(i) * pz.row(i).sum();
  return pdot / n;
}

}  // namespace detail

/// Linear regressor z = X theta (no bias) with loss (1/2n)|y - X theta|^2.
class LinearModel {
 public:
  explicit LinearModel(std::size_t input_dim) : input_dim_(input_dim) {
    detail::require(input_dim >= 1, "LinearModel: input_dim must be >= 1");
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return 1; }
  std::size_t num_params() const noexcept { return input_dim_; }
  LossKind loss_kind() const noexcept { return LossKind::kMeanSquaredError; }

  /// theta_init = 0.
  Vector init_params(Rng& /*rng*/) const { return Vector::Zero(static_cast<Eigen::Index>(input_dim_)); }

  Matrix logits(const Vector& theta, const Matrix& x) const {
    check_inputs(theta, x);
    return x * theta;
  }
  Matrix predict(const Vector& theta, const Matrix& x) const { return logits(theta, x); }

  double loss(const Vector& theta, const Matrix& x, const Matrix& y) const {
    check_labels(x, y, LabelCheck::kStrict);
    return detail::output_loss(loss_kind(), logits(theta, x), y);
  }

  Vector grad_theta(const Vector& theta, const Matrix& x, const Matrix& y,
                    LabelCheck check = LabelCheck::kStrict) const {
    check_labels(x, y, check);
    const auto n = static_cast<double>(x.rows());
    return x.transpose() * (x * theta - y) / n;
  }

  Matrix logit_jvp(const Vector& theta, const Matrix& x, const Vector& u) const {
    check_inputs(theta, x);
    check_direction(u);
    return x * u;
  }

  Matrix grad_label_contraction(const Vector& theta, const Matrix& x, const Vector& v) const {
    return -logit_jvp(theta, x, v) / static_cast<double>(x.rows());
  }

  Vector hvp(const Vector& theta, const Matrix& x, const Matrix& y, const Vector& v) const {
    check_labels(x, y, LabelCheck::kStrict);
    check_inputs(theta, x);
    check_direction(v);
    return x.transpose() * (x * v) / static_cast<double>(x.rows());
  }

 private:
  void check_inputs(const Vector& theta, const Matrix& x) const {
    detail::require(theta.size() == static_cast<Eigen::Index>(input_dim_),
                    "LinearModel: parameter dimension mismatch");
    detail::require(x.cols() == static_cast<Eigen::Index>(input_dim_),
                    "LinearModel: input column count mismatch");
    detail::require(x.rows() >= 1, "LinearModel: empty batch");
  }
  void check_direction(const Vector& v) const {
    detail::require(v.size() == static_cast<Eigen::Index>(input_dim_),
                    "LinearModel: direction dimension mismatch");
    detail::require(all_finite(v), "LinearModel: direction must be finite");
  }
  void check_labels(const Matrix& x, const Matrix& y, LabelCheck check) const {
    detail::require(y.rows() == x.rows() && y.cols() == 1, "LinearModel: label shape mismatch");
    detail::check_labels(loss_kind(), y, check);
  }

  std::size_t input_dim_;
};

enum class Activation { kRelu };

struct MlpConfig {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 128;
  std::size_t num_hidden_layers = 3;
  std::size_t output_dim = 5;
  Activation activation = Activation::kRelu;
  LossKind loss = LossKind::kSoftmaxCrossEntropy;
};

/// Fully connected rectifier network: num_hidden_layers hidden layers of
/// hidden_dim units followed by a linear output layer.
///
/// Parameters are flattened layer by layer, each layer contributing its
/// weight matrix (out x in, row-major) followed by its bias.
class Mlp {
 public:
  explicit Mlp(MlpConfig cfg) : cfg_(cfg) {
    detail::require(cfg.input_dim >= 1 && cfg.hidden_dim >= 1 && cfg.output_dim >= 1,
                    "Mlp: all dimensions must be >= 1");
    std::size_t offset = 0;
    std::size_t in = cfg.input_dim;
    for (std::size_t l = 0; l <= cfg.num_hidden_layers; ++l) {
      const std::size_t out = l == cfg.num_hidden_layers ? cfg.output_dim : cfg.hidden_dim;
      layers_.push_back({in, out, offset, offset + in * out});
      offset += in * out + out;
      in = out;
    }
    num_params_ = offset;
  }

  const MlpConfig& config() const noexcept { return cfg_; }
  std::size_t input_dim() const noexcept { return cfg_.input_dim; }
  std::size_t output_dim() const noexcept { return cfg_.output_dim; }
  std::size_t num_params() const noexcept { return num_params_; }
  LossKind loss_kind() const noexcept { return cfg_.loss; }

  /// Gaussian weights with standard deviation sqrt(2 / fan_in), zero biases.
  Vector init_params(Rng& rng) const {
    Vector theta = Vector::Zero(static_cast<Eigen::Index>(num_params_));
    for (const auto& layer : layers_) {
      const double scale = std::sqrt(2.0 / static_cast<double>(layer.in));
      for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
        theta[static_cast<Eigen::Index>(layer.w_offset + i)] = scale * rng.normal();
      }
    }
    return theta;
  }

  Matrix logits(const Vector& theta, const Matrix& x) const {
    check_inputs(theta, x);
    return forward(theta, x).pre.back();
  }

  /// Class probabilities for cross-entropy, raw outputs for squared error.
  Matrix predict(const Vector& theta, const Matrix& x) const {
    Matrix z = logits(theta, x);
    return cfg_.loss == LossKind::kSoftmaxCrossEntropy ? softmax_rows(z) : z;
  }

  double loss(const Vector& theta, const Matrix& x, const Matrix& y) const {
    check_labels(x, y, LabelCheck::kStrict);
    return detail::output_loss(cfg_.loss, logits(theta, x), y);
  }

  Vector grad_theta(const Vector& theta, const Matrix& x, const Matrix& y,
                    LabelCheck check = LabelCheck::kStrict) const {
    check_inputs(theta, x);
    check_labels(x, y, check);
    const Forward fw = forward(theta, x);
    Vector grad = Vector::Zero(static_cast<Eigen::Index>(num_params_));
    backward(theta, x, fw, detail::output_grad(cfg_.loss, fw.pre.back(), y), grad);
    return grad;
  }

  Matrix logit_jvp(const Vector& theta, const Matrix& x, const Vector& u) const {
    check_inputs(theta, x);
    check_direction(u);
    const Forward fw = forward(theta, x);
    return tangent(theta, u, x, fw).back();
  }

  Matrix grad_label_contraction(const Vector& theta, const Matrix& x, const Vector& v) const {
    return -logit_jvp(theta, x, v) / static_cast<double>(x.rows());
  }

  Vector hvp(const Vector& theta, const Matrix& x, const Matrix& y, const Vector& v) const {
    check_inputs(theta, x);
    check_labels(x, y, LabelCheck::kStrict);
    check_direction(v);
    const Forward fw = forward(theta, x);
    const std::vector<Matrix> zdot = tangent(theta, v, x, fw);
    const std::size_t depth = layers_.size();

    Matrix g = detail::output_grad(cfg_.loss, fw.pre.back(), y);
    Matrix gdot = detail::output_grad_tangent(cfg_.loss, fw.pre.back(), zdot.back());
    Vector out = Vector::Zero(static_cast<Eigen::Index>(num_params_));
    for (std::size_t l = depth; l-- > 0;) {
      const auto& layer = layers_[l];
      const Matrix& in = l == 0 ? x : fw.act[l - 1];
      auto out_w = weight_map(out, layer);
      out_w = gdot.transpose() * in;
      if (l > 0) {
        // d(input)/dt for this layer is the activated tangent of the layer below.
        const Matrix in_dot = relu_mask(fw.pre[l - 1]).cwiseProduct(zdot[l - 1]);
        out_w += g.transpose() * in_dot;
      }
      bias_map(out, layer) = gdot.colwise().sum().transpose();
      if (l > 0) {
        const auto w = weight_map(theta, layer);
        const auto dw = weight_map(v, layer);
        const Matrix mask = relu_mask(fw.pre[l - 1]);
        Matrix next_gdot = (gdot * w + g * dw).cwiseProduct(mask);
        g = (g * w).cwiseProduct(mask);
        gdot = std::move(next_gdot);
      }
    }
    return out;
  }

  /// Smallest |pre-activation| over all hidden units for the batch. Finite
  /// difference checks use it to stay away from rectifier kinks.
  double min_abs_preactivation(const Vector& theta, const Matrix& x) const {
    check_inputs(theta, x);
    const Forward fw = forward(theta, x);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l + 1 < fw.pre.size(); ++l) best = std::min(best, fw.pre[l].cwiseAbs().minCoeff());
    return best;
  }

 private:
  struct Layer {
    std::size_t in, out, w_offset, b_offset;
  };
  struct Forward {
    std::vector<Matrix> pre;  // per layer, n x out
    std::vector<Matrix> act;  // rectified hidden layers only
  };
  using ConstWeightMap = Eigen::Map<const Matrix>;
  using WeightMap = Eigen::Map<Matrix>;

  static ConstWeightMap weight_map(const Vector& theta, const Layer& layer) {
    return ConstWeightMap(theta.data() + layer.w_offset, static_cast<Eigen::Index>(layer.out),
                          static_cast<Eigen::Index>(layer.in));
  }
  static WeightMap weight_map(Vector& theta, const Layer& layer) {
    return WeightMap(theta.data() + layer.w_offset, static_cast<Eigen::Index>(layer.out),
                     static_cast<Eigen::Index>(layer.in));
  }
  static Eigen::Map<const Vector> bias_map(const Vector& theta, const Layer& layer) {
    return {theta.data() + layer.b_offset, static_cast<Eigen::Index>(layer.out)};
  }
  static Eigen::Map<Vector> bias_map(Vector& theta, const Layer& layer) {
    return {theta.data() + layer.b_offset, static_cast<Eigen::Index>(layer.out)};
  }

  // Rectifier derivative; 0 at exactly 0.
  static Matrix relu_mask(const Matrix& pre) {
    return (pre.array() > 0.0).cast<double>().matrix();
  }

  Forward forward(const Vector& theta, const Matrix& x) const {
    Forward fw;
    fw.pre.reserve(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Matrix& in = l == 0 ? x : fw.act.back();
      Matrix z = in * weight_map(theta, layers_[l]).transpose();
      z.rowwise() += bias_map(theta, layers_[l]).transpose();
      if (l + 1 < layers_.size()) fw.act.push_back(z.cwiseMax(0.0));
      fw.pre.push_back(std::move(z));
    }
    return fw;
  }

  // Forward-mode tangents of every layer's pre-activation along direction u.
  std::vector<Matrix> tangent(const Vector& theta, const Vector& u, const Matrix& x,
                              const Forward& fw) const {
    std::vector<Matrix> zdot;
    zdot.reserve(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Matrix& in = l == 0 ? x : fw.act[l - 1];
      Matrix z = in * weight_map(u, layers_[l]).transpose();
      z.rowwise() += bias_map(u, layers_[l]).transpose();
      if (l > 0) {
        z += relu_mask(fw.pre[l - 1]).cwiseProduct(zdot.back()) *
             weight_map(theta, layers_[l]).transpose();
      }
      zdot.push_back(std::move(z));
    }
    return zdot;
  }

  void backward(const Vector& theta, const Matrix& x, const Forward& fw, Matrix g,
                Vector& grad) const {
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      const Matrix& in = l == 0 ? x : fw.act[l - 1];
      weight_map(grad, layer) = g.transpose() * in;
      bias_map(grad, layer) = g.colwise().sum().transpose();
      if (l > 0) g = (g * weight_map(theta, layer)).cwiseProduct(relu_mask(fw.pre[l - 1]));
    }
  }

  void check_inputs(const Vector& theta, const Matrix& x) const {
    detail::require(theta.size() == static_cast<Eigen::Index>(num_params_),
                    "Mlp: parameter dimension mismatch");
    detail::require(x.cols() == static_cast<Eigen::Index>(cfg_.input_dim),
                    "Mlp: input column count mismatch");
    detail::require(x.rows() >= 1, "Mlp: empty batch");
  }
  void check_direction(const Vector& v) const {
    detail::require(v.size() == static_cast<Eigen::Index>(num_params_),
                    "Mlp: direction dimension mismatch");
    detail::require(all_finite(v), "Mlp: direction must be finite");
  }
  void check_labels(const Matrix& x, const Matrix& y, LabelCheck check) const {
    detail::require(y.rows() == x.rows() && y.cols() == static_cast<Eigen::Index>(cfg_.output_dim),
                    "Mlp: label shape mismatch");
    detail::check_labels(cfg_.loss, y, check);
  }

  MlpConfig cfg_;
  std::vector<Layer> layers_;
  std::size_t num_params_ = 0;
};

/// The derivative surface the training loop and diagnostics rely on.
template <class M>
concept DifferentiableModel = requires(const M& m, const Vector& t, const Matrix& x, Rng& rng) {
  { m.num_params() } -> std::convertible_to<std::size_t>;
  { m.input_dim() } -> std::convertible_to<std::size_t>;
  { m.output_dim() } -> std::convertible_to<std::size_t>;
  { m.loss_kind() } -> std::same_as<LossKind>;
  { m.init_params(rng) } -> std::same_as<Vector>;
  { m.logits(t, x) } -> std::same_as<Matrix>;
  { m.predict(t, x) } -> std::same_as<Matrix>;
  { m.loss(t, x, x) } -> std::convertible_to<double>;
  { m.grad_theta(t, x, x, LabelCheck::kStrict) } -> std::same_as<Vector>;
  { m.logit_jvp(t, x, t) } -> std::same_as<Matrix>;
  { m.grad_label_contraction(t, x, t) } -> std::same_as<Matrix>;
  { m.hvp(t, x, x, t) } -> std::same_as<Vector>;
};

static_assert(DifferentiableModel<LinearModel>);
static_assert(DifferentiableModel<Mlp>);

}  // namespace lga

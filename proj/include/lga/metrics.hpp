#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

#include "lga/error.hpp"
#include "lga/models.hpp"
#include "lga/ndcore.hpp"
#include "lga/synthdata.hpp"

namespace lga {

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;  // NaN for single-output regression models
};

/// Index of the largest entry in each row; ties go to the lowest index.
inline std::vector<Eigen::Index> argmax_rows(const Matrix& m) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(m.rows()), 0);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
      if (m(i, c) > m(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

template <DifferentiableModel M>
Evaluation evaluate(const M& model, const Vector& theta, const Matrix& x, const Matrix& y) {
  Evaluation ev;
  ev.loss = model.loss(theta, x, y);
  if (model.output_dim() < 2) {
    ev.accuracy = std::numeric_limits<double>::quiet_NaN();
    return ev;
  }
  const auto pred = argmax_rows(model.logits(theta, x));
  const auto truth = argmax_rows(y);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());
  return ev;
}

template <DifferentiableModel M>
Evaluation evaluate(const M& model, const Vector& theta, const Dataset& test) {
  detail::require(test.labeled(), "evaluate: test set has no labels");
  return evaluate(model, theta, test.x, *test.y);
}

struct PowerBudget {
  std::size_t iters = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0x5eed;
};

/// |q . u| / (|q| |u|)
inline double abs_cosine(const Vector& q, const Vector& u) {
  detail::require(q.size() == u.size(), "abs_cosine: dimension mismatch");
  const double nu = u.norm();
  const double nq = q.norm();
  detail::require(nu > 0.0, "alignment: update vector is zero");
  detail::require(nq > 0.0, "alignment: eigenvector is zero");
  return std::min(1.0, std::abs(q.dot(u)) / (nq * nu));
}

/// Tracks the principal eigenvector of the Hessian of the loss on a fixed
/// evaluation set. The eigenvector is recomputed whenever it is requested at
/// a parameter vector different from the one it was computed at.
class AlignmentProbe {
 public:
  AlignmentProbe(Matrix x, Matrix y, PowerBudget budget = {})
      : x_(std::move(x)), y_(std::move(y)), budget_(budget) {
    detail::require(x_.rows() == y_.rows() && x_.rows() > 0, "AlignmentProbe: bad evaluation set");
  }

  template <DifferentiableModel M>
  const EigenPair& principal(const M& model, const Vector& theta) {
    if (!stamp_ || stamp_->size() != theta.size() || *stamp_ != theta) {
      Rng rng(budget_.seed);
      auto apply = [&](const Vector& v) { return model.hvp(theta, x_, y_, v); };
      cached_ = power_iteration(apply, model.num_params(), budget_.iters, budget_.tol, rng);
      stamp_ = theta;
      ++recomputations_;
    }
    return cached_;
  }

  std::size_t recomputations() const noexcept { return recomputations_; }
  const PowerBudget& budget() const noexcept { return budget_; }

 private:
  Matrix x_;
  Matrix y_;
  PowerBudget budget_;
  std::optional<Vector> stamp_;
  EigenPair cached_;
  std::size_t recomputations_ = 0;
};

/// Absolute cosine between `update` and the principal Hessian eigenvector
/// at theta.
template <DifferentiableModel M>
double alignment(AlignmentProbe& probe, const M& model, const Vector& theta, const Vector& update) {
  detail::require(update.norm() > 0.0, "alignment: update vector is zero");
  return abs_cosine(probe.principal(model, theta).vector, update);
}

}  // namespace lga

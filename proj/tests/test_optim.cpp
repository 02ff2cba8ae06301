#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "lga/optim.hpp"
#include "oracles.hpp"

using namespace lga;

TEST(Adam, FirstStepIsSignedLearningRate) {
  Rng rng(1);
  const Vector g = rng.normal_vector(20) * 10.0;
  const Vector p = rng.normal_vector(20);
  const double lr = 1e-2;
  auto [next, st] = adam_update(make_adam_state(20), p, g, lr);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double expected = -lr * (g[i] > 0 ? 1.0 : -1.0);
    EXPECT_NEAR(next[i] - p[i], expected, 2 * lr * 1e-8 / std::abs(g[i]) + 1e-15);
  }
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, ZeroGradientNeverMoves) {
  Vector p(3);
  p << 1.0, -2.0, 3.0;
  AdamState st = make_adam_state(3);
  Vector cur = p;
  for (int i = 0; i < 100; ++i) std::tie(cur, st) = adam_update(std::move(st), cur, Vector::Zero(3), 0.1);
  EXPECT_EQ(cur, p);
}

// Scalar re-derivation of the update rule on f(x) = (x - 3)^2 / 2.
TEST(Adam, QuadraticMatchesScalarSimulation) {
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double x = -2.0, m = 0.0, v = 0.0;
  Vector p = Vector::Constant(1, -2.0);
  AdamState st = make_adam_state(1);
  for (int t = 1; t <= 10000; ++t) {
    const double g = x - 3.0;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    x -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    std::tie(p, st) = adam_update(std::move(st), p, Vector::Constant(1, p[0] - 3.0), lr);
  }
  EXPECT_NEAR(p[0], x, 1e-12);
  EXPECT_NEAR(p[0], 3.0, 1e-4);
}

TEST(Adam, RejectsBadInput) {
  EXPECT_THROW(adam_update(make_adam_state(2), Vector::Zero(2), Vector::Zero(3), 0.1), InvalidArgument);
  EXPECT_THROW(adam_update(make_adam_state(2), Vector::Zero(2), Vector::Zero(2), 0.0), InvalidArgument);
  Vector g = Vector::Zero(2);
  g[1] = std::nan("");
  EXPECT_THROW(adam_update(make_adam_state(2), Vector::Zero(2), g, 0.1), NumericalError);
}

TEST(RowAdam, TouchedRowsMatchDenseAdam) {
  Rng rng(2);
  Matrix w = rng.normal_matrix(4, 3);
  const Matrix w0 = w;
  RowAdamState st = make_row_adam_state(4, 3);
  AdamState dense = make_adam_state(3);
  Vector row1 = w.row(1).transpose();
  for (int t = 0; t < 5; ++t) {
    const Matrix g = rng.normal_matrix(1, 3);
    const std::array<std::size_t, 1> rows{1};
    row_adam_update(st, w, rows, g, 0.05);
    std::tie(row1, dense) = adam_update(std::move(dense), row1, Vector(g.row(0).transpose()), 0.05);
  }
  EXPECT_LE((w.row(1).transpose() - row1).norm(), 1e-15);
  EXPECT_EQ(w.row(0), w0.row(0));
  EXPECT_EQ(w.row(2), w0.row(2));
  EXPECT_EQ(st.steps[1], 5u);
  EXPECT_EQ(st.steps[0], 0u);
}

TEST(Ema, WarmStartAndConstantStream) {
  EmaState e{0.9, {}, false};
  Vector x(2);
  x << 1.5, -2.0;
  e = ema_update(std::move(e), x);
  EXPECT_EQ(e.value, x);
  for (int i = 0; i < 50; ++i) e = ema_update(std::move(e), x);
  EXPECT_LE((e.value - x).norm(), 1e-15);
}

TEST(Ema, AlternatingStreamConvergesToGeometricLimit) {
  // For x = 0, 1, 0, 1, ... with decay r, the value after an observation of 1
  // tends to 1/(1 + r) and after 0 to r/(1 + r).
  const double r = 0.9;
  EmaState e{r, {}, false};
  for (int i = 0; i < 401; ++i) e = ema_update(std::move(e), Vector::Constant(1, i % 2));
  EXPECT_NEAR(e.value[0], r / (1 + r), 1e-6);
  e = ema_update(std::move(e), Vector::Constant(1, 1.0));
  EXPECT_NEAR(e.value[0], 1 / (1 + r), 1e-6);
  EXPECT_NEAR(0.5 * (r / (1 + r) + 1 / (1 + r)), 0.5, 1e-15);
}

TEST(Ema, RejectsBadDecay) {
  EXPECT_THROW(ema_update(EmaState{1.0, {}, false}, Vector::Zero(1)), InvalidArgument);
}

TEST(NormalizedDistance, ZeroResidual) {
  const auto nd = normalized_sq_dist(Vector::Zero(4), NormalizerState{});
  EXPECT_EQ(nd.dist, 0.0);
  EXPECT_EQ(nd.backcoef.norm(), 0.0);
}

TEST(NormalizedDistance, SteadyStateCoordinateContributesAboutOne) {
  Vector r(2);
  r << 2.0, 0.0;
  const auto nd = normalized_sq_dist(r, NormalizerState{1e-3, EmaState{0.999, {}, false}});
  EXPECT_EQ(nd.state.ema_v4.value[0], 16.0);
  EXPECT_NEAR(nd.dist, 4.0 / (1e-3 + 4.0), 1e-15);
}

TEST(NormalizedDistance, UnitContributionWithoutEpsilon) {
  Rng rng(3);
  Vector r = rng.normal_vector(10);
  r[3] = 0.0;
  r[7] = 0.0;
  const auto nd = normalized_sq_dist(r, NormalizerState{0.0, EmaState{0.999, {}, false}});
  EXPECT_NEAR(nd.dist, 8.0, 1e-12);
}

TEST(NormalizedDistance, BackcoefMatchesFrozenDenominatorDifferences) {
  Rng rng(4);
  const Vector r0 = rng.normal_vector(6);
  NormalizerState st{1e-3, EmaState{0.9, {}, false}};
  st = normalized_sq_dist(rng.normal_vector(6), st).state;
  const auto nd = normalized_sq_dist(r0, st);
  const Vector denom = 1e-3 + nd.state.ema_v4.value.array().sqrt();
  auto f = [&](const Vector& r) { return (r.array().square() / denom.array()).sum(); };
  EXPECT_LE(oracle::rel_err(nd.backcoef, oracle::fd_gradient(f, r0)), 1e-7);
}

TEST(NormalizedDistance, ScaleInvariantWithoutEpsilon) {
  Rng rng(5);
  const Vector r1 = rng.normal_vector(8), r2 = rng.normal_vector(8);
  Vector s(8);
  for (Eigen::Index i = 0; i < 8; ++i) s[i] = std::exp(3.0 * rng.normal());
  NormalizerState a{0.0, EmaState{0.9, {}, false}}, b = a;
  a = normalized_sq_dist(r1, a).state;
  b = normalized_sq_dist(Vector(s.cwiseProduct(r1)), b).state;
  const double da = normalized_sq_dist(r2, a).dist;
  const double db = normalized_sq_dist(Vector(s.cwiseProduct(r2)), b).dist;
  EXPECT_NEAR(da, db, 1e-12 * std::max(1.0, da));
}

TEST(NormalizedDistance, NonFiniteResidualThrows) {
  Vector r = Vector::Zero(2);
  r[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(normalized_sq_dist(r, NormalizerState{}), NumericalError);
}

TEST(Schedule, ConstantAndRamp) {
  EXPECT_EQ(schedule_T({ScheduleKind::kConstant, 1.0, 0}, 17), 1.0);
  const ScheduleConfig ramp{ScheduleKind::kLinearRamp, 2.0, 100};
  EXPECT_DOUBLE_EQ(schedule_T(ramp, 50), 1.0);
  EXPECT_EQ(schedule_T(ramp, 100), 2.0);
  EXPECT_EQ(schedule_T(ramp, 1000), 2.0);
}

#include <gtest/gtest.h>

#include "lga/ndcore.hpp"
#include "oracles.hpp"

using namespace lga;

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsAreIndependentOfParentState) {
  Rng a(7);
  const Rng s1 = a.substream("x");
  a.next_u64();
  Rng s2 = a.substream("x");
  Rng s1c = s1;
  EXPECT_EQ(s1c.next_u64(), s2.next_u64());
  EXPECT_NE(Rng(7).substream("x").next_u64(), Rng(7).substream("y").next_u64());
  EXPECT_NE(Rng(7).substream(std::uint64_t{0}).next_u64(), Rng(7).substream(std::uint64_t{1}).next_u64());
}

TEST(UnitSphere, OneDimensionIsPlusOrMinusOne) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vector v = sample_unit_sphere(rng, 1);
    EXPECT_EQ(std::abs(v[0]), 1.0);
  }
}

TEST(UnitSphere, NormIsOne) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(sample_unit_sphere(rng, 50).norm(), 1.0, 1e-12);
}

TEST(UnitSphere, MeanOfManyDrawsVanishes) {
  Rng rng(3);
  const int n = 100000;
  Vector mean = Vector::Zero(2);
  for (int i = 0; i < n; ++i) mean += sample_unit_sphere(rng, 2);
  mean /= n;
  EXPECT_LT(mean.norm(), 0.02);
}

TEST(UnitSphere, RejectsZeroDimension) {
  Rng rng(0);
  EXPECT_THROW(sample_unit_sphere(rng, 0), InvalidArgument);
}

TEST(OrthonormalColumns, OneByOne) {
  Rng rng(4);
  const Matrix u = orthonormal_columns(rng, 1, 1);
  EXPECT_EQ(std::abs(u(0, 0)), 1.0);
}

TEST(OrthonormalColumns, GramIsIdentity) {
  Rng rng(5);
  const Matrix u = orthonormal_columns(rng, 5, 3);
  EXPECT_LE((u.transpose() * u - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OrthonormalColumns, DifferentSeedsDiffer) {
  Rng a(6), b(7);
  const Matrix ua = orthonormal_columns(a, 100, 10);
  const Matrix ub = orthonormal_columns(b, 100, 10);
  EXPECT_GT((ua - ub).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE((ua.transpose() * ua - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((ub.transpose() * ub - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OrthonormalColumns, RejectsWideShape) {
  Rng rng(0);
  EXPECT_THROW(orthonormal_columns(rng, 2, 3), InvalidArgument);
}

TEST(PowerIteration, DiagonalOperator) {
  Rng rng(8);
  auto apply = [](const Vector& v) {
    Vector out = v;
    out[0] *= 3.0;
    return out;
  };
  const auto ep = power_iteration(apply, 2, 1000, 1e-12, rng);
  EXPECT_NEAR(ep.value, 3.0, 1e-9);
  EXPECT_NEAR(ep.vector[0], 1.0, 1e-6);
  EXPECT_NEAR(ep.vector[1], 0.0, 1e-6);
}

TEST(PowerIteration, IdentityEigenvalue) {
  Rng rng(9);
  const auto ep = power_iteration([](const Vector& v) { return v; }, 4, 100, 1e-10, rng);
  EXPECT_NEAR(ep.value, 1.0, 1e-12);
  EXPECT_NEAR(ep.vector.norm(), 1.0, 1e-12);
}

TEST(PowerIteration, MatchesJacobiOnRandomSymmetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    Eigen::MatrixXd g = rng.normal_matrix(8, 8);
    // Shift the spectrum so one eigenvalue clearly dominates.
    Eigen::MatrixXd a = g + g.transpose();
    const Vector d = rng.normal_vector(8);
    a += 10.0 * d * d.transpose() / d.squaredNorm();
    const auto [val, vec] = oracle::dominant_eigen(a);
    auto apply = [&](const Vector& v) { return Vector(a * v); };
    const auto ep = power_iteration(apply, 8, 10000, 1e-12, rng);
    EXPECT_NEAR(ep.value, val, 1e-6 * std::max(1.0, std::abs(val))) << "seed " << seed;
    EXPECT_GE(std::abs(ep.vector.dot(vec)), 1.0 - 1e-6) << "seed " << seed;
  }
}

TEST(PowerIteration, NonFiniteOperatorThrows) {
  Rng rng(10);
  auto apply = [](const Vector& v) { return Vector(v * std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(power_iteration(apply, 3, 10, 1e-6, rng), NumericalError);
}

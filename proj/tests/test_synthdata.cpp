#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lga/synthdata.hpp"

using namespace lga;

namespace {

double norm_of_row(const Dataset& ds, std::size_t i) { return ds.x.row(static_cast<Eigen::Index>(i)).norm(); }

}  // namespace

TEST(Rings, OuterAndInnerBands) {
  Rng rng(1);
  const Dataset ds = sample_rings(rng, 50, 5000, true, "t");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double s = norm_of_row(ds, i);
    if (ds.classes[i] == 5) {
      EXPECT_GE(s, 4.0 - 1e-12);
      EXPECT_LE(s, 4.25 + 1e-12);
    } else if (ds.classes[i] == 1) {
      EXPECT_GE(s, 0.75 - 1e-12);
      EXPECT_LE(s, 1.0 + 1e-12);
    }
  }
}

TEST(Rings, MiddleClassSplitsEvenlyAcrossItsTwoBands) {
  Rng rng(2);
  const int n = 10000;
  int low = 0;
  for (int i = 0; i < n; ++i) {
    const double s = ring_radius(3, rng.uniform());
    const bool in_low = s >= 2.0 && s <= 2.25;
    const bool in_high = s >= 2.75 && s <= 3.0;
    ASSERT_TRUE(in_low || in_high) << s;
    low += in_low ? 1 : 0;
  }
  EXPECT_LE(std::abs(low - n / 2), 3.0 * std::sqrt(n * 0.25));
}

TEST(Rings, RadiusIsUniformWithinEachBand) {
  // Kolmogorov-Smirnov against the uniform law on the union [1, 1.25) u [1.75, 2).
  Rng rng(3);
  const int n = 20000;
  std::vector<double> u(n);
  for (auto& x : u) {
    const double s = ring_radius(2, rng.uniform());
    x = s < 1.5 ? (s - 1.0) / 0.5 : (s - 1.5) / 0.5;
  }
  std::sort(u.begin(), u.end());
  double d = 0;
  for (int i = 0; i < n; ++i) d = std::max({d, std::abs(u[i] - double(i) / n), std::abs(u[i] - double(i + 1) / n)});
  EXPECT_LT(d, 1.63 / std::sqrt(n));  // 1% critical value
}

TEST(Rings, BandsDescribeRadiusSupport) {
  EXPECT_EQ(ring_bands(1).size(), 1u);
  EXPECT_EQ(ring_bands(5).front().first, 4.0);
  const auto b3 = ring_bands(3);
  ASSERT_EQ(b3.size(), 2u);
  EXPECT_EQ(b3[0], (std::pair<double, double>{2.0, 2.25}));
  EXPECT_EQ(b3[1], (std::pair<double, double>{2.75, 3.0}));
  EXPECT_THROW(ring_bands(0), InvalidArgument);
  EXPECT_THROW(ring_radius(6, 0.5), InvalidArgument);
}

TEST(Rings, ClassCountsAreMultinomial) {
  Rng rng(4);
  const Dataset ds = sample_rings(rng, 5, 5000, true, "t");
  const auto counts = split_counts(ds);
  const double sigma = std::sqrt(5000 * 0.2 * 0.8);
  for (auto c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - 1000.0), 3 * sigma);
}

TEST(Rings, SinglePointCounts) {
  Rng rng(5);
  const auto counts = split_counts(sample_rings(rng, 3, 1, true, "t"));
  EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), 1u);
  EXPECT_EQ(*std::max_element(counts.begin(), counts.end()), 1u);
  Dataset empty;
  EXPECT_THROW(split_counts(empty), InvalidArgument);
}

TEST(Rings, GeneratedSplitsHaveConfiguredSizes) {
  RingsConfig cfg;
  cfg.dim = 7;
  cfg.n_labeled = 40;
  cfg.unlabeled_multiplier = 3;
  cfg.n_test = 25;
  cfg.seed = 9;
  const RingsData d = gen_rings(cfg);
  EXPECT_EQ(d.labeled.size(), 40u);
  EXPECT_EQ(d.unlabeled.size(), 120u);
  EXPECT_EQ(d.test.size(), 25u);
  EXPECT_TRUE(d.labeled.labeled());
  EXPECT_FALSE(d.unlabeled.labeled());
  EXPECT_EQ(d.labeled.x.cols(), 7);
  for (Eigen::Index i = 0; i < 40; ++i) EXPECT_EQ((*d.labeled.y)(i, d.labeled.classes[i] - 1), 1.0);
}

TEST(Rings, SameSeedSameData) {
  RingsConfig cfg;
  cfg.dim = 4;
  cfg.n_labeled = 10;
  cfg.n_test = 10;
  cfg.seed = 3;
  EXPECT_EQ(gen_rings(cfg).unlabeled.x, gen_rings(cfg).unlabeled.x);
  RingsConfig other = cfg;
  other.seed = 4;
  EXPECT_NE(gen_rings(cfg).labeled.x, gen_rings(other).labeled.x);
}

TEST(Rings, CsvDumpHasHeaderAndRows) {
  Rng rng(6);
  const Dataset ds = sample_rings(rng, 3, 4, false, "u");
  const auto path = std::filesystem::temp_directory_path() / "lga_rings_dump.csv";
  write_dataset_csv(ds, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "3,4,5");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0");
  }
  EXPECT_EQ(rows, 4);
  std::filesystem::remove(path);
}

#pragma once

// Concentric-shell classification data. Each point is a uniform direction on
// the unit sphere scaled by a class-dependent radius:
//
//   class 1:        radius in [0.75, 1)
//   class 5:        radius in [4, 4.25)
//   class 2, 3, 4:  radius in [c-1, c-0.75) or [c-0.25, c), each with prob. 1/2
//
// so neighboring classes share a radial band boundary at every integer.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lga/error.hpp"
#include "lga/ndcore.hpp"

namespace lga {

inline constexpr int kRingsNumClasses = 5;

struct RingsConfig {
  std::size_t dim = 50;
  std::size_t n_labeled = 1000;
  std::size_t unlabeled_multiplier = 5;
  std::size_t n_test = 10000;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix x;
  std::optional<Matrix> y;  // one-hot rows; empty for unlabeled data
  /// Class of every row in 1..k. For unlabeled data this is kept for
  /// diagnostics only and never reaches training.
  std::vector<int> classes;
  std::string split;

  std::size_t size() const noexcept { return static_cast<std::size_t>(x.rows()); }
  bool labeled() const noexcept { return y.has_value(); }
};

struct RingsData {
  Dataset labeled;
  Dataset unlabeled;
  Dataset test;
};

/// Radius for class c in 1..5 given u uniform on [0, 1).
inline double ring_radius(int c, double u) {
  detail::require(c >= 1 && c <= kRingsNumClasses, "ring_radius: class out of range");
  if (c == 1) return 0.75 + 0.25 * u;
  if (c == kRingsNumClasses) return 4.0 + 0.25 * u;
  const double t = 0.5 * u;  // position within the union, total length 0.5
  return (c - 1) + (t < 0.25 ? t : t + 0.5);
}

/// Allowed radial bands for class c, as half-open [lo, hi) pairs.
inline std::vector<std::pair<double, double>> ring_bands(int c) {
  detail::require(c >= 1 && c <= kRingsNumClasses, "ring_bands: class out of range");
  if (c == 1) return {{0.75, 1.0}};
  if (c == kRingsNumClasses) return {{4.0, 4.25}};
  return {{c - 1.0, c - 0.75}, {c - 0.25, static_cast<double>(c)}};
}

inline Matrix one_hot(const std::vector<int>& classes, int num_classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), num_classes);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    detail::require(classes[i] >= 1 && classes[i] <= num_classes, "one_hot: class out of range");
    y(static_cast<Eigen::Index>(i), classes[i] - 1) = 1.0;
  }
  return y;
}

/// Draws n points: direction, then class, then radius.
inline Dataset sample_rings(Rng& rng, std::size_t dim, std::size_t n, bool keep_labels,
                            std::string split) {
  detail::require(dim >= 1, "sample_rings: dim must be >= 1");
  Dataset ds;
  ds.split = std::move(split);
  ds.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  ds.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = sample_unit_sphere(rng, dim);
    const int c = 1 + static_cast<int>(rng.below(kRingsNumClasses));
    const double s = ring_radius(c, rng.uniform());
    ds.x.row(static_cast<Eigen::Index>(i)) = (v * s).transpose();
    ds.classes[i] = c;
  }
  if (keep_labels) ds.y = one_hot(ds.classes, kRingsNumClasses);
  return ds;
}

inline RingsData gen_rings(const RingsConfig& cfg) {
  detail::require(cfg.dim >= 1, "gen_rings: dim must be >= 1");
  detail::require(cfg.n_labeled >= 1 && cfg.unlabeled_multiplier >= 1 && cfg.n_test >= 1,
                  "gen_rings: counts must be >= 1");
  const Rng root(cfg.seed);
  Rng lab = root.substream("rings/labeled");
  Rng unl = root.substream("rings/unlabeled");
  Rng tst = root.substream("rings/test");
  return {sample_rings(lab, cfg.dim, cfg.n_labeled, true, "labeled"),
          sample_rings(unl, cfg.dim, cfg.n_labeled * cfg.unlabeled_multiplier, false, "unlabeled"),
          sample_rings(tst, cfg.dim, cfg.n_test, true, "test")};
}

/// Rows [0, n) of a dataset.
inline Dataset head(const Dataset& ds, std::size_t n) {
  n = std::min(n, ds.size());
  Dataset out;
  out.split = ds.split;
  out.x = ds.x.topRows(static_cast<Eigen::Index>(n));
  if (ds.y) out.y = ds.y->topRows(static_cast<Eigen::Index>(n));
  out.classes.assign(ds.classes.begin(), ds.classes.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

/// Per-class counts, index 0 holding class 1.
inline std::vector<std::size_t> split_counts(const Dataset& ds, int num_classes = kRingsNumClasses) {
  detail::require(ds.size() > 0, "split_counts: empty dataset");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int c : ds.classes) {
    detail::require(c >= 1 && c <= num_classes, "split_counts: class out of range");
    ++counts[static_cast<std::size_t>(c - 1)];
  }
  return counts;
}

/// Writes a dataset as CSV: first line "d,n,k", then one row per point with
/// d coordinates and the class (0 when the split is unlabeled).
inline void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                              int num_classes = kRingsNumClasses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  out << ds.x.cols() << ',' << ds.x.rows() << ',' << num_classes << '\n';
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.x.cols(); ++j) out << ds.x(i, j) << ',';
    out << (ds.labeled() ? ds.classes[static_cast<std::size_t>(i)] : 0) << '\n';
  }
}

}  // namespace lga

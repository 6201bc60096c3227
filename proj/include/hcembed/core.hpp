#pragma once

// Shared domain types: dense matrices, datasets with flat/level labels,
// binary merge trees and the leaf layout used to attribute pairs to LCAs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hcembed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad caller-supplied argument (range, shape, non-finite input).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed tree or hierarchy.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A score whose normalizer is zero (e.g. purity with no same-class pair).
class UndefinedScoreError : public Error {
 public:
  using Error::Error;
};

/// Row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  /// Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> idx) const;

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);

/// n x h integer labels; column 0 is the coarsest level, column h-1 the finest.
struct LevelLabels {
  std::size_t n = 0;
  std::size_t levels = 0;
  std::vector<int> values;  // row-major

  int at(std::size_t i, std::size_t level) const { return values[i * levels + level]; }
  std::vector<int> column(std::size_t level) const;
  LevelLabels select_rows(std::span<const std::size_t> idx) const;

  /// Throws ArgumentError unless equal labels at a level imply equal labels
  /// at every coarser level.
  void check_refinement() const;

  friend bool operator==(const LevelLabels&, const LevelLabels&) = default;
};

struct Dataset {
  Matrix points;
  std::optional<std::vector<int>> flat_labels;
  std::optional<LevelLabels> level_labels;

  std::size_t size() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }

  /// Throws ArgumentError on empty/non-finite points, label length mismatch
  /// or a level labeling that is not a refinement chain.
  void validate() const;

  Dataset subset(std::span<const std::size_t> idx) const;
};

/// One agglomeration step. Node ids 0..n-1 are leaves; merge t creates n+t.
struct Merge {
  std::size_t left = 0;
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

class Dendrogram {
 public:
  Dendrogram() = default;

  /// Validates the merge list; throws StructuralError for dangling or
  /// doubly-consumed ids and for inconsistent sizes.
  Dendrogram(std::size_t n_leaves, std::vector<Merge> merges);

  std::size_t n_leaves() const { return n_leaves_; }
  std::size_t node_count() const { return 2 * n_leaves_ - 1; }
  std::size_t root() const { return node_count() - 1; }
  const std::vector<Merge>& merges() const { return merges_; }
  const Merge& merge_of(std::size_t node) const { return merges_[node - n_leaves_]; }
  bool is_leaf(std::size_t node) const { return node < n_leaves_; }
  std::size_t size_of(std::size_t node) const {
    return is_leaf(node) ? 1 : merge_of(node).size;
  }

  /// True when heights never decrease along the merge order.
  bool is_monotone() const;

  friend bool operator==(const Dendrogram&, const Dendrogram&) = default;

 private:
  std::size_t n_leaves_ = 0;
  std::vector<Merge> merges_;
};

/// Leaves laid out so that every subtree occupies a contiguous range.
/// For internal node v the leaf pairs whose LCA is v are exactly
/// left_leaves(v) x right_leaves(v).
class LeafLayout {
 public:
  explicit LeafLayout(const Dendrogram& tree);

  std::span<const std::size_t> leaves(std::size_t node) const;
  std::span<const std::size_t> left_leaves(std::size_t internal) const;
  std::span<const std::size_t> right_leaves(std::size_t internal) const;
  std::span<const std::size_t> order() const { return order_; }

 private:
  std::size_t n_leaves_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> begin_;  // per node
  std::vector<std::size_t> end_;    // per node
  std::vector<std::size_t> split_;  // per internal node: end of left child range
};

/// Leaf sets of the children of every internal node; see LeafLayout.
LeafLayout lca_leaf_sets(const Dendrogram& tree);

/// Flat labels from undoing the last k-1 merges. Labels are 0..k-1 in order
/// of the smallest leaf id of each cluster.
std::vector<int> cut(const Dendrogram& tree, std::size_t k);

/// Relabels arbitrary integer labels to 0..K-1 by first occurrence.
std::vector<int> dense_labels(std::span<const int> labels, std::size_t* n_classes = nullptr);

}  // namespace hcembed

#pragma once

// Exact hierarchical clustering objectives over unordered pairs i < j.
//
// Under an ordered-pair convention Dasgupta cost and Moseley-Wang double;
// dendrogram purity and the MW / opt ratio do not change.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "hcembed/core.hpp"

namespace hcembed {

/// How level labels turn into pair similarity. With l* the deepest level two
/// points share (0 if none):
///   summed   w = sum_l 2^{l-1} [same label at l] = 2^{l*} - 1
///   deepest  w = 2^{l*-1} (0 when l* = 0)
enum class LevelWeightMode { summed, deepest };

class WeightFunction {
 public:
  /// Symmetric non-negative n x n matrix with zero diagonal.
  static WeightFunction explicit_matrix(Matrix weights);
  /// Throws ArgumentError if the labels are not a refinement chain.
  static WeightFunction from_levels(LevelLabels labels, LevelWeightMode mode = LevelWeightMode::summed);

  std::size_t size() const;
  double operator()(std::size_t i, std::size_t j) const;
  /// Sum over unordered pairs i < j.
  double total() const;

  bool is_level_form() const { return std::holds_alternative<Levels>(repr_); }
  const LevelLabels* levels() const;
  /// Coefficient of the level-l indicator (0-based l, coarsest first).
  double level_coefficient(std::size_t level) const;

 private:
  struct Levels {
    LevelLabels labels;
    LevelWeightMode mode;
  };
  explicit WeightFunction(Matrix w) : repr_(std::move(w)) {}
  explicit WeightFunction(Levels l) : repr_(std::move(l)) {}
  std::variant<Matrix, Levels> repr_;
};

WeightFunction level_weights(const LevelLabels& labels, LevelWeightMode mode = LevelWeightMode::summed);

struct Score {
  double value = 0.0;
  double normalizer = 0.0;
};

/// Average, over same-class pairs, of the fraction of the pair's LCA subtree
/// that shares their class. normalizer = number of same-class pairs.
/// Throws UndefinedScoreError when there is no same-class pair.
Score dendrogram_purity(const Dendrogram& tree, std::span<const int> labels);

/// Sum of w_ij over pairs whose LCA is each internal node, indexed by merge.
std::vector<double> cross_weights(const Dendrogram& tree, const WeightFunction& weights);

/// sum_{i<j} w_ij |leaves(LCA(i,j))|
double dasgupta_cost(const Dendrogram& tree, const WeightFunction& weights);

/// n sum_{i<j} w_ij - dasgupta_cost
double moseley_wang(const Dendrogram& tree, const WeightFunction& weights);

/// Ground-truth-aligned tree: balanced binary trees inside each finest
/// class, then balanced merges of sibling groups level by level up to the
/// root. Heights are the merge stage (0 inside finest classes).
Dendrogram canonical_tree(const LevelLabels& labels);

/// MW of canonical_tree under the level weights.
double mw_opt(const LevelLabels& labels, LevelWeightMode mode = LevelWeightMode::summed);
/// Flat labels: unit weight inside a class, zero across.
double mw_opt(std::span<const int> labels);

/// Treats flat labels as a one-level hierarchy.
LevelLabels flat_as_levels(std::span<const int> labels);

/// Best one-to-one matching accuracy between two labelings (Hungarian).
double matching_accuracy(std::span<const int> predicted, std::span<const int> truth);

/// True when the two labelings induce the same partition.
bool same_partition(std::span<const int> a, std::span<const int> b);

}  // namespace hcembed

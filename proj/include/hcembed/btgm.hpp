#pragma once

// Binary tree Gaussian mixtures: planted-hierarchy mean construction, the
// cyclic shift perturbation, sampling, and separation-condition checkers for
// exact recovery by Ward's method.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hcembed/core.hpp"

namespace hcembed {

struct BtgmSpec {
  int height = 3;          // tree height h, k = 2^h leaves
  double margin = 8.0;     // m
  double expansion = 2.0;  // alpha
  std::size_t dim = 100;   // ambient dimension d >= h

  std::size_t components() const { return std::size_t{1} << height; }
  void validate() const;
};

struct Component {
  double weight = 0.0;
  std::vector<double> mean;
  double stddev = 1.0;
};

/// Spherical Gaussian mixture; weights must sum to one.
struct MixtureSpec {
  std::vector<Component> components;

  std::size_t k() const { return components.size(); }
  std::size_t dim() const { return components.empty() ? 0 : components.front().mean.size(); }
  /// max over l != t of w_l / w_t (1 for a single component).
  double weight_ratio() const;
  double min_weight() const;
  Matrix means() const;
  void validate() const;

  /// Equal weights, shared stddev.
  static MixtureSpec uniform(const Matrix& means, double stddev = 1.0);
};

/// Nested partitions of component indices, finest level first: levels[0]
/// refines levels[1], and so on. Each level partitions [0, k).
struct Hierarchy {
  std::vector<std::vector<std::vector<std::size_t>>> levels;

  /// Throws StructuralError unless every level partitions [0, k) and each
  /// level refines the next.
  void validate(std::size_t k) const;

  /// Levels of a complete binary tree of the given height: singletons, then
  /// sibling pairs, ..., up to the two root subtrees.
  static Hierarchy binary_tree(int height);
};

/// 2^h x d means: coordinate j (1-based, j <= h) of leaf i is
/// (-1)^{b_j} * m * alpha^{h-j}, where b_j is the j-th most significant of
/// the h bits of i; coordinates past h are zero.
Matrix btgm_means(const BtgmSpec& spec);

/// Cyclically right-rotates the first `count` rows by `rotation` coordinates.
Matrix shift_means(const Matrix& means, std::size_t count, std::size_t rotation);

/// Level labels of a BTGM leaf: level l (1-based) label is the top l bits.
LevelLabels btgm_level_labels(std::span<const int> components, int height);

/// n i.i.d. draws: component ~ Cat(w), point ~ N(mu, sigma^2 I). Component
/// choice and coordinates of point i come from their own counter-based
/// streams, so results do not depend on evaluation order.
/// When `btgm_height` is set, level labels are attached.
Dataset sample(const MixtureSpec& mixture, std::size_t n, std::uint64_t seed,
               std::optional<int> btgm_height = std::nullopt);

/// Fixed number of points per component, grouped by component.
Dataset sample_counts(const MixtureSpec& mixture, std::span<const std::size_t> counts,
                      std::uint64_t seed, std::optional<int> btgm_height = std::nullopt);

struct RecoveryConstants {
  double c = 17.0;
  double c0 = 16.0;
  double c1 = 8.0;
  /// Use (D_II^+ + D_JJ^+) instead of max{D_II^+, D_JJ^+} in the hierarchy
  /// condition.
  bool sum_form = false;
};

/// One evaluated inequality lhs >= rhs.
struct Condition {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool passed = false;
  std::string binding;  // which pair/level attains the tightest slack

  double margin() const { return lhs - rhs; }
};

struct PairBounds {
  std::size_t i = 0;
  std::size_t j = 0;
  double mean_distance = 0.0;
  double upper = 0.0;  // D_ij^+
  double lower = 0.0;  // D_ij^-
};

struct LevelReport {
  std::size_t level = 0;  // index into Hierarchy::levels
  double weight_ratio = 1.0;  // nu_l
  std::vector<double> within_upper;  // D_{I,I}^+ per set
  double min_ratio = 0.0;  // min over I != J of D_{I,J}^- / (c1 sqrt(nu_l) rhs-term)
  bool passed = false;
};

struct SeparationReport {
  std::vector<double> radius;  // S_i
  std::vector<PairBounds> pairs;
  std::vector<LevelReport> levels;
  std::vector<Condition> conditions;
  std::size_t tightest_i = 0;
  std::size_t tightest_j = 0;

  bool passed() const;
};

/// Radius bound S = sigma (sqrt(d) + 2 sqrt(ln n)).
double radius_bound(double stddev, std::size_t dim, std::size_t n);

/// Pairwise separation ||mu_i - mu_j|| >= c sqrt(nu) (sigma_i + sigma_j)
/// (sqrt d + sqrt ln n) for all i != j, and n >= c0 ln k / w_min.
SeparationReport check_theorem1(const MixtureSpec& mixture, std::size_t n,
                                const RecoveryConstants& constants = {});

/// Per-level condition D_{I,J}^- >= c1 sqrt(nu_l) max{D_{I,I}^+, D_{J,J}^+}
/// for all I != J in each level.
SeparationReport check_theorem2(const MixtureSpec& mixture, const Hierarchy& hierarchy,
                                std::size_t n, const RecoveryConstants& constants = {});

struct CorollaryReport {
  double c2 = 0.0;  // 2(2c1+1)/(alpha-c1); NaN when alpha <= c1
  std::vector<Condition> conditions;
  bool passed() const;
};

/// Closed-form sufficient conditions for full-hierarchy recovery on a BTGM.
CorollaryReport check_corollary(const BtgmSpec& spec, std::size_t n,
                                const RecoveryConstants& constants = {});

}  // namespace hcembed

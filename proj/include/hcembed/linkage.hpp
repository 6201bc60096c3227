#pragma once

// Agglomerative clustering over Euclidean points.
//
// Heights are the raw merge cost of each method:
//   ward      increase in error sum of squares, |a||b|/(|a|+|b|) ||mu_a - mu_b||^2
//   single    minimum point distance
//   complete  maximum point distance
//   average   mean point distance
//   centroid  distance between centroids (not monotone)
//
// Ties in merge cost are broken by the lexicographically smallest
// (smaller node id, larger node id) pair. The chain-based single, complete
// and average paths may resolve exact ties differently (an equally valid
// tree with the same heights); on tie-free input every path agrees.

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "hcembed/core.hpp"

namespace hcembed {

enum class LinkageMethod { ward, single, complete, average, centroid };

inline constexpr std::array kAllLinkageMethods = {
    LinkageMethod::ward, LinkageMethod::single, LinkageMethod::complete,
    LinkageMethod::average, LinkageMethod::centroid};

std::string_view to_string(LinkageMethod method);
/// Throws ArgumentError for unknown names.
LinkageMethod parse_linkage(std::string_view name);
/// Whether heights are guaranteed non-decreasing.
bool is_monotone_method(LinkageMethod method);

struct ClusterStats {
  std::size_t size = 0;
  std::vector<double> centroid;
  bool active = true;

  static ClusterStats singleton(std::span<const double> point);
  /// Size-weighted centroid (|a| mu_a + |b| mu_b) / (|a| + |b|).
  static ClusterStats merged(const ClusterStats& a, const ClusterStats& b);
};

/// Increase in error sum of squares caused by merging a and b.
double ward_delta(const ClusterStats& a, const ClusterStats& b);

/// Lance-Williams recurrence: dissimilarity between cluster k and the union
/// of a and b, given d(k,a), d(k,b), d(a,b) and the three sizes. For ward the
/// dissimilarities are ESS increases; for centroid they are squared centroid
/// distances; otherwise plain distances.
double lance_williams(LinkageMethod method, double d_ka, double d_kb, double d_ab,
                      std::size_t n_a, std::size_t n_b, std::size_t n_k);

/// Exact agglomerative clustering. Ward runs the nearest-neighbor chain over
/// centroid/size state; single, complete and average run the chain over a
/// condensed distance matrix with Lance-Williams updates; centroid uses a
/// cached nearest-neighbor search that merges in global-minimum order.
/// Throws ArgumentError for fewer than two points or non-finite input.
Dendrogram cluster(const Matrix& points, LinkageMethod method);

inline constexpr std::size_t kNaiveLinkageCap = 512;

/// O(n^3) reference: repeatedly merges the globally cheapest active pair.
/// Single/complete/average costs are evaluated from their definitions over
/// member points. Throws ArgumentError when n exceeds `cap`.
Dendrogram cluster_naive(const Matrix& points, LinkageMethod method,
                         std::size_t cap = kNaiveLinkageCap);

}  // namespace hcembed

#include "hcembed/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace hcembed {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ArgumentError("matrix data has " + std::to_string(data_.size()) +
                        " entries, expected " + std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

std::vector<int> LevelLabels::column(std::size_t level) const {
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i, level);
  return out;
}

LevelLabels LevelLabels::select_rows(std::span<const std::size_t> idx) const {
  LevelLabels out{idx.size(), levels, {}};
  out.values.reserve(idx.size() * levels);
  for (std::size_t i : idx) {
    for (std::size_t l = 0; l < levels; ++l) out.values.push_back(at(i, l));
  }
  return out;
}

void LevelLabels::check_refinement() const {
  if (values.size() != n * levels) throw ArgumentError("level label matrix has wrong size");
  // Each finer label must map to a single coarser label.
  for (std::size_t l = 1; l < levels; ++l) {
    std::unordered_map<int, int> parent;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = parent.try_emplace(at(i, l), at(i, l - 1));
      if (!fresh && it->second != at(i, l - 1)) {
        throw ArgumentError("level " + std::to_string(l + 1) + " label " +
                            std::to_string(at(i, l)) + " does not refine level " +
                            std::to_string(l));
      }
    }
  }
}

void Dataset::validate() const {
  if (points.rows() == 0 || points.cols() == 0) throw ArgumentError("dataset is empty");
  if (!points.all_finite()) throw ArgumentError("dataset contains non-finite coordinates");
  if (flat_labels && flat_labels->size() != points.rows()) {
    throw ArgumentError("flat label count does not match point count");
  }
  if (level_labels) {
    if (level_labels->n != points.rows()) {
      throw ArgumentError("level label count does not match point count");
    }
    level_labels->check_refinement();
  }
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.points = points.select_rows(idx);
  if (flat_labels) {
    std::vector<int> f(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) f[i] = (*flat_labels)[idx[i]];
    out.flat_labels = std::move(f);
  }
  if (level_labels) out.level_labels = level_labels->select_rows(idx);
  return out;
}

Dendrogram::Dendrogram(std::size_t n_leaves, std::vector<Merge> merges)
    : n_leaves_(n_leaves), merges_(std::move(merges)) {
  if (n_leaves_ == 0) throw StructuralError("dendrogram needs at least one leaf");
  if (merges_.size() != n_leaves_ - 1) {
    throw StructuralError("dendrogram over " + std::to_string(n_leaves_) + " leaves has " +
                          std::to_string(merges_.size()) + " merges");
  }
  std::vector<char> consumed(node_count(), 0);
  for (std::size_t t = 0; t < merges_.size(); ++t) {
    const Merge& m = merges_[t];
    const std::size_t created = n_leaves_ + t;
    for (std::size_t child : {m.left, m.right}) {
      if (child >= created) {
        throw StructuralError("merge " + std::to_string(t) + " references node " +
                              std::to_string(child) + " before it exists");
      }
      if (consumed[child]) {
        throw StructuralError("node " + std::to_string(child) + " consumed twice");
      }
      consumed[child] = 1;
    }
    if (m.left == m.right) throw StructuralError("merge " + std::to_string(t) + " is a self-merge");
    if (m.size != size_of(m.left) + size_of(m.right)) {
      throw StructuralError("merge " + std::to_string(t) + " has inconsistent size");
    }
  }
}

bool Dendrogram::is_monotone() const {
  for (std::size_t t = 1; t < merges_.size(); ++t) {
    if (merges_[t].height < merges_[t - 1].height) return false;
  }
  return true;
}

LeafLayout::LeafLayout(const Dendrogram& tree)
    : n_leaves_(tree.n_leaves()),
      order_(tree.n_leaves()),
      begin_(tree.node_count()),
      end_(tree.node_count()),
      split_(tree.merges().size()) {
  begin_[tree.root()] = 0;
  end_[tree.root()] = n_leaves_;
  // Children always carry smaller ids than their parent.
  for (std::size_t v = tree.root() + 1; v-- > n_leaves_;) {
    const Merge& m = tree.merge_of(v);
    const std::size_t mid = begin_[v] + tree.size_of(m.left);
    begin_[m.left] = begin_[v];
    end_[m.left] = mid;
    begin_[m.right] = mid;
    end_[m.right] = end_[v];
    split_[v - n_leaves_] = mid;
  }
  for (std::size_t leaf = 0; leaf < n_leaves_; ++leaf) order_[begin_[leaf]] = leaf;
}

std::span<const std::size_t> LeafLayout::leaves(std::size_t node) const {
  return std::span<const std::size_t>(order_).subspan(begin_[node], end_[node] - begin_[node]);
}

std::span<const std::size_t> LeafLayout::left_leaves(std::size_t internal) const {
  const std::size_t b = begin_[internal];
  return std::span<const std::size_t>(order_).subspan(b, split_[internal - n_leaves_] - b);
}

std::span<const std::size_t> LeafLayout::right_leaves(std::size_t internal) const {
  const std::size_t s = split_[internal - n_leaves_];
  return std::span<const std::size_t>(order_).subspan(s, end_[internal] - s);
}

LeafLayout lca_leaf_sets(const Dendrogram& tree) { return LeafLayout(tree); }

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

std::vector<int> cut(const Dendrogram& tree, std::size_t k) {
  const std::size_t n = tree.n_leaves();
  if (k < 1 || k > n) {
    throw ArgumentError("cut: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> parent(tree.node_count());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t t = 0; t < n - k; ++t) {
    const Merge& m = tree.merges()[t];
    parent[find_root(parent, m.left)] = n + t;
    parent[find_root(parent, m.right)] = n + t;
  }
  std::vector<int> labels(n);
  std::unordered_map<std::size_t, int> label_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] =
        label_of_root.try_emplace(find_root(parent, i), static_cast<int>(label_of_root.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::vector<int> dense_labels(std::span<const int> labels, std::size_t* n_classes) {
  std::unordered_map<int, int> id;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = id.try_emplace(labels[i], static_cast<int>(id.size()));
    out[i] = it->second;
  }
  if (n_classes) *n_classes = id.size();
  return out;
}

}  // namespace hcembed

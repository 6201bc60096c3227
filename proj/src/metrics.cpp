#include "hcembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace hcembed {

namespace {

using Histogram = std::unordered_map<int, std::size_t>;

// Folds `small` into `large`, calling visit(label, count_small, count_large)
// for every label of `small` before the counts are combined.
template <class Visit>
void fold_histogram(Histogram& large, const Histogram& small, Visit&& visit) {
  for (const auto& [label, count] : small) {
    auto it = large.find(label);
    const std::size_t other = it == large.end() ? 0 : it->second;
    visit(label, count, other);
    large[label] = other + count;
  }
}

}  // namespace

WeightFunction WeightFunction::explicit_matrix(Matrix w) {
  if (w.rows() != w.cols()) throw ArgumentError("weight matrix must be square");
  for (std::size_t i = 0; i < w.rows(); ++i) {
    if (w(i, i) != 0.0) throw ArgumentError("weight matrix diagonal must be zero");
    for (std::size_t j = 0; j < w.cols(); ++j) {
      if (!(w(i, j) >= 0.0) || !std::isfinite(w(i, j))) {
        throw ArgumentError("weights must be finite and non-negative");
      }
      if (w(i, j) != w(j, i)) throw ArgumentError("weight matrix must be symmetric");
    }
  }
  return WeightFunction(std::move(w));
}

WeightFunction WeightFunction::from_levels(LevelLabels labels, LevelWeightMode mode) {
  labels.check_refinement();
  return WeightFunction(Levels{std::move(labels), mode});
}

WeightFunction level_weights(const LevelLabels& labels, LevelWeightMode mode) {
  return WeightFunction::from_levels(labels, mode);
}

std::size_t WeightFunction::size() const {
  if (const auto* m = std::get_if<Matrix>(&repr_)) return m->rows();
  return std::get<Levels>(repr_).labels.n;
}

const LevelLabels* WeightFunction::levels() const {
  const auto* l = std::get_if<Levels>(&repr_);
  return l ? &l->labels : nullptr;
}

double WeightFunction::level_coefficient(std::size_t level) const {
  const auto& l = std::get<Levels>(repr_);
  if (l.mode == LevelWeightMode::summed) return std::ldexp(1.0, static_cast<int>(level));
  // deepest: 1, 1, 2, 4, ... telescopes to 2^{l*-1}
  return level == 0 ? 1.0 : std::ldexp(1.0, static_cast<int>(level) - 1);
}

double WeightFunction::operator()(std::size_t i, std::size_t j) const {
  if (const auto* m = std::get_if<Matrix>(&repr_)) return (*m)(i, j);
  if (i == j) return 0.0;
  const auto& l = std::get<Levels>(repr_).labels;
  double w = 0.0;
  for (std::size_t lv = 0; lv < l.levels; ++lv) {
    if (l.at(i, lv) == l.at(j, lv)) w += level_coefficient(lv);
  }
  return w;
}

double WeightFunction::total() const {
  if (const auto* m = std::get_if<Matrix>(&repr_)) {
    double s = 0.0;
    for (std::size_t i = 0; i < m->rows(); ++i) {
      for (std::size_t j = i + 1; j < m->cols(); ++j) s += (*m)(i, j);
    }
    return s;
  }
  const auto& l = std::get<Levels>(repr_).labels;
  double s = 0.0;
  for (std::size_t lv = 0; lv < l.levels; ++lv) {
    Histogram h;
    for (std::size_t i = 0; i < l.n; ++i) ++h[l.at(i, lv)];
    double pairs = 0.0;
    for (const auto& [label, c] : h) pairs += 0.5 * static_cast<double>(c) * static_cast<double>(c - 1);
    s += level_coefficient(lv) * pairs;
  }
  return s;
}

Score dendrogram_purity(const Dendrogram& tree, std::span<const int> labels) {
  const std::size_t n = tree.n_leaves();
  if (labels.size() != n) throw ArgumentError("dendrogram_purity: label count mismatch");

  std::vector<Histogram> hist(tree.node_count());
  for (std::size_t i = 0; i < n; ++i) hist[i][labels[i]] = 1;

  double pairs_total = 0.0;
  {
    Histogram all;
    for (int l : labels) ++all[l];
    for (const auto& [l, c] : all) pairs_total += 0.5 * static_cast<double>(c) * static_cast<double>(c - 1);
  }
  if (pairs_total == 0.0) throw UndefinedScoreError("dendrogram_purity: no same-class pair");

  // A same-class pair with LCA v contributes count_label(v) / size(v).
  double sum = 0.0;
  for (std::size_t t = 0; t < tree.merges().size(); ++t) {
    const Merge& m = tree.merges()[t];
    std::size_t big = m.left, small = m.right;
    if (hist[big].size() < hist[small].size()) std::swap(big, small);
    Histogram merged = std::move(hist[big]);
    const double size = static_cast<double>(m.size);
    fold_histogram(merged, hist[small], [&](int, std::size_t a, std::size_t b) {
      if (b == 0) return;
      const double count = static_cast<double>(a + b);
      sum += static_cast<double>(a) * static_cast<double>(b) * count / size;
    });
    hist[small] = {};
    hist[n + t] = std::move(merged);
  }
  return {sum / pairs_total, pairs_total};
}

std::vector<double> cross_weights(const Dendrogram& tree, const WeightFunction& weights) {
  const std::size_t n = tree.n_leaves();
  if (weights.size() != n) throw ArgumentError("weights do not match the number of leaves");
  std::vector<double> cross(tree.merges().size(), 0.0);

  if (const LevelLabels* levels = weights.levels()) {
    const std::size_t h = levels->levels;
    std::vector<std::vector<Histogram>> hist(tree.node_count());
    for (std::size_t i = 0; i < n; ++i) {
      hist[i].resize(h);
      for (std::size_t l = 0; l < h; ++l) hist[i][l][levels->at(i, l)] = 1;
    }
    for (std::size_t t = 0; t < tree.merges().size(); ++t) {
      const Merge& m = tree.merges()[t];
      std::size_t big = m.left, small = m.right;
      if (tree.size_of(big) < tree.size_of(small)) std::swap(big, small);
      auto merged = std::move(hist[big]);
      double c = 0.0;
      for (std::size_t l = 0; l < h; ++l) {
        double same = 0.0;
        fold_histogram(merged[l], hist[small][l], [&](int, std::size_t a, std::size_t b) {
          same += static_cast<double>(a) * static_cast<double>(b);
        });
        c += weights.level_coefficient(l) * same;
      }
      cross[t] = c;
      hist[small] = {};
      hist[n + t] = std::move(merged);
    }
    return cross;
  }

  const LeafLayout layout(tree);
  for (std::size_t t = 0; t < tree.merges().size(); ++t) {
    double c = 0.0;
    for (std::size_t i : layout.left_leaves(n + t)) {
      for (std::size_t j : layout.right_leaves(n + t)) c += weights(i, j);
    }
    cross[t] = c;
  }
  return cross;
}

double dasgupta_cost(const Dendrogram& tree, const WeightFunction& weights) {
  const auto cross = cross_weights(tree, weights);
  double cost = 0.0;
  for (std::size_t t = 0; t < cross.size(); ++t) cost += cross[t] * static_cast<double>(tree.merges()[t].size);
  return cost;
}

double moseley_wang(const Dendrogram& tree, const WeightFunction& weights) {
  const auto cross = cross_weights(tree, weights);
  const double n = static_cast<double>(tree.n_leaves());
  double mw = 0.0;
  for (std::size_t t = 0; t < cross.size(); ++t) {
    mw += cross[t] * (n - static_cast<double>(tree.merges()[t].size));
  }
  return mw;
}

namespace {

class TreeBuilder {
 public:
  explicit TreeBuilder(std::size_t n) : n_(n) {}

  std::size_t join(std::size_t a, std::size_t b, double height) {
    const std::size_t size = size_of(a) + size_of(b);
    merges_.push_back({std::min(a, b), std::max(a, b), height, size});
    return n_ + merges_.size() - 1;
  }

  // Pairs up adjacent subtrees until one remains.
  std::size_t balanced(std::vector<std::size_t> nodes, double height) {
    while (nodes.size() > 1) {
      std::vector<std::size_t> next;
      for (std::size_t i = 0; i + 1 < nodes.size(); i += 2) next.push_back(join(nodes[i], nodes[i + 1], height));
      if (nodes.size() % 2) next.push_back(nodes.back());
      nodes = std::move(next);
    }
    return nodes.front();
  }

  Dendrogram finish() && { return Dendrogram(n_, std::move(merges_)); }

 private:
  std::size_t size_of(std::size_t node) const { return node < n_ ? 1 : merges_[node - n_].size; }
  std::size_t n_;
  std::vector<Merge> merges_;
};

}  // namespace

Dendrogram canonical_tree(const LevelLabels& labels) {
  labels.check_refinement();
  const std::size_t n = labels.n;
  if (n == 0) throw ArgumentError("canonical_tree: no points");
  TreeBuilder builder(n);

  // Groups at the current level, in first-appearance order, each with the
  // root of its subtree and one representative point.
  struct Group {
    std::size_t root;
    std::size_t rep;
  };
  std::vector<Group> groups;
  double stage = 0.0;
  if (labels.levels == 0) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    builder.balanced(all, 0.0);
    return std::move(builder).finish();
  }

  {
    const std::size_t finest = labels.levels - 1;
    std::unordered_map<int, std::size_t> slot;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, fresh] = slot.try_emplace(labels.at(i, finest), members.size());
      if (fresh) members.emplace_back();
      members[it->second].push_back(i);
    }
    for (auto& m : members) groups.push_back({builder.balanced(m, stage), m.front()});
  }
  for (std::size_t level = labels.levels - 1; level-- > 0;) {
    stage += 1.0;
    std::unordered_map<int, std::size_t> slot;
    std::vector<std::vector<std::size_t>> children;
    std::vector<std::size_t> reps;
    for (const Group& g : groups) {
      auto [it, fresh] = slot.try_emplace(labels.at(g.rep, level), children.size());
      if (fresh) {
        children.emplace_back();
        reps.push_back(g.rep);
      }
      children[it->second].push_back(g.root);
    }
    std::vector<Group> next;
    for (std::size_t s = 0; s < children.size(); ++s) next.push_back({builder.balanced(children[s], stage), reps[s]});
    groups = std::move(next);
  }
  std::vector<std::size_t> roots;
  for (const Group& g : groups) roots.push_back(g.root);
  builder.balanced(roots, stage + 1.0);
  return std::move(builder).finish();
}

double mw_opt(const LevelLabels& labels, LevelWeightMode mode) {
  return moseley_wang(canonical_tree(labels), level_weights(labels, mode));
}

LevelLabels flat_as_levels(std::span<const int> labels) {
  return {labels.size(), 1, std::vector<int>(labels.begin(), labels.end())};
}

double mw_opt(std::span<const int> labels) { return mw_opt(flat_as_levels(labels)); }

double matching_accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ArgumentError("matching_accuracy: size mismatch");
  if (predicted.empty()) return 1.0;
  std::size_t kp = 0, kt = 0;
  const auto p = dense_labels(predicted, &kp);
  const auto t = dense_labels(truth, &kt);
  const std::size_t k = std::max(kp, kt);
  std::vector<std::vector<long long>> count(k, std::vector<long long>(k, 0));
  for (std::size_t i = 0; i < p.size(); ++i) ++count[p[i]][t[i]];

  // Hungarian algorithm (potentials form), minimizing -count.
  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(k + 1, 0), v(k + 1, 0);
  std::vector<std::size_t> match(k + 1, 0), way(k + 1, 0);
  for (std::size_t row = 1; row <= k; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<long long> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = match[col0];
      long long delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= k; ++c) {
        if (used[c]) continue;
        const long long cur = -count[r0 - 1][c - 1] - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= k; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  long long matched = 0;
  for (std::size_t c = 1; c <= k; ++c) {
    if (match[c] != 0) matched += count[match[c] - 1][c - 1];
  }
  return static_cast<double>(matched) / static_cast<double>(p.size());
}

bool same_partition(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) return false;
  return dense_labels(a) == dense_labels(b);
}

}  // namespace hcembed

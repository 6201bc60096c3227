#include "hcembed/linkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>
#include <utility>

namespace hcembed {

std::string_view to_string(LinkageMethod method) {
  switch (method) {
    case LinkageMethod::ward: return "ward";
    case LinkageMethod::single: return "single";
    case LinkageMethod::complete: return "complete";
    case LinkageMethod::average: return "average";
    case LinkageMethod::centroid: return "centroid";
  }
  return "unknown";
}

LinkageMethod parse_linkage(std::string_view name) {
  for (auto m : kAllLinkageMethods) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown linkage method '" + std::string(name) + "'");
}

bool is_monotone_method(LinkageMethod method) { return method != LinkageMethod::centroid; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

double ward_cost(double na, std::span<const double> a, double nb, std::span<const double> b) {
  return na * nb / (na + nb) * squared_distance(a, b);
}

void merge_centroid(double na, std::span<double> a, double nb, std::span<const double> b) {
  const double total = na + nb;
  for (std::size_t j = 0; j < a.size(); ++j) a[j] = (na * a[j] + nb * b[j]) / total;
}

void check_input(const Matrix& points) {
  if (points.rows() < 2) throw ArgumentError("clustering needs at least two points");
  if (points.cols() == 0) throw ArgumentError("clustering needs at least one dimension");
  if (!points.all_finite()) throw ArgumentError("clustering input contains non-finite values");
}

// A merge found by the chain, in slot terms. The merged cluster lives in
// slot `keep` afterwards.
struct SlotMerge {
  std::size_t a;
  std::size_t b;
  std::size_t keep;
  double height;
};

// Orders chain merges by height while keeping children ahead of parents,
// then assigns node ids n+t in that order.
Dendrogram order_merges(std::size_t n, const std::vector<SlotMerge>& raw) {
  const std::size_t m = raw.size();
  std::vector<std::size_t> last_writer(n, kNone);
  std::vector<std::array<std::size_t, 2>> child(m);
  std::vector<std::size_t> parent(m, kNone);
  std::vector<int> pending(m, 0);
  for (std::size_t r = 0; r < m; ++r) {
    child[r] = {last_writer[raw[r].a], last_writer[raw[r].b]};
    for (std::size_t c : child[r]) {
      if (c != kNone) {
        parent[c] = r;
        ++pending[r];
      }
    }
    last_writer[raw[r].keep] = r;
  }

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> ready;
  for (std::size_t r = 0; r < m; ++r) {
    if (pending[r] == 0) ready.emplace(raw[r].height, r);
  }
  std::vector<std::size_t> node_of(m, kNone);
  std::vector<std::size_t> size_of(m, 0);
  std::vector<Merge> merges;
  merges.reserve(m);
  while (!ready.empty()) {
    const std::size_t r = ready.top().second;
    ready.pop();
    std::size_t ids[2];
    std::size_t size = 0;
    const std::size_t slots[2] = {raw[r].a, raw[r].b};
    for (int s = 0; s < 2; ++s) {
      const std::size_t c = child[r][s];
      ids[s] = c == kNone ? slots[s] : node_of[c];
      size += c == kNone ? 1 : size_of[c];
    }
    node_of[r] = n + merges.size();
    size_of[r] = size;
    merges.push_back({std::min(ids[0], ids[1]), std::max(ids[0], ids[1]), raw[r].height, size});
    if (parent[r] != kNone && --pending[parent[r]] == 0) ready.emplace(raw[parent[r]].height, parent[r]);
  }
  return Dendrogram(n, std::move(merges));
}

// Nearest-neighbor chain for reducible linkages. `cost(i, j)` must be
// symmetric; `on_merge(keep, drop)` folds slot `drop` into slot `keep`.
template <class Cost, class OnMerge>
std::vector<SlotMerge> nn_chain(std::size_t n, Cost&& cost, OnMerge&& on_merge) {
  std::vector<std::size_t> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  std::vector<std::size_t> chain;
  chain.reserve(n);
  std::vector<SlotMerge> raw;
  raw.reserve(n - 1);

  while (raw.size() + 1 < n) {
    if (chain.empty()) chain.push_back(alive.front());
    for (;;) {
      const std::size_t top = chain.back();
      const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : kNone;
      std::size_t best = prev;
      double best_cost = prev == kNone ? kInf : cost(top, prev);
      // Strict improvement only, so the previous chain element wins ties
      // and the chain terminates.
      for (std::size_t s : alive) {
        if (s == top) continue;
        const double c = cost(top, s);
        if (c < best_cost) {
          best_cost = c;
          best = s;
        }
      }
      if (best == prev) {
        const std::size_t keep = std::min(top, prev);
        const std::size_t drop = std::max(top, prev);
        raw.push_back({top, prev, keep, best_cost});
        on_merge(keep, drop);
        alive.erase(std::lower_bound(alive.begin(), alive.end(), drop));
        chain.resize(chain.size() - 2);
        break;
      }
      chain.push_back(best);
    }
  }
  return raw;
}

Dendrogram ward_chain(const Matrix& points) {
  const std::size_t n = points.rows();
  Matrix centroid = points;
  std::vector<double> size(n, 1.0);
  auto cost = [&](std::size_t i, std::size_t j) {
    return ward_cost(size[i], centroid.row(i), size[j], centroid.row(j));
  };
  auto on_merge = [&](std::size_t keep, std::size_t drop) {
    merge_centroid(size[keep], centroid.row(keep), size[drop], centroid.row(drop));
    size[keep] += size[drop];
  };
  return order_merges(n, nn_chain(n, cost, on_merge));
}

class Condensed {
 public:
  explicit Condensed(std::size_t n) : n_(n), d_(n * (n - 1) / 2) {}
  double& operator()(std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return d_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
  }

 private:
  std::size_t n_;
  std::vector<double> d_;
};

Dendrogram matrix_chain(const Matrix& points, LinkageMethod method) {
  const std::size_t n = points.rows();
  Condensed dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist(i, j) = distance(points.row(i), points.row(j));
  }
  std::vector<std::size_t> size(n, 1);
  std::vector<char> alive(n, 1);
  auto cost = [&](std::size_t i, std::size_t j) { return dist(i, j); };
  auto on_merge = [&](std::size_t keep, std::size_t drop) {
    const double d_ab = dist(keep, drop);
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == keep || k == drop) continue;
      dist(k, keep) = lance_williams(method, dist(k, keep), dist(k, drop), d_ab, size[keep],
                                     size[drop], size[k]);
    }
    size[keep] += size[drop];
    alive[drop] = 0;
  };
  return order_merges(n, nn_chain(n, cost, on_merge));
}

// Centroid linkage is not reducible, so the chain does not apply. Each slot
// caches its nearest neighbor among later slots; merges happen in global
// minimum order.
Dendrogram centroid_generic(const Matrix& points) {
  const std::size_t n = points.rows();
  Matrix centroid = points;
  std::vector<double> size(n, 1.0);
  std::vector<std::size_t> node(n);
  std::iota(node.begin(), node.end(), 0);
  std::vector<std::size_t> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  std::vector<std::size_t> nn(n, kNone);
  std::vector<double> nn_cost(n, kInf);

  auto cost = [&](std::size_t i, std::size_t j) {
    return std::sqrt(squared_distance(centroid.row(i), centroid.row(j)));
  };
  auto key = [&](std::size_t i, std::size_t j) {
    return std::pair{std::min(node[i], node[j]), std::max(node[i], node[j])};
  };
  auto better = [&](double c, std::size_t i, std::size_t j, double best, std::size_t i2, std::size_t j2) {
    if (c != best) return c < best;
    return j2 == kNone || key(i, j) < key(i2, j2);
  };
  auto recompute = [&](std::size_t r) {
    nn[r] = kNone;
    nn_cost[r] = kInf;
    for (auto it = std::upper_bound(alive.begin(), alive.end(), r); it != alive.end(); ++it) {
      const double c = cost(r, *it);
      if (better(c, r, *it, nn_cost[r], r, nn[r])) {
        nn_cost[r] = c;
        nn[r] = *it;
      }
    }
  };
  for (std::size_t r = 0; r < n; ++r) recompute(r);

  std::vector<Merge> merges;
  merges.reserve(n - 1);
  while (merges.size() + 1 < n) {
    std::size_t r = kNone;
    for (std::size_t q : alive) {
      if (nn[q] == kNone) continue;
      if (r == kNone || better(nn_cost[q], q, nn[q], nn_cost[r], r, nn[r])) r = q;
    }
    const std::size_t s = nn[r];
    const double height = nn_cost[r];
    merges.push_back({std::min(node[r], node[s]), std::max(node[r], node[s]), height,
                      static_cast<std::size_t>(size[r] + size[s])});
    merge_centroid(size[r], centroid.row(r), size[s], centroid.row(s));
    size[r] += size[s];
    node[r] = n + merges.size() - 1;
    alive.erase(std::lower_bound(alive.begin(), alive.end(), s));
    nn[s] = kNone;

    for (std::size_t q : alive) {
      if (q == r || nn[q] == r || nn[q] == s) {
        recompute(q);
      } else if (q < r) {
        const double c = cost(q, r);
        if (better(c, q, r, nn_cost[q], q, nn[q])) {
          nn_cost[q] = c;
          nn[q] = r;
        }
      }
    }
  }
  return Dendrogram(n, std::move(merges));
}

}  // namespace

ClusterStats ClusterStats::singleton(std::span<const double> point) {
  return {1, std::vector<double>(point.begin(), point.end()), true};
}

ClusterStats ClusterStats::merged(const ClusterStats& a, const ClusterStats& b) {
  ClusterStats out{a.size + b.size, a.centroid, true};
  merge_centroid(static_cast<double>(a.size), out.centroid, static_cast<double>(b.size), b.centroid);
  return out;
}

double ward_delta(const ClusterStats& a, const ClusterStats& b) {
  if (a.size == 0 || b.size == 0) throw ArgumentError("ward_delta: empty cluster");
  return ward_cost(static_cast<double>(a.size), a.centroid, static_cast<double>(b.size), b.centroid);
}

double lance_williams(LinkageMethod method, double d_ka, double d_kb, double d_ab,
                      std::size_t n_a, std::size_t n_b, std::size_t n_k) {
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);
  const double nk = static_cast<double>(n_k);
  switch (method) {
    case LinkageMethod::single: return std::min(d_ka, d_kb);
    case LinkageMethod::complete: return std::max(d_ka, d_kb);
    case LinkageMethod::average: return (na * d_ka + nb * d_kb) / (na + nb);
    case LinkageMethod::ward:
      return ((na + nk) * d_ka + (nb + nk) * d_kb - nk * d_ab) / (na + nb + nk);
    case LinkageMethod::centroid: {
      const double s = na + nb;
      return (na * d_ka + nb * d_kb) / s - na * nb * d_ab / (s * s);
    }
  }
  throw ArgumentError("lance_williams: unknown method");
}

Dendrogram cluster(const Matrix& points, LinkageMethod method) {
  check_input(points);
  switch (method) {
    case LinkageMethod::ward: return ward_chain(points);
    case LinkageMethod::centroid: return centroid_generic(points);
    default: return matrix_chain(points, method);
  }
}

Dendrogram cluster_naive(const Matrix& points, LinkageMethod method, std::size_t cap) {
  check_input(points);
  const std::size_t n = points.rows();
  if (n > cap) {
    throw ArgumentError("cluster_naive: n=" + std::to_string(n) + " exceeds oracle cap " +
                        std::to_string(cap));
  }
  struct Active {
    std::size_t node;
    ClusterStats stats;
    std::vector<std::size_t> members;
  };
  std::vector<Active> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, ClusterStats::singleton(points.row(i)), {i}});

  Matrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist(i, j) = distance(points.row(i), points.row(j));
  }

  auto cost = [&](const Active& a, const Active& b) {
    switch (method) {
      case LinkageMethod::ward: return ward_delta(a.stats, b.stats);
      case LinkageMethod::centroid:
        return std::sqrt(squared_distance(a.stats.centroid, b.stats.centroid));
      case LinkageMethod::single: {
        double best = kInf;
        for (auto i : a.members) for (auto j : b.members) best = std::min(best, dist(i, j));
        return best;
      }
      case LinkageMethod::complete: {
        double worst = 0.0;
        for (auto i : a.members) for (auto j : b.members) worst = std::max(worst, dist(i, j));
        return worst;
      }
      case LinkageMethod::average: {
        double total = 0.0;
        for (auto i : a.members) for (auto j : b.members) total += dist(i, j);
        return total / static_cast<double>(a.members.size() * b.members.size());
      }
    }
    return kInf;
  };

  std::vector<Merge> merges;
  merges.reserve(n - 1);
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = kInf;
    std::pair<std::size_t, std::size_t> best_key{kNone, kNone};
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double c = cost(active[i], active[j]);
        const std::pair key{std::min(active[i].node, active[j].node),
                            std::max(active[i].node, active[j].node)};
        if (c < best || (c == best && key < best_key)) {
          best = c;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    }
    Active merged{n + merges.size(), ClusterStats::merged(active[bi].stats, active[bj].stats), {}};
    merged.members = active[bi].members;
    merged.members.insert(merged.members.end(), active[bj].members.begin(), active[bj].members.end());
    merges.push_back({best_key.first, best_key.second, best, merged.members.size()});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    active.push_back(std::move(merged));
  }
  return Dendrogram(n, std::move(merges));
}

}  // namespace hcembed

#include "hcembed/btgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hcembed/rng.hpp"

namespace hcembed {

namespace {

constexpr std::uint64_t kComponentStream = 1;
constexpr std::uint64_t kPointStream = 2;

std::string pair_name(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

void BtgmSpec::validate() const {
  if (height < 1 || height > 30) throw ArgumentError("btgm: height must be in [1, 30]");
  if (!(margin > 0.0)) throw ArgumentError("btgm: margin must be positive");
  if (!(expansion > 1.0)) throw ArgumentError("btgm: expansion ratio must exceed 1");
  if (dim < static_cast<std::size_t>(height)) {
    throw ArgumentError("btgm: dimension " + std::to_string(dim) + " is below height " +
                        std::to_string(height));
  }
}

double MixtureSpec::weight_ratio() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& c : components) {
    lo = std::min(lo, c.weight);
    hi = std::max(hi, c.weight);
  }
  return components.size() < 2 ? 1.0 : hi / lo;
}

double MixtureSpec::min_weight() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& c : components) lo = std::min(lo, c.weight);
  return lo;
}

Matrix MixtureSpec::means() const {
  Matrix out(k(), dim());
  for (std::size_t i = 0; i < k(); ++i) {
    std::copy(components[i].mean.begin(), components[i].mean.end(), out.row(i).begin());
  }
  return out;
}

void MixtureSpec::validate() const {
  if (components.empty()) throw ArgumentError("mixture has no components");
  const std::size_t d = dim();
  if (d == 0) throw ArgumentError("mixture means are empty");
  double total = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto& c = components[i];
    if (c.mean.size() != d) throw ArgumentError("mixture means have inconsistent dimension");
    if (!(c.weight > 0.0)) throw ArgumentError("component " + std::to_string(i) + " weight <= 0");
    if (!(c.stddev > 0.0)) throw ArgumentError("component " + std::to_string(i) + " stddev <= 0");
    for (double v : c.mean) {
      if (!std::isfinite(v)) throw ArgumentError("component " + std::to_string(i) + " mean not finite");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("mixture weights do not sum to 1");
}

MixtureSpec MixtureSpec::uniform(const Matrix& means, double stddev) {
  MixtureSpec out;
  const double w = 1.0 / static_cast<double>(means.rows());
  for (std::size_t i = 0; i < means.rows(); ++i) {
    auto r = means.row(i);
    out.components.push_back({w, std::vector<double>(r.begin(), r.end()), stddev});
  }
  return out;
}

void Hierarchy::validate(std::size_t k) const {
  for (std::size_t l = 0; l < levels.size(); ++l) {
    std::vector<int> owner(k, -1);
    for (std::size_t s = 0; s < levels[l].size(); ++s) {
      if (levels[l][s].empty()) throw StructuralError("hierarchy level has an empty set");
      for (std::size_t idx : levels[l][s]) {
        if (idx >= k) throw StructuralError("hierarchy index " + std::to_string(idx) + " out of range");
        if (owner[idx] != -1) throw StructuralError("hierarchy level repeats index " + std::to_string(idx));
        owner[idx] = static_cast<int>(s);
      }
    }
    if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
      throw StructuralError("hierarchy level " + std::to_string(l) + " does not cover all components");
    }
    if (l > 0) {
      // Every set at level l-1 must sit inside one set at level l.
      for (const auto& set : levels[l - 1]) {
        for (std::size_t idx : set) {
          if (owner[idx] != owner[set.front()]) {
            throw StructuralError("hierarchy level " + std::to_string(l - 1) +
                                  " does not refine level " + std::to_string(l));
          }
        }
      }
    }
  }
}

Hierarchy Hierarchy::binary_tree(int height) {
  Hierarchy h;
  const std::size_t k = std::size_t{1} << height;
  for (int depth = height; depth >= 1; --depth) {
    const std::size_t block = std::size_t{1} << (height - depth);
    std::vector<std::vector<std::size_t>> level;
    for (std::size_t start = 0; start < k; start += block) {
      std::vector<std::size_t> set(block);
      std::iota(set.begin(), set.end(), start);
      level.push_back(std::move(set));
    }
    h.levels.push_back(std::move(level));
  }
  return h;
}

Matrix btgm_means(const BtgmSpec& spec) {
  spec.validate();
  const std::size_t k = spec.components();
  const auto h = static_cast<std::size_t>(spec.height);
  Matrix means(k, spec.dim);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 1; j <= h; ++j) {
      const bool negative = (i >> (h - j)) & 1U;
      const double magnitude = spec.margin * std::pow(spec.expansion, static_cast<double>(h - j));
      means(i, j - 1) = negative ? -magnitude : magnitude;
    }
  }
  return means;
}

Matrix shift_means(const Matrix& means, std::size_t count, std::size_t rotation) {
  if (count > means.rows()) throw ArgumentError("shift: count exceeds number of means");
  if (means.cols() > 0 && rotation >= means.cols()) {
    throw ArgumentError("shift: rotation must be below the dimension");
  }
  Matrix out = means;
  for (std::size_t i = 0; i < count; ++i) {
    auto row = out.row(i);
    std::rotate(row.rbegin(), row.rbegin() + static_cast<std::ptrdiff_t>(rotation), row.rend());
  }
  return out;
}

LevelLabels btgm_level_labels(std::span<const int> components, int height) {
  LevelLabels out{components.size(), static_cast<std::size_t>(height), {}};
  out.values.reserve(components.size() * out.levels);
  for (int c : components) {
    for (int l = 1; l <= height; ++l) out.values.push_back(c >> (height - l));
  }
  return out;
}

namespace {

void draw_point(const Component& comp, std::uint64_t seed, std::size_t index,
                std::span<double> out) {
  auto rng = SeedableRng::stream(seed, kPointStream, index);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = comp.mean[j] + comp.stddev * rng.normal();
}

Dataset finish(Matrix points, std::vector<int> comps, std::optional<int> btgm_height) {
  Dataset ds;
  ds.points = std::move(points);
  if (btgm_height) ds.level_labels = btgm_level_labels(comps, *btgm_height);
  ds.flat_labels = std::move(comps);
  return ds;
}

}  // namespace

Dataset sample(const MixtureSpec& mixture, std::size_t n, std::uint64_t seed,
               std::optional<int> btgm_height) {
  mixture.validate();
  if (n == 0) throw ArgumentError("sample: n must be positive");
  std::vector<double> cumulative(mixture.k());
  double acc = 0.0;
  for (std::size_t c = 0; c < mixture.k(); ++c) cumulative[c] = acc += mixture.components[c].weight;

  Matrix points(n, mixture.dim());
  std::vector<int> comps(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = SeedableRng::stream(seed, kComponentStream, i).uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto c = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), mixture.k() - 1);
    comps[i] = static_cast<int>(c);
    draw_point(mixture.components[c], seed, i, points.row(i));
  }
  return finish(std::move(points), std::move(comps), btgm_height);
}

Dataset sample_counts(const MixtureSpec& mixture, std::span<const std::size_t> counts,
                      std::uint64_t seed, std::optional<int> btgm_height) {
  mixture.validate();
  if (counts.size() != mixture.k()) throw ArgumentError("sample: one count per component required");
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (n == 0) throw ArgumentError("sample: n must be positive");
  Matrix points(n, mixture.dim());
  std::vector<int> comps;
  comps.reserve(n);
  std::size_t i = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t r = 0; r < counts[c]; ++r, ++i) {
      comps.push_back(static_cast<int>(c));
      draw_point(mixture.components[c], seed, i, points.row(i));
    }
  }
  return finish(std::move(points), std::move(comps), btgm_height);
}

double radius_bound(double stddev, std::size_t dim, std::size_t n) {
  return stddev * (std::sqrt(static_cast<double>(dim)) +
                   2.0 * std::sqrt(std::log(static_cast<double>(n))));
}

bool SeparationReport::passed() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.passed; });
}

bool CorollaryReport::passed() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.passed; });
}

namespace {

SeparationReport pair_table(const MixtureSpec& mixture, std::size_t n) {
  SeparationReport report;
  const std::size_t k = mixture.k();
  for (const auto& c : mixture.components) report.radius.push_back(radius_bound(c.stddev, mixture.dim(), n));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double dist = distance(mixture.components[i].mean, mixture.components[j].mean);
      const double s = report.radius[i] + report.radius[j];
      report.pairs.push_back({i, j, dist, dist + s, dist - s});
    }
  }
  return report;
}

// D^+ for a (possibly equal) pair of component indices.
double upper_bound(const SeparationReport& r, const MixtureSpec& m, std::size_t i, std::size_t j) {
  if (i == j) return 2.0 * r.radius[i];
  return distance(m.components[i].mean, m.components[j].mean) + r.radius[i] + r.radius[j];
}

double lower_bound(const SeparationReport& r, const MixtureSpec& m, std::size_t i, std::size_t j) {
  return distance(m.components[i].mean, m.components[j].mean) - r.radius[i] - r.radius[j];
}

}  // namespace

SeparationReport check_theorem1(const MixtureSpec& mixture, std::size_t n,
                                const RecoveryConstants& constants) {
  mixture.validate();
  if (n == 0) throw ArgumentError("check_theorem1: n must be positive");
  SeparationReport report = pair_table(mixture, n);
  const double nu = mixture.weight_ratio();
  const double scale = std::sqrt(static_cast<double>(mixture.dim())) +
                       std::sqrt(std::log(static_cast<double>(n)));

  Condition sep{"pairwise mean separation", 0.0, 0.0, true, "none"};
  double best_ratio = std::numeric_limits<double>::infinity();
  for (const auto& p : report.pairs) {
    const double required = constants.c * std::sqrt(nu) *
                            (mixture.components[p.i].stddev + mixture.components[p.j].stddev) * scale;
    const double ratio = p.mean_distance / required;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      sep.lhs = p.mean_distance;
      sep.rhs = required;
      report.tightest_i = p.i;
      report.tightest_j = p.j;
      sep.binding = "pair " + pair_name(p.i, p.j);
    }
  }
  sep.passed = sep.lhs >= sep.rhs;
  report.conditions.push_back(sep);

  const double need_n = constants.c0 * std::log(static_cast<double>(mixture.k())) / mixture.min_weight();
  report.conditions.push_back(
      {"sample size", static_cast<double>(n), need_n, static_cast<double>(n) >= need_n, "w_min"});
  return report;
}

SeparationReport check_theorem2(const MixtureSpec& mixture, const Hierarchy& hierarchy,
                                std::size_t n, const RecoveryConstants& constants) {
  mixture.validate();
  hierarchy.validate(mixture.k());
  if (n == 0) throw ArgumentError("check_theorem2: n must be positive");
  SeparationReport report = pair_table(mixture, n);
  double best_ratio = std::numeric_limits<double>::infinity();

  for (std::size_t l = 0; l < hierarchy.levels.size(); ++l) {
    const auto& sets = hierarchy.levels[l];
    LevelReport lr;
    lr.level = l;
    std::vector<double> weight(sets.size(), 0.0);
    for (std::size_t s = 0; s < sets.size(); ++s) {
      for (std::size_t idx : sets[s]) weight[s] += mixture.components[idx].weight;
      double up = 0.0;
      for (std::size_t a : sets[s]) {
        for (std::size_t b : sets[s]) up = std::max(up, upper_bound(report, mixture, a, b));
      }
      lr.within_upper.push_back(up);
    }
    lr.weight_ratio = 1.0;
    for (std::size_t a = 0; a < sets.size(); ++a) {
      for (std::size_t b = 0; b < sets.size(); ++b) {
        if (a != b) lr.weight_ratio = std::max(lr.weight_ratio, weight[a] / weight[b]);
      }
    }

    Condition cond{"level " + std::to_string(l) + " separation", 0.0, 0.0, true, "single set"};
    lr.min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < sets.size(); ++a) {
      for (std::size_t b = a + 1; b < sets.size(); ++b) {
        double lower = std::numeric_limits<double>::infinity();
        std::size_t wi = 0, wj = 0;
        for (std::size_t i : sets[a]) {
          for (std::size_t j : sets[b]) {
            const double v = lower_bound(report, mixture, i, j);
            if (v < lower) {
              lower = v;
              wi = i;
              wj = j;
            }
          }
        }
        const double within = constants.sum_form ? lr.within_upper[a] + lr.within_upper[b]
                                                 : std::max(lr.within_upper[a], lr.within_upper[b]);
        const double rhs = constants.c1 * std::sqrt(lr.weight_ratio) * within;
        const double ratio = lower / rhs;
        if (ratio < lr.min_ratio) {
          lr.min_ratio = ratio;
          cond.lhs = lower;
          cond.rhs = rhs;
          cond.binding = "sets " + pair_name(a, b) + " via components " + pair_name(wi, wj);
        }
        if (ratio < best_ratio) {
          best_ratio = ratio;
          report.tightest_i = std::min(wi, wj);
          report.tightest_j = std::max(wi, wj);
        }
      }
    }
    cond.passed = cond.lhs >= cond.rhs;
    lr.passed = cond.passed;
    report.levels.push_back(std::move(lr));
    report.conditions.push_back(std::move(cond));
  }
  return report;
}

CorollaryReport check_corollary(const BtgmSpec& spec, std::size_t n,
                                const RecoveryConstants& constants) {
  spec.validate();
  if (n == 0) throw ArgumentError("check_corollary: n must be positive");
  CorollaryReport report;
  const double inf = std::numeric_limits<double>::infinity();
  const bool alpha_ok = spec.expansion > constants.c1;
  report.c2 = alpha_ok ? 2.0 * (2.0 * constants.c1 + 1.0) / (spec.expansion - constants.c1)
                       : std::numeric_limits<double>::quiet_NaN();
  report.conditions.push_back({"expansion ratio", spec.expansion, constants.c1, alpha_ok, "alpha > c1"});

  const double scale = std::sqrt(static_cast<double>(spec.dim)) +
                       std::sqrt(std::log(static_cast<double>(n)));
  const double need_m = alpha_ok ? 2.0 * std::max(constants.c, report.c2) * scale : inf;
  report.conditions.push_back({"margin", spec.margin, need_m, alpha_ok && spec.margin >= need_m,
                               alpha_ok && report.c2 > constants.c ? "c2" : "c"});

  const double k = static_cast<double>(spec.components());
  const double need_n = constants.c0 * k * std::log(k);
  report.conditions.push_back(
      {"sample size", static_cast<double>(n), need_n, static_cast<double>(n) >= need_n, "c0 k ln k"});
  return report;
}

}  // namespace hcembed

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hcembed/btgm.hpp"
#include "hcembed/embed.hpp"
#include "hcembed/metrics.hpp"
#include "hcembed/rng.hpp"

using namespace hcembed;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, SeedableRng& rng, double scale = 1.0) {
  Matrix m(n, d);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

GmmParams two_component(double w0, double var0, double var1) {
  GmmParams g;
  g.weights = {w0, 1.0 - w0};
  g.means = Matrix(2, 2, {0.0, 0.0, 4.0, 0.0});
  g.variances = Matrix(2, 1, {var0, var1});
  return g;
}

double min_cross_distance(const Matrix& p, const std::vector<int>& label) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = i + 1; j < p.rows(); ++j) {
      if (label[i] != label[j]) best = std::min(best, distance(p.row(i), p.row(j)));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("pca rows are orthonormal and signed") {
  SeedableRng rng(1);
  Matrix x = gaussian(300, 6, rng);
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 0) *= 5.0;
  const PcaModel m = pca_fit(x, 4);
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = 0; b < 4; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < 6; ++j) dot += m.components(a, j) * m.components(b, j);
      CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < 6; ++j) {
      if (std::abs(m.components(a, j)) > std::abs(m.components(a, arg))) arg = j;
    }
    CHECK(m.components(a, arg) > 0.0);
    if (a > 0) CHECK(m.explained_variance[a] <= m.explained_variance[a - 1]);
  }
  CHECK(std::abs(m.components(0, 0)) > 0.99);
  CHECK_THROWS_AS(pca_fit(x, 0), ArgumentError);
  CHECK_THROWS_AS(pca_fit(x, 7), ArgumentError);
}

TEST_CASE("pca reproduces data living in an axis-aligned subspace") {
  SeedableRng rng(2);
  Matrix x(200, 5, 0.0);
  for (std::size_t i = 0; i < 200; ++i) {
    x(i, 1) = 3.0 * rng.normal();
    x(i, 3) = rng.normal();
  }
  const PcaModel m = pca_fit(x, 2);
  const Matrix y = pca_transform(m, x);
  // Reconstruct and compare.
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double r = m.mean[j];
      for (std::size_t c = 0; c < 2; ++c) r += y(i, c) * m.components(c, j);
      CHECK(std::abs(r - x(i, j)) < 1e-9);
    }
  }
}

TEST_CASE("pca with h = d is an isometry") {
  SeedableRng rng(3);
  const Matrix x = gaussian(50, 4, rng);
  const Matrix y = pca_transform(pca_fit(x, 4), x);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = i + 1; j < 50; ++j) {
      CHECK(distance(y.row(i), y.row(j)) == doctest::Approx(distance(x.row(i), x.row(j))).epsilon(1e-12));
    }
  }
}

TEST_CASE("isotropic data has flat explained variance") {
  SeedableRng rng(4);
  const Matrix x = gaussian(20000, 5, rng);
  const PcaModel m = pca_fit(x, 5);
  for (double v : m.explained_variance) CHECK(std::abs(v - 1.0) < 0.05);
}

TEST_CASE("orthogonal iteration agrees with the dense solver") {
  SeedableRng rng(5);
  Matrix x = gaussian(120, 30, rng);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    x(i, 2) *= 6.0;
    x(i, 7) *= 4.0;
    x(i, 11) *= 2.5;
  }
  PcaOptions iterative;
  iterative.power_iteration_threshold = 10;
  const PcaModel a = pca_fit(x, 3);
  const PcaModel b = pca_fit(x, 3, iterative);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(b.explained_variance[c] == doctest::Approx(a.explained_variance[c]).epsilon(1e-8));
    for (std::size_t j = 0; j < 30; ++j) CHECK(std::abs(a.components(c, j) - b.components(c, j)) < 1e-6);
  }
}

TEST_CASE("gmm with one component recovers sample moments") {
  SeedableRng rng(6);
  Matrix x = gaussian(500, 3, rng, 2.0);
  for (std::size_t i = 0; i < 500; ++i) x(i, 1) += 7.0;
  const GmmFit fit = gmm_fit(x, 1, 0);
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t j = 0; j < 3; ++j) mean[j] += x(i, j) / 500.0;
  }
  double var = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    for (std::size_t j = 0; j < 3; ++j) var += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  }
  var /= 1500.0;
  for (std::size_t j = 0; j < 3; ++j) CHECK(fit.params.means(0, j) == doctest::Approx(mean[j]).epsilon(1e-9));
  CHECK(fit.params.variances(0, 0) == doctest::Approx(var).epsilon(1e-9));
  CHECK(fit.params.weights[0] == 1.0);

  GmmConfig diag;
  diag.covariance = CovarianceKind::diagonal;
  const GmmFit d = gmm_fit(x, 1, 0, diag);
  CHECK(d.params.variances.cols() == 3);
  CHECK(d.params.kind() == CovarianceKind::diagonal);
}

TEST_CASE("gmm separates two distant blobs") {
  SeedableRng rng(7);
  const std::size_t half = 2000;
  Matrix x = gaussian(2 * half, 2, rng);
  std::vector<int> truth(2 * half, 0);
  for (std::size_t i = half; i < 2 * half; ++i) {
    x(i, 0) += 20.0;
    truth[i] = 1;
  }
  const GmmFit fit = gmm_fit(x, 2, 11);
  CHECK(fit.converged);
  CHECK(matching_accuracy(assign_all(fit.params, x), truth) == 1.0);
  const std::size_t lo = fit.params.means(0, 0) < fit.params.means(1, 0) ? 0 : 1;
  CHECK(distance(fit.params.means.row(lo), std::vector<double>{0.0, 0.0}) < 0.1);
  CHECK(distance(fit.params.means.row(1 - lo), std::vector<double>{20.0, 0.0}) < 0.1);
}

TEST_CASE("EM log-likelihood never decreases") {
  SeedableRng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t k = 2 + rng.below(4);
    Matrix x = gaussian(150, 3, rng);
    for (std::size_t i = 0; i < 150; ++i) x(i, i % 3) += static_cast<double>(i % k) * 1.5;
    GmmConfig cfg;
    cfg.covariance = rep % 2 ? CovarianceKind::diagonal : CovarianceKind::spherical;
    cfg.tol = 1e-10;
    const GmmFit fit = gmm_fit(x, k, rep, cfg);
    if (fit.reseeded > 0) continue;  // re-seeding restarts the ascent
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      CHECK(fit.log_likelihood[i] >= fit.log_likelihood[i - 1] - 1e-9 * std::abs(fit.log_likelihood[i - 1]));
    }
  }
}

TEST_CASE("gmm handles duplicate-heavy data") {
  Matrix x(20, 2, 1.0);
  x(19, 0) = 5.0;
  const GmmFit fit = gmm_fit(x, 3, 1);
  CHECK_NOTHROW(fit.params.validate());
  CHECK_THROWS_AS(gmm_fit(x, 21, 1), ArgumentError);
}

TEST_CASE("assign") {
  const GmmParams g = two_component(0.5, 1.0, 1.0);
  CHECK(assign(g, std::vector<double>{0.0, 0.0}) == 0);
  CHECK(assign(g, std::vector<double>{4.0, 0.0}) == 1);
  CHECK(assign(g, std::vector<double>{2.0, 0.0}) == 0);  // tie
  CHECK_THROWS_AS(assign(g, std::vector<double>{1.0}), ArgumentError);

  // Skewed weights: likelihood alone picks component 1, the posterior picks 0.
  const GmmParams skew = two_component(0.99, 1.0, 1.0);
  const std::vector<double> x{2.5, 0.0};
  CHECK(assign(skew, x) == 1);
  CHECK(assign(skew, x, true) == 0);
}

TEST_CASE("rescale with s = 0 is the identity") {
  SeedableRng rng(9);
  const Matrix x = gaussian(30, 2, rng);
  CHECK(rescale(x, two_component(0.5, 1.0, 1.0), {0.0, false}) == x);
  CHECK_THROWS_AS(rescale(x, two_component(0.5, 1.0, 1.0), {-1.0, false}), ArgumentError);
}

TEST_CASE("rescale translates each point by s times its component mean") {
  SeedableRng rng(10);
  const GmmParams g = two_component(0.5, 1.0, 1.0);
  const Matrix x = gaussian(40, 2, rng, 2.0);
  const Matrix y = rescale(x, g, {3.0, false});
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t c = assign(g, x.row(i));
    for (std::size_t j = 0; j < 2; ++j) CHECK(y(i, j) == x(i, j) + 3.0 * g.means(c, j));
  }
}

TEST_CASE("rescale preserves within-cluster distances") {
  // Coordinates on a dyadic grid make the translation exact, so distances
  // are preserved bitwise.
  SeedableRng rng(11);
  const GmmParams g = two_component(0.5, 1.0, 1.0);
  Matrix x(60, 2);
  for (double& v : x.data()) v = static_cast<double>(static_cast<int>(rng.below(64)) - 24) / 8.0;
  const Matrix y = rescale(x, g, {3.0, false});
  const auto labels = assign_all(g, x);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = i + 1; j < 60; ++j) {
      if (labels[i] == labels[j]) CHECK(squared_distance(y.row(i), y.row(j)) == squared_distance(x.row(i), x.row(j)));
    }
  }
  // Generic coordinates: equal to rounding.
  const Matrix u = gaussian(60, 2, rng, 3.0);
  const Matrix v = rescale(u, g, {2.7, false});
  const auto lu = assign_all(g, u);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = i + 1; j < 60; ++j) {
      if (lu[i] == lu[j]) {
        CHECK(distance(v.row(i), v.row(j)) == doctest::Approx(distance(u.row(i), u.row(j))).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("points at the means spread by exactly 1 + s") {
  GmmParams g;
  g.weights = {0.25, 0.25, 0.25, 0.25};
  g.means = btgm_means({2, 3.0, 2.0, 3});
  g.variances = Matrix(4, 1, 1.0);
  const Matrix x = g.means;
  const Matrix y = rescale(x, g, {3.0, false});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) CHECK(distance(y.row(i), y.row(j)) == 4.0 * distance(x.row(i), x.row(j)));
  }
  for (double s : {0.5, 1.7, 6.0}) {
    const Matrix z = rescale(x, g, {s, false});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        CHECK(distance(z.row(i), z.row(j)) / distance(x.row(i), x.row(j)) == doctest::Approx(1.0 + s).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("rescale increases separation between assigned clusters") {
  const auto mix = MixtureSpec::uniform(btgm_means({2, 4.0, 2.0, 6}));
  const Dataset d = sample(mix, 400, 3);
  const GmmFit fit = gmm_fit(d.points, 4, 5);
  const auto labels = assign_all(fit.params, d.points);
  const double before = min_cross_distance(d.points, labels);
  for (double s : {1.0, 3.0}) {
    const Matrix y = rescale(d.points, fit.params, {s, false});
    CHECK(min_cross_distance(y, labels) >= before);
  }
}

TEST_CASE("gmm parameter validation") {
  GmmParams g = two_component(0.5, 1.0, 1.0);
  CHECK_NOTHROW(g.validate());
  g.weights = {0.5, 0.6};
  CHECK_THROWS_AS(g.validate(), ArgumentError);
  g = two_component(0.5, 1.0, 0.0);
  CHECK_THROWS_AS(g.validate(), ArgumentError);
  g = two_component(0.5, 1.0, 1.0);
  g.variances = Matrix(2, 3, 1.0);
  CHECK_THROWS_AS(g.validate(), ArgumentError);
}

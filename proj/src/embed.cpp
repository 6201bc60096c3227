#include "hcembed/embed.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hcembed/rng.hpp"

namespace hcembed {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> as_eigen(const Matrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())};
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  }
  if (v[arg] < 0) v = -v;
}

// Orthogonal iteration on the centered data without forming the covariance.
void top_eigen_subspace(const RowMatrix& centered, std::size_t h, const PcaOptions& opt,
                        Eigen::MatrixXd& vectors, Eigen::VectorXd& values) {
  const Eigen::Index d = centered.cols();
  const double denom = static_cast<double>(std::max<Eigen::Index>(centered.rows() - 1, 1));
  SeedableRng rng(0x9ca5eedULL);
  Eigen::MatrixXd q(d, static_cast<Eigen::Index>(h));
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = rng.normal();
  q = Eigen::HouseholderQR<Eigen::MatrixXd>(q).householderQ() * Eigen::MatrixXd::Identity(d, q.cols());
  for (std::size_t it = 0; it < opt.max_power_iterations; ++it) {
    Eigen::MatrixXd z = centered.transpose() * (centered * q) / denom;
    Eigen::MatrixXd next =
        Eigen::HouseholderQR<Eigen::MatrixXd>(z).householderQ() * Eigen::MatrixXd::Identity(d, q.cols());
    // Subspace distance via projection residual.
    const double change = (next - q * (q.transpose() * next)).norm();
    q = std::move(next);
    if (change < opt.power_tolerance * std::sqrt(static_cast<double>(h))) break;
  }
  // Rayleigh-Ritz inside the converged subspace.
  Eigen::MatrixXd small = q.transpose() * (centered.transpose() * (centered * q)) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(small);
  vectors = q * eig.eigenvectors().rowwise().reverse();
  values = eig.eigenvalues().reverse();
}

}  // namespace

PcaModel pca_fit(const Matrix& points, std::size_t h, const PcaOptions& options) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (h < 1 || h > std::min(n, d)) {
    throw ArgumentError("pca: h=" + std::to_string(h) + " outside [1, min(n, d)]");
  }
  if (!points.all_finite()) throw ArgumentError("pca: non-finite input");
  const auto x = as_eigen(points);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMatrix centered = x.rowwise() - mean;
  const double denom = static_cast<double>(std::max<std::size_t>(n - 1, 1));

  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  if (d > options.power_iteration_threshold) {
    top_eigen_subspace(centered, h, options, vectors, values);
  } else {
    const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues ascend; take the last h.
    vectors = eig.eigenvectors().rightCols(static_cast<Eigen::Index>(h)).rowwise().reverse();
    values = eig.eigenvalues().tail(static_cast<Eigen::Index>(h)).reverse();
  }

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + d);
  model.components = Matrix(h, d);
  for (std::size_t c = 0; c < h; ++c) {
    Eigen::VectorXd v = vectors.col(static_cast<Eigen::Index>(c));
    fix_sign(v);
    for (std::size_t j = 0; j < d; ++j) model.components(c, j) = v[static_cast<Eigen::Index>(j)];
    model.explained_variance.push_back(std::max(0.0, values[static_cast<Eigen::Index>(c)]));
  }
  return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& points) {
  const std::size_t d = model.mean.size();
  if (points.cols() != d) throw ArgumentError("pca_transform: dimension mismatch");
  const std::size_t h = model.components.rows();
  Matrix out(points.rows(), h);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto row = points.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - model.mean[j];
    for (std::size_t c = 0; c < h; ++c) {
      auto comp = model.components.row(c);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += comp[j] * centered[j];
      out(i, c) = s;
    }
  }
  return out;
}

void GmmParams::validate(double weight_tol) const {
  const std::size_t k = weights.size();
  if (k == 0) throw ArgumentError("gmm: no components");
  if (means.rows() != k) throw ArgumentError("gmm: means rows do not match k");
  if (means.cols() == 0) throw ArgumentError("gmm: zero dimension");
  if (variances.rows() != k || (variances.cols() != 1 && variances.cols() != means.cols())) {
    throw ArgumentError("gmm: variances must be k x 1 or k x dim");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ArgumentError("gmm: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > weight_tol) {
    throw ArgumentError("gmm: weights sum to " + std::to_string(total) + ", not 1");
  }
  if (!means.all_finite()) throw ArgumentError("gmm: non-finite mean");
  for (double v : variances.data()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("gmm: variances must be positive");
  }
}

double component_log_density(const GmmParams& gmm, std::size_t c, std::span<const double> x) {
  constexpr double log_2pi = 1.8378770664093454836;
  auto mu = gmm.means.row(c);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double var = gmm.variance(c, j);
    const double diff = x[j] - mu[j];
    s += diff * diff / var + std::log(var) + log_2pi;
  }
  return -0.5 * s;
}

namespace {

double log_sum_exp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

// Returns total log-likelihood; fills responsibilities (n x k).
double e_step(const GmmParams& gmm, const Matrix& points, Matrix& resp) {
  const std::size_t k = gmm.k();
  std::vector<double> lp(k);
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      lp[c] = std::log(gmm.weights[c]) + component_log_density(gmm, c, points.row(i));
    }
    const double norm = log_sum_exp(lp);
    total += norm;
    for (std::size_t c = 0; c < k; ++c) resp(i, c) = std::exp(lp[c] - norm);
  }
  return total;
}

// Fills means/variances of component c from weighted points; returns mass.
double m_step_component(const Matrix& points, const Matrix& resp, std::size_t c,
                        const GmmConfig& config, GmmParams& gmm) {
  const std::size_t d = points.cols();
  double mass = 0.0;
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double r = resp(i, c);
    mass += r;
    auto x = points.row(i);
    for (std::size_t j = 0; j < d; ++j) mu[j] += r * x[j];
  }
  if (!(mass > 0.0)) return 0.0;
  for (double& v : mu) v /= mass;
  std::vector<double> var(d, 0.0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double r = resp(i, c);
    auto x = points.row(i);
    for (std::size_t j = 0; j < d; ++j) var[j] += r * (x[j] - mu[j]) * (x[j] - mu[j]);
  }
  std::copy(mu.begin(), mu.end(), gmm.means.row(c).begin());
  if (config.covariance == CovarianceKind::spherical) {
    double total = 0.0;
    for (double v : var) total += v;
    gmm.variances(c, 0) = std::max(config.var_floor, total / (mass * static_cast<double>(d)));
  } else {
    for (std::size_t j = 0; j < d; ++j) gmm.variances(c, j) = std::max(config.var_floor, var[j] / mass);
  }
  return mass;
}

std::vector<std::size_t> kmeans_pp_centers(const Matrix& points, std::size_t k, SeedableRng& rng) {
  const std::size_t n = points.rows();
  std::vector<std::size_t> centers{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), points.row(centers[0]));
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        if (u < d2[pick]) break;
        u -= d2[pick];
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    centers.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), points.row(pick)));
    }
  }
  return centers;
}

std::size_t farthest_point(const Matrix& points, const Matrix& means, std::size_t skip) {
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means.rows(); ++c) {
      if (c != skip) nearest = std::min(nearest, squared_distance(points.row(i), means.row(c)));
    }
    if (nearest > best_d) {
      best_d = nearest;
      best = i;
    }
  }
  return best;
}

}  // namespace

GmmFit gmm_fit(const Matrix& points, std::size_t k, std::uint64_t seed, const GmmConfig& config) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (k == 0 || n < k) throw ArgumentError("gmm_fit: need 1 <= k <= n");
  if (!points.all_finite()) throw ArgumentError("gmm_fit: non-finite input");

  GmmFit fit;
  GmmParams& gmm = fit.params;
  gmm.weights.assign(k, 1.0 / static_cast<double>(k));
  gmm.means = Matrix(k, d);
  gmm.variances = Matrix(k, config.covariance == CovarianceKind::spherical ? 1 : d, 1.0);

  // Hard k-means++ assignment seeds the first M-step.
  SeedableRng rng(seed);
  const auto centers = kmeans_pp_centers(points, k, rng);
  Matrix resp(n, k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double dd = squared_distance(points.row(i), points.row(centers[c]));
      if (dd < best_d) {
        best_d = dd;
        best = c;
      }
    }
    resp(i, best) = 1.0;
  }

  const double min_mass = 1e-8;
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0;; ++iter) {
    // M-step.
    for (std::size_t c = 0; c < k; ++c) {
      const double mass = m_step_component(points, resp, c, config, gmm);
      gmm.weights[c] = mass / static_cast<double>(n);
      if (mass < min_mass) {
        const std::size_t p = farthest_point(points, gmm.means, c);
        std::copy(points.row(p).begin(), points.row(p).end(), gmm.means.row(c).begin());
        for (double& v : gmm.variances.row(c)) v = 1.0;
        gmm.weights[c] = 1.0 / static_cast<double>(n);
        ++fit.reseeded;
      }
    }
    double wsum = 0.0;
    for (double w : gmm.weights) wsum += w;
    for (double& w : gmm.weights) w /= wsum;

    if (iter >= config.max_iter) break;
    const double ll = e_step(gmm, points, resp);
    fit.log_likelihood.push_back(ll);
    fit.iterations = iter + 1;
    if (std::isfinite(previous) && std::abs(ll - previous) <= config.tol * std::abs(previous)) {
      fit.converged = true;
      break;
    }
    previous = ll;
  }
  return fit;
}

double log_likelihood(const GmmParams& gmm, const Matrix& points) {
  Matrix resp(points.rows(), gmm.k());
  return e_step(gmm, points, resp);
}

std::size_t assign(const GmmParams& gmm, std::span<const double> x, bool use_weights) {
  if (x.size() != gmm.dim()) throw ArgumentError("assign: dimension mismatch");
  std::size_t best = 0;
  double best_lp = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < gmm.k(); ++c) {
    double lp = component_log_density(gmm, c, x);
    if (use_weights) lp += std::log(gmm.weights[c]);
    if (lp > best_lp) {
      best_lp = lp;
      best = c;
    }
  }
  return best;
}

std::vector<int> assign_all(const GmmParams& gmm, const Matrix& points, bool use_weights) {
  std::vector<int> out(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    out[i] = static_cast<int>(assign(gmm, points.row(i), use_weights));
  }
  return out;
}

Matrix rescale(const Matrix& points, const GmmParams& gmm, const RescaleConfig& config) {
  if (!(config.s >= 0.0)) throw ArgumentError("rescale: s must be non-negative");
  if (points.cols() != gmm.dim()) throw ArgumentError("rescale: dimension mismatch");
  // One translation vector per component, shared bitwise by its members.
  Matrix shift(gmm.k(), gmm.dim());
  for (std::size_t c = 0; c < gmm.k(); ++c) {
    for (std::size_t j = 0; j < gmm.dim(); ++j) shift(c, j) = config.s * gmm.means(c, j);
  }
  Matrix out = points;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const std::size_t c = assign(gmm, points.row(i), config.use_weights);
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += shift(c, j);
  }
  return out;
}

}  // namespace hcembed

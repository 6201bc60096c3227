#pragma once

// Euclidean embedding utilities: PCA projection, spherical/diagonal GMM
// fitting by EM, likelihood-based assignment and the mean rescaling
// transform x'' = x' + s * mu_{assign(x')}.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hcembed/core.hpp"

namespace hcembed {

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // h x d, orthonormal rows
  std::vector<double> explained_variance;
};

struct PcaOptions {
  /// Above this dimension the covariance is never formed; the top components
  /// come from orthogonal (subspace) iteration instead.
  std::size_t power_iteration_threshold = 2000;
  std::size_t max_power_iterations = 1000;
  double power_tolerance = 1e-12;
};

/// Principal directions of the centered data, largest variance first. Each
/// component is signed so that its largest-magnitude entry is positive.
/// Throws ArgumentError unless 1 <= h <= min(n, d).
PcaModel pca_fit(const Matrix& points, std::size_t h, const PcaOptions& options = {});
Matrix pca_transform(const PcaModel& model, const Matrix& points);

enum class CovarianceKind { spherical, diagonal };

struct GmmParams {
  std::vector<double> weights;
  Matrix means;      // k x dim
  Matrix variances;  // k x dim (diagonal) or k x 1 (spherical)

  std::size_t k() const { return weights.size(); }
  std::size_t dim() const { return means.cols(); }
  CovarianceKind kind() const {
    return variances.cols() == 1 && dim() != 1 ? CovarianceKind::spherical : CovarianceKind::diagonal;
  }
  double variance(std::size_t c, std::size_t j) const {
    return variances.cols() == 1 ? variances(c, 0) : variances(c, j);
  }
  /// Throws ArgumentError on shape mismatch, non-positive weights or
  /// variances, or weights not summing to 1 within `weight_tol`.
  void validate(double weight_tol = 1e-6) const;
};

struct GmmConfig {
  CovarianceKind covariance = CovarianceKind::spherical;
  double tol = 1e-6;  // relative log-likelihood improvement
  std::size_t max_iter = 300;
  double var_floor = 1e-6;
};

struct GmmFit {
  GmmParams params;
  /// Log-likelihood of the data under the parameters entering each EM step.
  std::vector<double> log_likelihood;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t reseeded = 0;
};

/// EM from a k-means++ start. A component whose responsibility mass
/// collapses is re-seeded at the point farthest from every current mean.
GmmFit gmm_fit(const Matrix& points, std::size_t k, std::uint64_t seed, const GmmConfig& config = {});

double component_log_density(const GmmParams& gmm, std::size_t c, std::span<const double> x);
double log_likelihood(const GmmParams& gmm, const Matrix& points);

/// argmax_c p(x | mu_c, sigma_c^2 I), ignoring mixing weights unless
/// `use_weights`. Ties go to the smallest index.
std::size_t assign(const GmmParams& gmm, std::span<const double> x, bool use_weights = false);
std::vector<int> assign_all(const GmmParams& gmm, const Matrix& points, bool use_weights = false);

struct RescaleConfig {
  double s = 3.0;
  bool use_weights = false;
};

/// Translates each point by s times the mean of its assigned component.
Matrix rescale(const Matrix& points, const GmmParams& gmm, const RescaleConfig& config = {});

}  // namespace hcembed

#pragma once

// Experiment protocols: data generation or ingestion, embedding, clustering
// and evaluation over repeated subsamples, plus the separation sweep and the
// linkage comparison. Every output is a function of (config, seed) only.
//
// Config JSON (all keys optional, unknown keys rejected):
//   seed, threads, linkage, level_weights ("summed" | "deepest"),
//   data      { source ("btgm" | "external"), height, margin, expansion, dim,
//               stddev, per_cluster, shift { enabled, count, rotation },
//               embedding_file, labels_file }
//   embedding { method ("none" | "pca" | "rescale" | "pca+rescale" |
//               "external" | "external+rescale"), dim, s, use_weights,
//               covariance ("spherical" | "diagonal"), gmm_file, gmm_k }
//   eval      { sample_size (0 = whole pool), repeats, fresh_data }
//   sweep     { margins [..], trials }

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hcembed/btgm.hpp"
#include "hcembed/core.hpp"
#include "hcembed/embed.hpp"
#include "hcembed/linkage.hpp"
#include "hcembed/metrics.hpp"

namespace hcembed {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

enum class EmbeddingMethod { none, pca, rescale, pca_rescale, external, external_rescale };

std::string_view to_string(EmbeddingMethod method);
EmbeddingMethod parse_embedding_method(std::string_view name);

struct ShiftConfig {
  bool enabled = true;
  std::optional<std::size_t> count;     // default k/2
  std::optional<std::size_t> rotation;  // default floor(d/2)
};

struct DataConfig {
  std::string source = "btgm";
  BtgmSpec btgm;
  double stddev = 1.0;
  std::size_t per_cluster = 250;
  ShiftConfig shift;
  std::string embedding_file;
  std::string labels_file;
};

struct EmbeddingConfig {
  EmbeddingMethod method = EmbeddingMethod::none;
  std::size_t dim = 3;  // PCA target dimension
  double s = 3.0;
  bool use_weights = false;
  CovarianceKind covariance = CovarianceKind::spherical;
  std::string gmm_file;
  std::size_t gmm_k = 0;  // 0: number of ground-truth classes
};

struct EvalConfig {
  std::size_t sample_size = 1000;
  std::size_t repeats = 100;
  bool fresh_data = false;
};

struct SweepConfig {
  std::vector<double> margins{0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  std::size_t trials = 50;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  LinkageMethod linkage = LinkageMethod::ward;
  LevelWeightMode level_weights = LevelWeightMode::summed;
  DataConfig data;
  EmbeddingConfig embedding;
  EvalConfig eval;
  SweepConfig sweep;

  /// Throws ConfigError on any invariant violation.
  void validate() const;
};

/// Throws ConfigError on malformed JSON, wrong types or unknown keys.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved config, every field present.
std::string format_config(const ExperimentConfig& config);

/// Means of the configured BTGM, shifted when enabled.
Matrix configured_means(const DataConfig& data);

/// Evaluation pool: a BTGM sample (per_cluster points per component) or the
/// external embedding with its labels.
Dataset generate_pool(const ExperimentConfig& config, std::uint64_t data_seed);

struct EmbeddedPool {
  Matrix points;
  std::optional<GmmParams> gmm;
};

/// Applies the configured embedding to the whole pool. External methods
/// expect `pool` to be the ingested embedding already.
EmbeddedPool embed_pool(const Dataset& pool, const ExperimentConfig& config, std::uint64_t fit_seed);

struct RunMetrics {
  std::size_t run = 0;
  std::size_t n = 0;
  double dendrogram_purity = 0.0;
  double moseley_wang = 0.0;
  double mw_opt = 0.0;
  double mw_ratio = 0.0;
  double dasgupta = 0.0;
  double cut_accuracy = 0.0;
  bool recovered = false;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population (ddof = 0)
};

Aggregate summarize(const std::vector<double>& values);

/// Metrics of one tree against the subsample's labels.
RunMetrics evaluate_tree(const Dendrogram& tree, const Dataset& sample, LevelWeightMode mode);

struct PipelineReport {
  ExperimentConfig config;
  std::size_t pool_size = 0;
  std::size_t pool_dim = 0;
  std::size_t classes = 0;
  std::vector<RunMetrics> runs;  // ordered by run index

  Aggregate aggregate(double RunMetrics::*field) const;
  double recovery_rate() const;
};

PipelineReport run_pipeline(const ExperimentConfig& config);

std::string format_results_json(const PipelineReport& report);
std::string format_runs_csv(const PipelineReport& report);
/// Writes results.json and runs.csv into `dir` (created if missing).
void write_pipeline_outputs(const PipelineReport& report, const std::filesystem::path& dir);

struct SweepRow {
  double margin = 0.0;
  double nearest_distance = 0.0;  // 2m before shifting
  Aggregate dp;
  double recovery_rate = 0.0;
  std::size_t trials = 0;
};

/// For each margin: fresh BTGM samples, cluster the whole sample, cut at k.
std::vector<SweepRow> run_recovery_sweep(const ExperimentConfig& config);
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

struct LinkageRow {
  LinkageMethod method = LinkageMethod::ward;
  Aggregate dp;
  Aggregate mw_ratio;
};

/// Every linkage method on identical subsamples of one embedded pool.
std::vector<LinkageRow> run_linkage_comparison(const ExperimentConfig& config);
std::string format_linkage_csv(const std::vector<LinkageRow>& rows);

struct RecoveryResult {
  std::size_t trials = 0;
  std::size_t recovered = 0;
  double rate() const { return trials ? static_cast<double>(recovered) / static_cast<double>(trials) : 0.0; }
};

/// Monte Carlo exact recovery: each trial samples `per_component` points from
/// every component, clusters, and compares the k-cut with the components.
/// With `btgm_height`, a trial counts only if every level l recovers: the
/// cut at 2^l equals the level-l labels.
RecoveryResult recovery_trials(const MixtureSpec& mixture, std::size_t per_component, std::size_t trials,
                               std::uint64_t seed, LinkageMethod method = LinkageMethod::ward,
                               std::optional<int> btgm_height = std::nullopt, std::size_t threads = 1);

/// Runs fn(0..count-1) on up to `threads` workers; rethrows the first error.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace hcembed

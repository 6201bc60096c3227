#include "hcembed/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "hcembed/io.hpp"
#include "hcembed/rng.hpp"
#include "json.hpp"

namespace hcembed {

namespace {

using json = nlohmann::ordered_json;

// Stream ids for SeedableRng::stream; each consumer of the master seed owns one.
constexpr std::uint64_t kDataStream = 11;
constexpr std::uint64_t kFitStream = 12;
constexpr std::uint64_t kSubsampleStream = 13;
constexpr std::uint64_t kRecoveryStream = 14;
constexpr std::uint64_t kSweepStreamBase = 1000;

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return SeedableRng::stream(seed, stream, index).next_u64();
}

// Reads keys of one JSON object and rejects any key it was never asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        throw ConfigError(name(key) + " has the wrong type");
      }
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    if (const json* v = find(key)) {
      T value{};
      get(key, value);
      out = value;
    }
  }

  template <class Parse>
  void get_enum(const char* key, Parse parse) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(name(key) + " must be a string");
      try {
        parse(v->get<std::string>());
      } catch (const ArgumentError& e) {
        throw ConfigError(name(key) + ": " + e.what());
      }
    }
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string name(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown config key " + path_ + "." + item.key());
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

CovarianceKind parse_covariance(std::string_view name) {
  if (name == "spherical") return CovarianceKind::spherical;
  if (name == "diagonal") return CovarianceKind::diagonal;
  throw ArgumentError("unknown covariance '" + std::string(name) + "'");
}

LevelWeightMode parse_weight_mode(std::string_view name) {
  if (name == "summed") return LevelWeightMode::summed;
  if (name == "deepest") return LevelWeightMode::deepest;
  throw ArgumentError("unknown level weight mode '" + std::string(name) + "'");
}

bool uses_gmm(EmbeddingMethod m) {
  return m == EmbeddingMethod::rescale || m == EmbeddingMethod::pca_rescale ||
         m == EmbeddingMethod::external_rescale;
}

bool is_external(EmbeddingMethod m) {
  return m == EmbeddingMethod::external || m == EmbeddingMethod::external_rescale;
}

std::size_t class_count(const Dataset& d) {
  std::size_t k = 0;
  dense_labels(*d.flat_labels, &k);
  return k;
}

json aggregate_json(const Aggregate& a) { return json{{"mean", a.mean}, {"std", a.std}}; }

}  // namespace

std::string_view to_string(EmbeddingMethod method) {
  switch (method) {
    case EmbeddingMethod::none: return "none";
    case EmbeddingMethod::pca: return "pca";
    case EmbeddingMethod::rescale: return "rescale";
    case EmbeddingMethod::pca_rescale: return "pca+rescale";
    case EmbeddingMethod::external: return "external";
    case EmbeddingMethod::external_rescale: return "external+rescale";
  }
  return "?";
}

EmbeddingMethod parse_embedding_method(std::string_view name) {
  for (auto m : {EmbeddingMethod::none, EmbeddingMethod::pca, EmbeddingMethod::rescale,
                 EmbeddingMethod::pca_rescale, EmbeddingMethod::external, EmbeddingMethod::external_rescale}) {
    if (to_string(m) == name) return m;
  }
  throw ArgumentError("unknown embedding method '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (data.source == "btgm") {
    try {
      data.btgm.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("data: ") + e.what());
    }
    if (!(data.stddev > 0.0) || !std::isfinite(data.stddev)) throw ConfigError("data.stddev must be positive");
    if (data.per_cluster < 1) throw ConfigError("data.per_cluster must be at least 1");
    if (data.shift.count && *data.shift.count > data.btgm.components()) {
      throw ConfigError("data.shift.count exceeds the number of components");
    }
    if (data.shift.rotation && *data.shift.rotation >= data.btgm.dim) {
      throw ConfigError("data.shift.rotation must be below data.dim");
    }
    if (is_external(embedding.method)) throw ConfigError("external embedding methods need data.source = external");
  } else if (data.source == "external") {
    if (data.embedding_file.empty()) throw ConfigError("data.embedding_file is required for external data");
    if (!is_external(embedding.method)) {
      throw ConfigError("external data needs embedding.method external or external+rescale");
    }
  } else {
    throw ConfigError("data.source must be 'btgm' or 'external'");
  }
  if (embedding.method == EmbeddingMethod::pca || embedding.method == EmbeddingMethod::pca_rescale) {
    if (embedding.dim < 1) throw ConfigError("embedding.dim must be at least 1");
  }
  if (!(embedding.s >= 0.0) || !std::isfinite(embedding.s)) throw ConfigError("embedding.s must be >= 0");
  if (eval.repeats < 1) throw ConfigError("eval.repeats must be at least 1");
  if (sweep.trials < 1) throw ConfigError("sweep.trials must be at least 1");
  if (sweep.margins.empty()) throw ConfigError("sweep.margins must not be empty");
  for (double m : sweep.margins) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("sweep.margins must be finite and >= 0");
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  ObjectReader top(root, "config");
  top.get("seed", cfg.seed);
  top.get("threads", cfg.threads);
  top.get_enum("linkage", [&](const std::string& s) { cfg.linkage = parse_linkage(s); });
  top.get_enum("level_weights", [&](const std::string& s) { cfg.level_weights = parse_weight_mode(s); });

  if (const json* d = top.find("data")) {
    ObjectReader r(*d, "data");
    r.get("source", cfg.data.source);
    r.get("height", cfg.data.btgm.height);
    r.get("margin", cfg.data.btgm.margin);
    r.get("expansion", cfg.data.btgm.expansion);
    r.get("dim", cfg.data.btgm.dim);
    r.get("stddev", cfg.data.stddev);
    r.get("per_cluster", cfg.data.per_cluster);
    r.get("embedding_file", cfg.data.embedding_file);
    r.get("labels_file", cfg.data.labels_file);
    if (const json* s = r.find("shift")) {
      ObjectReader sr(*s, "data.shift");
      sr.get("enabled", cfg.data.shift.enabled);
      sr.get("count", cfg.data.shift.count);
      sr.get("rotation", cfg.data.shift.rotation);
      sr.finish();
    }
    r.finish();
  }
  if (const json* e = top.find("embedding")) {
    ObjectReader r(*e, "embedding");
    r.get_enum("method", [&](const std::string& s) { cfg.embedding.method = parse_embedding_method(s); });
    r.get("dim", cfg.embedding.dim);
    r.get("s", cfg.embedding.s);
    r.get("use_weights", cfg.embedding.use_weights);
    r.get_enum("covariance", [&](const std::string& s) { cfg.embedding.covariance = parse_covariance(s); });
    r.get("gmm_file", cfg.embedding.gmm_file);
    r.get("gmm_k", cfg.embedding.gmm_k);
    r.finish();
  }
  if (const json* e = top.find("eval")) {
    ObjectReader r(*e, "eval");
    r.get("sample_size", cfg.eval.sample_size);
    r.get("repeats", cfg.eval.repeats);
    r.get("fresh_data", cfg.eval.fresh_data);
    r.finish();
  }
  if (const json* s = top.find("sweep")) {
    ObjectReader r(*s, "sweep");
    r.get("margins", cfg.sweep.margins);
    r.get("trials", cfg.sweep.trials);
    r.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_text(path)); }

std::string format_config(const ExperimentConfig& c) {
  json shift{{"enabled", c.data.shift.enabled}};
  if (c.data.source == "btgm") {
    shift["count"] = c.data.shift.count.value_or(c.data.btgm.components() / 2);
    shift["rotation"] = c.data.shift.rotation.value_or(c.data.btgm.dim / 2);
  }
  json j{
      {"seed", c.seed},
      {"threads", c.threads},
      {"linkage", std::string(to_string(c.linkage))},
      {"level_weights", c.level_weights == LevelWeightMode::summed ? "summed" : "deepest"},
      {"data",
       {{"source", c.data.source},
        {"height", c.data.btgm.height},
        {"margin", c.data.btgm.margin},
        {"expansion", c.data.btgm.expansion},
        {"dim", c.data.btgm.dim},
        {"stddev", c.data.stddev},
        {"per_cluster", c.data.per_cluster},
        {"shift", shift},
        {"embedding_file", c.data.embedding_file},
        {"labels_file", c.data.labels_file}}},
      {"embedding",
       {{"method", std::string(to_string(c.embedding.method))},
        {"dim", c.embedding.dim},
        {"s", c.embedding.s},
        {"use_weights", c.embedding.use_weights},
        {"covariance", c.embedding.covariance == CovarianceKind::spherical ? "spherical" : "diagonal"},
        {"gmm_file", c.embedding.gmm_file},
        {"gmm_k", c.embedding.gmm_k}}},
      {"eval",
       {{"sample_size", c.eval.sample_size}, {"repeats", c.eval.repeats}, {"fresh_data", c.eval.fresh_data}}},
      {"sweep", {{"margins", c.sweep.margins}, {"trials", c.sweep.trials}}},
  };
  return j.dump(2) + "\n";
}

Matrix configured_means(const DataConfig& data) {
  Matrix means = btgm_means(data.btgm);
  if (!data.shift.enabled) return means;
  const std::size_t count = data.shift.count.value_or(data.btgm.components() / 2);
  const std::size_t rotation = data.shift.rotation.value_or(data.btgm.dim / 2);
  return shift_means(means, count, rotation);
}

Dataset generate_pool(const ExperimentConfig& config, std::uint64_t data_seed) {
  if (config.data.source == "btgm") {
    const auto mixture = MixtureSpec::uniform(configured_means(config.data), config.data.stddev);
    const std::vector<std::size_t> counts(mixture.k(), config.data.per_cluster);
    return sample_counts(mixture, counts, data_seed, config.data.btgm.height);
  }
  const Embedding emb = read_embedding(config.data.embedding_file);
  Dataset pool;
  pool.points = emb.to_matrix();
  if (!config.data.labels_file.empty()) {
    LabelTable table = read_labels(config.data.labels_file);
    pool.flat_labels = std::move(table.flat);
    pool.level_labels = std::move(table.levels);
  } else if (emb.labels) {
    pool.flat_labels = emb.labels;
  } else {
    throw ConfigError("external data needs labels: set data.labels_file or embed them in the EMB1 file");
  }
  if (pool.flat_labels->size() != pool.size()) {
    throw ConfigError("label count " + std::to_string(pool.flat_labels->size()) + " does not match " +
                      std::to_string(pool.size()) + " embedded points");
  }
  pool.validate();
  return pool;
}

EmbeddedPool embed_pool(const Dataset& pool, const ExperimentConfig& config, std::uint64_t fit_seed) {
  const EmbeddingConfig& ec = config.embedding;
  EmbeddedPool out{pool.points, std::nullopt};
  if (ec.method == EmbeddingMethod::pca || ec.method == EmbeddingMethod::pca_rescale) {
    if (ec.dim > std::min(pool.size(), pool.dim())) {
      throw ConfigError("embedding.dim exceeds min(n, d) of the data");
    }
    out.points = pca_transform(pca_fit(pool.points, ec.dim), pool.points);
  }
  if (!uses_gmm(ec.method)) return out;

  if (!ec.gmm_file.empty()) {
    out.gmm = read_gmm(ec.gmm_file);
    if (out.gmm->dim() != out.points.cols()) {
      throw ConfigError("GMM dimension " + std::to_string(out.gmm->dim()) + " does not match embedding dimension " +
                        std::to_string(out.points.cols()));
    }
  } else {
    const std::size_t k = ec.gmm_k ? ec.gmm_k : class_count(pool);
    GmmConfig gc;
    gc.covariance = ec.covariance;
    out.gmm = gmm_fit(out.points, k, fit_seed, gc).params;
  }
  out.points = rescale(out.points, *out.gmm, RescaleConfig{ec.s, ec.use_weights});
  return out;
}

Aggregate summarize(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / static_cast<double>(values.size()));
  return a;
}

RunMetrics evaluate_tree(const Dendrogram& tree, const Dataset& sample, LevelWeightMode mode) {
  if (!sample.flat_labels) throw ConfigError("evaluation needs ground-truth labels");
  std::size_t k = 0;
  const std::vector<int> truth = dense_labels(*sample.flat_labels, &k);
  const LevelLabels levels = sample.level_labels ? *sample.level_labels : flat_as_levels(truth);

  RunMetrics m;
  m.n = sample.size();
  m.dendrogram_purity = dendrogram_purity(tree, truth).value;
  const WeightFunction w = level_weights(levels, mode);
  m.moseley_wang = moseley_wang(tree, w);
  m.dasgupta = dasgupta_cost(tree, w);
  m.mw_opt = mw_opt(levels, mode);
  if (!(m.mw_opt > 0.0)) throw NumericError("MW optimum is zero: the sample has no similar pair");
  m.mw_ratio = m.moseley_wang / m.mw_opt;
  const std::vector<int> predicted = cut(tree, k);
  m.cut_accuracy = matching_accuracy(predicted, truth);
  m.recovered = same_partition(predicted, truth);
  return m;
}

Aggregate PipelineReport::aggregate(double RunMetrics::*field) const {
  std::vector<double> v;
  v.reserve(runs.size());
  for (const auto& r : runs) v.push_back(r.*field);
  return summarize(v);
}

double PipelineReport::recovery_rate() const {
  if (runs.empty()) return 0.0;
  const auto hits = std::count_if(runs.begin(), runs.end(), [](const RunMetrics& r) { return r.recovered; });
  return static_cast<double>(hits) / static_cast<double>(runs.size());
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

// Pool, embedding and per-repeat subsamples shared by the pipeline and the
// linkage comparison.
class RepeatSource {
 public:
  explicit RepeatSource(const ExperimentConfig& config)
      : config_(config),
        fresh_(config.eval.fresh_data && config.data.source == "btgm"),
        pool_(generate_pool(config, derived_seed(config.seed, kDataStream, 0))),
        embedded_(embed_pool(pool_, config, derived_seed(config.seed, kFitStream, 0)).points) {
    sample_size_ = config.eval.sample_size ? config.eval.sample_size : pool_.size();
    if (sample_size_ > pool_.size()) {
      throw ConfigError("eval.sample_size " + std::to_string(sample_size_) + " exceeds pool size " +
                        std::to_string(pool_.size()));
    }
    if (sample_size_ < 2) throw ConfigError("eval.sample_size must be at least 2");
  }

  const Dataset& pool() const { return pool_; }
  std::size_t embedded_dim() const { return embedded_.cols(); }

  /// Subsample for repeat r, carrying embedded points and ground-truth labels.
  Dataset sample(std::size_t r) const {
    Dataset own_pool;
    Matrix own_points;
    const Dataset* pool = &pool_;
    const Matrix* points = &embedded_;
    if (fresh_ && r > 0) {
      own_pool = generate_pool(config_, derived_seed(config_.seed, kDataStream, r));
      own_points = embed_pool(own_pool, config_, derived_seed(config_.seed, kFitStream, r)).points;
      pool = &own_pool;
      points = &own_points;
    }
    SeedableRng rng = SeedableRng::stream(config_.seed, kSubsampleStream, r);
    auto idx = rng.sample_without_replacement(pool->size(), sample_size_);
    std::sort(idx.begin(), idx.end());
    Dataset s;
    s.points = points->select_rows(idx);
    s.flat_labels = std::vector<int>();
    for (std::size_t i : idx) s.flat_labels->push_back((*pool->flat_labels)[i]);
    if (pool->level_labels) s.level_labels = pool->level_labels->select_rows(idx);
    return s;
  }

 private:
  const ExperimentConfig& config_;
  bool fresh_;
  Dataset pool_;
  Matrix embedded_;
  std::size_t sample_size_ = 0;
};

}  // namespace

PipelineReport run_pipeline(const ExperimentConfig& config) {
  config.validate();
  RepeatSource source(config);
  PipelineReport report;
  report.config = config;
  report.pool_size = source.pool().size();
  report.pool_dim = source.embedded_dim();
  report.classes = class_count(source.pool());
  report.runs.resize(config.eval.repeats);
  parallel_for(config.eval.repeats, config.threads, [&](std::size_t r) {
    const Dataset s = source.sample(r);
    if (!s.points.all_finite()) throw NumericError("embedded points are not finite");
    RunMetrics m = evaluate_tree(cluster(s.points, config.linkage), s, config.level_weights);
    m.run = r;
    report.runs[r] = m;
  });
  return report;
}

std::string format_results_json(const PipelineReport& report) {
  json runs = json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"run", r.run},
                    {"n", r.n},
                    {"dendrogram_purity", r.dendrogram_purity},
                    {"moseley_wang", r.moseley_wang},
                    {"mw_opt", r.mw_opt},
                    {"mw_ratio", r.mw_ratio},
                    {"dasgupta", r.dasgupta},
                    {"cut_accuracy", r.cut_accuracy},
                    {"recovered", r.recovered}});
  }
  json j{
      {"config", json::parse(format_config(report.config))},
      {"pool", {{"n", report.pool_size}, {"dim", report.pool_dim}, {"classes", report.classes}}},
      {"summary",
       {{"dendrogram_purity", aggregate_json(report.aggregate(&RunMetrics::dendrogram_purity))},
        {"moseley_wang", aggregate_json(report.aggregate(&RunMetrics::moseley_wang))},
        {"mw_ratio", aggregate_json(report.aggregate(&RunMetrics::mw_ratio))},
        {"dasgupta", aggregate_json(report.aggregate(&RunMetrics::dasgupta))},
        {"cut_accuracy", aggregate_json(report.aggregate(&RunMetrics::cut_accuracy))},
        {"recovery_rate", report.recovery_rate()}}},
      {"runs", runs},
  };
  return j.dump(2) + "\n";
}

std::string format_runs_csv(const PipelineReport& report) {
  std::string out = "run,n,dendrogram_purity,moseley_wang,mw_opt,mw_ratio,dasgupta,cut_accuracy,recovered\n";
  for (const auto& r : report.runs) {
    out += std::to_string(r.run) + ',' + std::to_string(r.n) + ',' + format_double(r.dendrogram_purity) + ',' +
           format_double(r.moseley_wang) + ',' + format_double(r.mw_opt) + ',' + format_double(r.mw_ratio) + ',' +
           format_double(r.dasgupta) + ',' + format_double(r.cut_accuracy) + ',' + (r.recovered ? "1" : "0") +
           '\n';
  }
  return out;
}

void write_pipeline_outputs(const PipelineReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "results.json", format_results_json(report));
  write_text(dir / "runs.csv", format_runs_csv(report));
}

std::vector<SweepRow> run_recovery_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.data.source != "btgm") throw ConfigError("the separation sweep needs data.source = btgm");
  // Margin 0 must give identical means, which BtgmSpec rejects; scale unit-margin means instead.
  DataConfig unit = config.data;
  unit.btgm.margin = 1.0;
  const Matrix unit_means = configured_means(unit);
  const std::size_t grid = config.sweep.margins.size();
  const std::size_t trials = config.sweep.trials;

  std::vector<double> dp(grid * trials);
  std::vector<char> hit(grid * trials);
  parallel_for(grid * trials, config.threads, [&](std::size_t task) {
    const std::size_t g = task / trials;
    const std::size_t t = task % trials;
    Matrix means = unit_means;
    for (double& v : means.data()) v *= config.sweep.margins[g];
    const auto mixture = MixtureSpec::uniform(means, config.data.stddev);
    const std::vector<std::size_t> counts(mixture.k(), config.data.per_cluster);
    const Dataset ds = sample_counts(mixture, counts, derived_seed(config.seed, kSweepStreamBase + g, t));
    const Dendrogram tree = cluster(ds.points, config.linkage);
    dp[task] = dendrogram_purity(tree, *ds.flat_labels).value;
    hit[task] = same_partition(cut(tree, mixture.k()), *ds.flat_labels);
  });

  std::vector<SweepRow> rows;
  for (std::size_t g = 0; g < grid; ++g) {
    SweepRow row;
    row.margin = config.sweep.margins[g];
    row.nearest_distance = 2.0 * row.margin;
    row.dp = summarize(std::vector<double>(dp.begin() + g * trials, dp.begin() + (g + 1) * trials));
    row.recovery_rate =
        static_cast<double>(std::count(hit.begin() + g * trials, hit.begin() + (g + 1) * trials, 1)) /
        static_cast<double>(trials);
    row.trials = trials;
    rows.push_back(row);
  }
  return rows;
}

std::string format_sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "margin,nearest_distance,mean_dp,std_dp,recovery_rate,trials\n";
  for (const auto& r : rows) {
    out += format_double(r.margin) + ',' + format_double(r.nearest_distance) + ',' + format_double(r.dp.mean) +
           ',' + format_double(r.dp.std) + ',' + format_double(r.recovery_rate) + ',' + std::to_string(r.trials) +
           '\n';
  }
  return out;
}

std::vector<LinkageRow> run_linkage_comparison(const ExperimentConfig& config) {
  config.validate();
  RepeatSource source(config);
  const std::size_t methods = kAllLinkageMethods.size();
  const std::size_t repeats = config.eval.repeats;
  std::vector<RunMetrics> cells(methods * repeats);
  parallel_for(repeats, config.threads, [&](std::size_t r) {
    const Dataset s = source.sample(r);
    for (std::size_t m = 0; m < methods; ++m) {
      cells[m * repeats + r] = evaluate_tree(cluster(s.points, kAllLinkageMethods[m]), s, config.level_weights);
    }
  });
  std::vector<LinkageRow> rows;
  for (std::size_t m = 0; m < methods; ++m) {
    std::vector<double> dp, ratio;
    for (std::size_t r = 0; r < repeats; ++r) {
      dp.push_back(cells[m * repeats + r].dendrogram_purity);
      ratio.push_back(cells[m * repeats + r].mw_ratio);
    }
    rows.push_back({kAllLinkageMethods[m], summarize(dp), summarize(ratio)});
  }
  return rows;
}

std::string format_linkage_csv(const std::vector<LinkageRow>& rows) {
  std::string out = "method,mean_dp,std_dp,mean_mw_ratio,std_mw_ratio\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.method)) + ',' + format_double(r.dp.mean) + ',' + format_double(r.dp.std) + ',' +
           format_double(r.mw_ratio.mean) + ',' + format_double(r.mw_ratio.std) + '\n';
  }
  return out;
}

RecoveryResult recovery_trials(const MixtureSpec& mixture, std::size_t per_component, std::size_t trials,
                               std::uint64_t seed, LinkageMethod method, std::optional<int> btgm_height,
                               std::size_t threads) {
  mixture.validate();
  if (btgm_height && (std::size_t{1} << *btgm_height) != mixture.k()) {
    throw ArgumentError("recovery_trials: 2^height must equal the number of components");
  }
  const std::vector<std::size_t> counts(mixture.k(), per_component);
  std::vector<char> hit(trials, 0);
  parallel_for(trials, threads, [&](std::size_t t) {
    const Dataset ds = sample_counts(mixture, counts, derived_seed(seed, kRecoveryStream, t), btgm_height);
    const Dendrogram tree = cluster(ds.points, method);
    if (!btgm_height) {
      hit[t] = same_partition(cut(tree, mixture.k()), *ds.flat_labels);
      return;
    }
    bool all = true;
    for (int l = 1; l <= *btgm_height && all; ++l) {
      const auto truth = ds.level_labels->column(static_cast<std::size_t>(l - 1));
      all = same_partition(cut(tree, std::size_t{1} << l), truth);
    }
    hit[t] = all;
  });
  return {trials, static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1))};
}

}  // namespace hcembed

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "hcembed/harness.hpp"
#include "hcembed/io.hpp"
#include "json.hpp"

using namespace hcembed;

namespace {

// Small BTGM pipeline that runs in well under a second.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.seed = 5;
  c.data.btgm = BtgmSpec{2, 4.0, 2.0, 10};
  c.data.per_cluster = 40;
  c.eval.sample_size = 100;
  c.eval.repeats = 6;
  return c;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "hcembed_test_harness" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.seed == 0);
  CHECK(c.linkage == LinkageMethod::ward);
  CHECK(c.data.btgm.height == 3);
  CHECK(c.data.btgm.margin == 8.0);
  CHECK(c.data.btgm.expansion == 2.0);
  CHECK(c.data.btgm.dim == 100);
  CHECK(c.data.per_cluster == 250);
  CHECK(c.eval.sample_size == 1000);
  CHECK(c.eval.repeats == 100);
  CHECK(c.embedding.method == EmbeddingMethod::none);

  const auto j = nlohmann::json::parse(format_config(c));
  CHECK(j["data"]["shift"]["count"] == 4);
  CHECK(j["data"]["shift"]["rotation"] == 50);
}

TEST_CASE("config rejects bad input") {
  CHECK_THROWS_AS(parse_config("{\"sed\": 1}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"data\": {\"hieght\": 2}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"data\": {\"shift\": {\"on\": true}}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"seed\": \"x\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"linkage\": \"median\"}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"embedding\": {\"method\": \"tsne\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"data\": {\"dim\": 2}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"eval\": {\"repeats\": 0}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"sweep\": {\"margins\": [-1]}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"data\": {\"source\": \"external\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"embedding\": {\"method\": \"external\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1]"), ConfigError);
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
}

TEST_CASE("config round trip") {
  const std::string text = R"({
    "seed": 42, "threads": 3, "linkage": "average", "level_weights": "deepest",
    "data": {"height": 2, "margin": 3.5, "expansion": 4, "dim": 6, "stddev": 0.5,
             "per_cluster": 20, "shift": {"enabled": true, "count": 1, "rotation": 2}},
    "embedding": {"method": "pca+rescale", "dim": 2, "s": 1.5, "use_weights": true,
                  "covariance": "diagonal", "gmm_k": 3},
    "eval": {"sample_size": 50, "repeats": 7, "fresh_data": true},
    "sweep": {"margins": [0, 1], "trials": 4}
  })";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.linkage == LinkageMethod::average);
  CHECK(c.level_weights == LevelWeightMode::deepest);
  CHECK(c.data.btgm.expansion == 4.0);
  CHECK(c.data.shift.count == 1u);
  CHECK(c.embedding.method == EmbeddingMethod::pca_rescale);
  CHECK(c.embedding.covariance == CovarianceKind::diagonal);
  CHECK(c.eval.fresh_data);
  CHECK(c.sweep.margins == std::vector<double>{0.0, 1.0});
  const std::string formatted = format_config(c);
  CHECK(format_config(parse_config(formatted)) == formatted);
}

TEST_CASE("embedding method names") {
  for (auto m : {EmbeddingMethod::none, EmbeddingMethod::pca, EmbeddingMethod::rescale, EmbeddingMethod::pca_rescale,
                 EmbeddingMethod::external, EmbeddingMethod::external_rescale}) {
    CHECK(parse_embedding_method(to_string(m)) == m);
  }
}

TEST_CASE("summarize uses the population deviation") {
  const Aggregate a = summarize({1.0, 3.0});
  CHECK(a.mean == 2.0);
  CHECK(a.std == 1.0);
  CHECK(summarize({7.0}).std == 0.0);
}

TEST_CASE("whole-pool single repeat has zero spread") {
  ExperimentConfig c = small_config();
  c.eval.sample_size = 0;
  c.eval.repeats = 1;
  const PipelineReport r = run_pipeline(c);
  REQUIRE(r.runs.size() == 1);
  CHECK(r.runs[0].n == 160);
  CHECK(r.pool_size == 160);
  CHECK(r.classes == 4);
  CHECK(r.aggregate(&RunMetrics::dendrogram_purity).std == 0.0);
  CHECK(r.aggregate(&RunMetrics::mw_ratio).std == 0.0);
}

TEST_CASE("summary matches a recomputation from the run rows") {
  const PipelineReport r = run_pipeline(small_config());
  const auto rows = csv_rows(format_runs_csv(r));
  REQUIRE(rows.size() == 7);
  CHECK(rows[0][2] == "dendrogram_purity");
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i][2]);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / 6.0;
  const double sd = std::sqrt(std::max(0.0, sum_sq / 6.0 - mean * mean));
  const auto j = nlohmann::json::parse(format_results_json(r));
  CHECK(j["summary"]["dendrogram_purity"]["mean"].get<double>() == doctest::Approx(mean).epsilon(1e-12));
  CHECK(j["summary"]["dendrogram_purity"]["std"].get<double>() == doctest::Approx(sd).epsilon(1e-6));
  for (const auto& run : r.runs) {
    CHECK(run.mw_ratio <= 1.0 + 1e-12);
    CHECK(run.mw_ratio == doctest::Approx(run.moseley_wang / run.mw_opt));
    CHECK(run.n == 100);
  }
}

TEST_CASE("pipeline outputs are byte-identical across runs and thread counts") {
  ExperimentConfig c = small_config();
  c.embedding.method = EmbeddingMethod::pca_rescale;
  c.embedding.dim = 3;
  const auto a = temp_dir("a"), b = temp_dir("b");
  write_pipeline_outputs(run_pipeline(c), a);
  c.threads = 4;
  const PipelineReport threaded = run_pipeline(c);
  c.threads = 1;
  write_pipeline_outputs(run_pipeline(c), b);
  CHECK(read_text(a / "results.json") == read_text(b / "results.json"));
  CHECK(read_text(a / "runs.csv") == read_text(b / "runs.csv"));
  CHECK(format_runs_csv(threaded) == read_text(a / "runs.csv"));

  c.seed = 6;
  CHECK(format_runs_csv(run_pipeline(c)) != read_text(a / "runs.csv"));
}

TEST_CASE("fresh data changes later repeats only") {
  // Low margin, so trees are imperfect and depend on the exact points.
  ExperimentConfig c = small_config();
  c.data.btgm.margin = 1.0;
  const PipelineReport fixed = run_pipeline(c);
  c.eval.fresh_data = true;
  const PipelineReport fresh = run_pipeline(c);
  CHECK(fresh.runs[0].dendrogram_purity == fixed.runs[0].dendrogram_purity);
  CHECK(fresh.runs[0].moseley_wang == fixed.runs[0].moseley_wang);
  bool differs = false;
  for (std::size_t r = 1; r < fixed.runs.size(); ++r) differs |= fresh.runs[r].dendrogram_purity != fixed.runs[r].dendrogram_purity;
  CHECK(differs);
}

TEST_CASE("external embedding fixture") {
  const auto dir = temp_dir("external");
  // Two tight, distant blobs of 10 points each.
  Matrix m(20, 2);
  std::vector<int> labels;
  for (std::size_t i = 0; i < 20; ++i) {
    const double base = i < 10 ? 0.0 : 100.0;
    m(i, 0) = base + 0.01 * static_cast<double>(i % 10);
    m(i, 1) = base - 0.02 * static_cast<double>(i % 10);
    labels.push_back(i < 10 ? 7 : 3);
  }
  write_embedding(dir / "x.emb", Embedding::from_matrix(m, labels));

  ExperimentConfig c;
  c.data.source = "external";
  c.data.embedding_file = (dir / "x.emb").string();
  c.embedding.method = EmbeddingMethod::external;
  c.eval.sample_size = 0;
  c.eval.repeats = 1;
  PipelineReport r = run_pipeline(c);
  CHECK(r.classes == 2);
  CHECK(r.runs[0].dendrogram_purity == 1.0);
  CHECK(r.runs[0].mw_ratio == doctest::Approx(1.0));
  CHECK(r.runs[0].recovered);

  write_labels(dir / "labels.csv", LabelTable{std::vector<int>(20, 0), std::nullopt});
  c.data.labels_file = (dir / "labels.csv").string();
  r = run_pipeline(c);
  CHECK(r.classes == 1);

  c.embedding.method = EmbeddingMethod::external_rescale;
  c.data.labels_file.clear();
  c.embedding.s = 2.0;
  r = run_pipeline(c);
  CHECK(r.runs[0].dendrogram_purity == 1.0);

  write_labels(dir / "short.csv", LabelTable{std::vector<int>(5, 0), std::nullopt});
  c.data.labels_file = (dir / "short.csv").string();
  CHECK_THROWS_AS(run_pipeline(c), ConfigError);

  c.data.labels_file.clear();
  c.data.embedding_file = (dir / "missing.emb").string();
  CHECK_THROWS_AS(run_pipeline(c), IoError);
}

TEST_CASE("sample larger than the pool is rejected") {
  ExperimentConfig c = small_config();
  c.eval.sample_size = 1000;
  CHECK_THROWS_AS(run_pipeline(c), ConfigError);
}

TEST_CASE("recovery sweep") {
  ExperimentConfig c = small_config();
  c.data.btgm = BtgmSpec{2, 1.0, 2.0, 10};
  c.data.per_cluster = 30;
  c.sweep.margins = {0.0, 1.0, 4.0, 12.0};
  c.sweep.trials = 8;
  const auto rows = run_recovery_sweep(c);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].recovery_rate == 0.0);
  CHECK(rows[3].recovery_rate == 1.0);
  CHECK(rows[3].dp.mean == 1.0);
  for (std::size_t g = 1; g < rows.size(); ++g) CHECK(rows[g].dp.mean >= rows[g - 1].dp.mean);
  CHECK(rows[2].nearest_distance == 8.0);
  c.threads = 3;
  CHECK(format_sweep_csv(run_recovery_sweep(c)) == format_sweep_csv(rows));
  CHECK(csv_rows(format_sweep_csv(rows))[0].size() == 6);
}

TEST_CASE("linkage comparison") {
  ExperimentConfig c = small_config();
  c.data.btgm = BtgmSpec{2, 20.0, 2.0, 10};
  const auto rows = run_linkage_comparison(c);
  REQUIRE(rows.size() == kAllLinkageMethods.size());
  for (const auto& r : rows) {
    if (r.method == LinkageMethod::ward) CHECK(r.dp.mean >= 0.99);
  }
  c.threads = 2;
  CHECK(format_linkage_csv(run_linkage_comparison(c)) == format_linkage_csv(rows));

  c.data.btgm = BtgmSpec{2, 2.0, 2.0, 10};
  c.threads = 1;
  const auto noisy = run_linkage_comparison(c);
  double ward = 0.0, single = 0.0;
  for (const auto& r : noisy) {
    if (r.method == LinkageMethod::ward) ward = r.dp.mean;
    if (r.method == LinkageMethod::single) single = r.dp.mean;
  }
  CHECK(ward >= single);
}

TEST_CASE("recovery trials") {
  const auto far = MixtureSpec::uniform(btgm_means({2, 30.0, 2.0, 8}));
  CHECK(recovery_trials(far, 20, 5, 1, LinkageMethod::ward, 2).rate() == 1.0);
  const auto same = MixtureSpec::uniform(Matrix(4, 3, 0.0));
  CHECK(recovery_trials(same, 20, 5, 1).rate() == 0.0);
  CHECK_THROWS_AS(recovery_trials(far, 20, 5, 1, LinkageMethod::ward, 3), ArgumentError);
  CHECK(recovery_trials(far, 20, 6, 9, LinkageMethod::ward, 2, 3).recovered ==
        recovery_trials(far, 20, 6, 9, LinkageMethod::ward, 2, 1).recovered);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> seen(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { seen[i] += 1; });
  CHECK(std::count(seen.begin(), seen.end(), 1) == 100);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 5) throw ArgumentError("boom");
                  }),
                  ArgumentError);
}

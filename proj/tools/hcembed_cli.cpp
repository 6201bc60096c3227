// hcembed: command-line front end for data generation, embedding,
// clustering, evaluation and the experiment protocols.
//
// Exit codes: 0 ok, 1 config/argument error, 2 I/O error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hcembed/btgm.hpp"
#include "hcembed/harness.hpp"
#include "hcembed/io.hpp"
#include "hcembed/linkage.hpp"
#include "hcembed/metrics.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace hcembed;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kConfig = 1, kIo = 2, kNumeric = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out = ".";
  std::optional<std::size_t> threads;
};

ExperimentConfig resolve(const Globals& g) {
  ExperimentConfig cfg = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Globals& g) {
  std::error_code ec;
  fs::create_directories(g.out, ec);
  if (ec) throw IoError("cannot create " + g.out + ": " + ec.message());
  return g.out;
}

json condition_json(const Condition& c) {
  return {{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"passed", c.passed}, {"binding", c.binding}};
}

json separation_json(const SeparationReport& r) {
  json conds = json::array();
  for (const auto& c : r.conditions) conds.push_back(condition_json(c));
  json levels = json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"level", l.level}, {"weight_ratio", l.weight_ratio}, {"min_ratio", l.min_ratio},
                      {"passed", l.passed}});
  }
  return {{"passed", r.passed()},
          {"tightest_pair", {r.tightest_i, r.tightest_j}},
          {"conditions", conds},
          {"levels", levels}};
}

Dataset load_points(const std::string& emb_path, const std::string& labels_path) {
  const Embedding emb = read_embedding(emb_path);
  Dataset d;
  d.points = emb.to_matrix();
  if (!labels_path.empty()) {
    LabelTable t = read_labels(labels_path);
    d.flat_labels = std::move(t.flat);
    d.level_labels = std::move(t.levels);
  } else if (emb.labels) {
    d.flat_labels = emb.labels;
  }
  d.validate();
  return d;
}

int run(int argc, char** argv) {
  CLI::App app{"Hierarchical clustering on Euclidean embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--config", g.config_path, "Experiment config JSON")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for repeats/trials")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Sample the configured BTGM to points.emb + labels.csv");

  auto* embed = app.add_subcommand("embed", "Embed an EMB1 file (pca, rescale, pca+rescale)");
  std::string embed_in, embed_labels, embed_method = "pca", gmm_in;
  std::size_t embed_dim = 3, gmm_k = 0;
  double embed_s = 3.0;
  bool use_weights = false;
  embed->add_option("--input", embed_in, "Input EMB1")->required();
  embed->add_option("--labels", embed_labels, "Labels CSV (sets the GMM component count)");
  embed->add_option("--method", embed_method, "pca | rescale | pca+rescale")->capture_default_str();
  embed->add_option("--dim", embed_dim, "PCA dimension")->capture_default_str();
  embed->add_option("-s,--scale", embed_s, "Rescaling factor s")->capture_default_str();
  embed->add_option("--gmm", gmm_in, "Use this GMM JSON instead of fitting");
  embed->add_option("--gmm-k", gmm_k, "GMM components when fitting (default: label classes)");
  embed->add_flag("--use-weights", use_weights, "Weight assignment by mixing proportions");

  auto* clus = app.add_subcommand("cluster", "Cluster an EMB1 file into dendrogram.csv");
  std::string cluster_in, cluster_method = "ward";
  clus->add_option("--input", cluster_in, "Input EMB1")->required();
  clus->add_option("--linkage", cluster_method, "ward | single | complete | average | centroid")
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Score a dendrogram against labels");
  std::string eval_tree, eval_labels, eval_mode = "summed";
  eval->add_option("--tree", eval_tree, "Dendrogram CSV")->required();
  eval->add_option("--labels", eval_labels, "Labels CSV")->required();
  eval->add_option("--level-weights", eval_mode, "summed | deepest")->capture_default_str();

  auto* pipeline = app.add_subcommand("pipeline", "Run the configured experiment to results.json + runs.csv");

  auto* check = app.add_subcommand("check", "Evaluate the recovery conditions for the configured BTGM");
  std::optional<std::size_t> check_n;
  bool sum_form = false;
  RecoveryConstants constants;
  check->add_option("-n", check_n, "Sample size (default: per_cluster * k)");
  check->add_option("--c", constants.c)->capture_default_str();
  check->add_option("--c0", constants.c0)->capture_default_str();
  check->add_option("--c1", constants.c1)->capture_default_str();
  check->add_flag("--sum-form", sum_form, "Sum instead of max in the hierarchy condition");

  auto* sweep = app.add_subcommand("sweep", "Recovery and purity over a margin grid to sweep.csv");
  std::vector<double> margins;
  sweep->add_option("--margins", margins, "Margin grid (overrides the config)");

  auto* compare = app.add_subcommand("compare-linkage", "All linkage methods on shared samples to linkage.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  ExperimentConfig cfg = resolve(g);

  if (generate->parsed()) {
    if (cfg.data.source != "btgm") throw ConfigError("generate needs data.source = btgm");
    const Dataset d = generate_pool(cfg, cfg.seed);
    const fs::path dir = out_dir(g);
    write_embedding(dir / "points.emb", Embedding::from_matrix(d.points, d.flat_labels));
    write_labels(dir / "labels.csv", LabelTable{*d.flat_labels, d.level_labels});
    std::cout << "wrote " << d.size() << " x " << d.dim() << " points to " << (dir / "points.emb").string() << "\n";
  } else if (embed->parsed()) {
    const Dataset d = load_points(embed_in, embed_labels);
    ExperimentConfig ec = cfg;
    ec.embedding.method = parse_embedding_method(embed_method);
    if (ec.embedding.method != EmbeddingMethod::pca && ec.embedding.method != EmbeddingMethod::rescale &&
        ec.embedding.method != EmbeddingMethod::pca_rescale) {
      throw ConfigError("embed --method must be pca, rescale or pca+rescale");
    }
    ec.embedding.dim = embed_dim;
    ec.embedding.s = embed_s;
    ec.embedding.use_weights = use_weights;
    ec.embedding.gmm_file = gmm_in;
    ec.embedding.gmm_k = gmm_k;
    if (ec.embedding.method != EmbeddingMethod::pca && gmm_in.empty() && gmm_k == 0 && !d.flat_labels) {
      throw ConfigError("embed: fitting a GMM needs --gmm-k or labels");
    }
    const EmbeddedPool e = embed_pool(d, ec, cfg.seed);
    const fs::path dir = out_dir(g);
    write_embedding(dir / "embedding.emb", Embedding::from_matrix(e.points, d.flat_labels));
    if (e.gmm) write_gmm(dir / "gmm.json", *e.gmm);
    std::cout << "wrote " << e.points.rows() << " x " << e.points.cols() << " embedding\n";
  } else if (clus->parsed()) {
    const Matrix points = read_embedding(cluster_in).to_matrix();
    const Dendrogram tree = cluster(points, parse_linkage(cluster_method));
    const fs::path dir = out_dir(g);
    write_text(dir / "dendrogram.csv", format_dendrogram(tree));
    std::cout << "wrote " << tree.merges().size() << " merges\n";
  } else if (eval->parsed()) {
    const Dendrogram tree = parse_dendrogram(read_text(eval_tree));
    LabelTable t = read_labels(eval_labels);
    if (t.flat.size() != tree.n_leaves()) throw ConfigError("label count does not match tree leaves");
    Dataset d;
    d.points = Matrix(t.flat.size(), 1);
    d.flat_labels = std::move(t.flat);
    d.level_labels = std::move(t.levels);
    const LevelWeightMode mode = eval_mode == "deepest" ? LevelWeightMode::deepest
                                 : eval_mode == "summed"
                                     ? LevelWeightMode::summed
                                     : throw ConfigError("--level-weights must be summed or deepest");
    const RunMetrics m = evaluate_tree(tree, d, mode);
    json j{{"n", m.n},
           {"dendrogram_purity", m.dendrogram_purity},
           {"moseley_wang", m.moseley_wang},
           {"mw_opt", m.mw_opt},
           {"mw_ratio", m.mw_ratio},
           {"dasgupta", m.dasgupta},
           {"cut_accuracy", m.cut_accuracy},
           {"recovered", m.recovered}};
    const std::string text = j.dump(2) + "\n";
    write_text(out_dir(g) / "eval.json", text);
    std::cout << text;
  } else if (pipeline->parsed()) {
    const PipelineReport report = run_pipeline(cfg);
    write_pipeline_outputs(report, out_dir(g));
    const Aggregate dp = report.aggregate(&RunMetrics::dendrogram_purity);
    const Aggregate mw = report.aggregate(&RunMetrics::mw_ratio);
    std::printf("DP %.4f +- %.4f  MW/opt %.4f +- %.4f  over %zu runs\n", dp.mean, dp.std, mw.mean, mw.std,
                report.runs.size());
  } else if (check->parsed()) {
    if (cfg.data.source != "btgm") throw ConfigError("check needs data.source = btgm");
    constants.sum_form = sum_form;
    const auto mixture = MixtureSpec::uniform(configured_means(cfg.data), cfg.data.stddev);
    const std::size_t n = check_n.value_or(cfg.data.per_cluster * mixture.k());
    const auto t1 = check_theorem1(mixture, n, constants);
    const auto t2 = check_theorem2(mixture, Hierarchy::binary_tree(cfg.data.btgm.height), n, constants);
    const auto co = check_corollary(cfg.data.btgm, n, constants);
    json corollary_conditions = json::array();
    for (const auto& c : co.conditions) corollary_conditions.push_back(condition_json(c));
    json j{{"n", n},
           {"theorem1", separation_json(t1)},
           {"theorem2", separation_json(t2)},
           {"corollary", {{"passed", co.passed()}, {"c2", co.c2}, {"conditions", corollary_conditions}}}};
    const std::string text = j.dump(2) + "\n";
    write_text(out_dir(g) / "check.json", text);
    std::cout << text;
  } else if (sweep->parsed()) {
    if (!margins.empty()) cfg.sweep.margins = margins;
    const auto rows = run_recovery_sweep(cfg);
    const std::string text = format_sweep_csv(rows);
    write_text(out_dir(g) / "sweep.csv", text);
    std::cout << text;
  } else if (compare->parsed()) {
    const auto rows = run_linkage_comparison(cfg);
    const std::string text = format_linkage_csv(rows);
    write_text(out_dir(g) / "linkage.csv", text);
    std::cout << text;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}

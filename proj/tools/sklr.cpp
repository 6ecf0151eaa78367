// sklr: command-line driver for kernel learning from relative comparisons.
//
// Exit codes: 0 success, 1 I/O or parse failure, 2 invalid configuration,
// 3 hard-mode learning stopped at max epochs with violated constraints.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "report_json.hpp"
#include "sklr/clustering.hpp"
#include "sklr/constraints.hpp"
#include "sklr/dataset.hpp"
#include "sklr/error.hpp"
#include "sklr/experiment.hpp"
#include "sklr/extension.hpp"
#include "sklr/init_kernel.hpp"
#include "sklr/kernel_io.hpp"
#include "sklr/learner.hpp"
#include "sklr/pipeline.hpp"
#include "sklr/synthetic.hpp"

namespace fs = std::filesystem;
using sklr::report::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataArgs {
  std::string path;
  std::string format = "delimited";
  bool labels = false;
  std::size_t sparse_dim = 0;

  void add(CLI::App* app, bool required = true) {
    auto* o = app->add_option("--data", path, "feature file");
    if (required) o->required();
    app->add_option("--format", format, "delimited | sparse")->capture_default_str();
    app->add_flag("--labels", labels, "last delimited column is the class label");
    app->add_option("--sparse-dim", sparse_dim, "declared dimension for sparse files (0: infer)")
        ->capture_default_str();
  }

  sklr::Dataset load() const {
    sklr::DataFormat fmt;
    try {
      fmt = sklr::parse_data_format(format);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return sklr::load_dataset(path, fmt, labels, sparse_dim);
  }

  json echo() const { return {{"path", path}, {"format", format}, {"labels", labels}, {"sparse_dim", sparse_dim}}; }
};

struct LearnerArgs {
  sklr::LearnerConfig cfg;
  std::string mode = "hard";
  int neighbors = sklr::kDefaultNeighbors;

  void add(CLI::App* app) {
    app->add_option("--mode", mode, "hard | soft")->capture_default_str();
    app->add_option("--gamma2", cfg.gamma2, "outlier margin")->capture_default_str();
    app->add_option("--lambda-neq", cfg.lambda_neq, "soft-margin weight, inequalities")->capture_default_str();
    app->add_option("--lambda-eq", cfg.lambda_eq, "soft-margin weight, equalities")->capture_default_str();
    app->add_option("--energy", cfg.energy, "Frobenius energy kept by the low-rank factorization")
        ->capture_default_str();
    app->add_option("--knn", neighbors, "neighbor rank for adaptive bandwidths")->capture_default_str();
    app->add_option("--max-epochs", cfg.max_epochs, "epoch cap")->capture_default_str();
    app->add_option("--tol", cfg.satisfy_tolerance, "relative satisfaction tolerance")->capture_default_str();
    app->add_option("--alpha-tol", cfg.alpha_stabilize_tol, "soft-mode multiplier stabilization tolerance")
        ->capture_default_str();
  }

  sklr::LearnerConfig resolve(std::uint64_t seed) const {
    sklr::LearnerConfig out = cfg;
    try {
      out.mode = sklr::parse_learn_mode(mode);
      out.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (neighbors < 1) throw ConfigError("--knn must be positive");
    out.seed = seed;
    return out;
  }
};

std::string config_path_unused;

void add_config(CLI::App* app) {
  app->add_option("--config", config_path_unused, "key = value file; command-line flags take precedence");
}

std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Lines `key = value` become `--key=value`; blank lines, `#` comments and
// `[section]` headers are skipped. Surrounding quotes on values are dropped.
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sklr::ParseError("cannot open config file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim_copy(line);
    if (t.empty() || t.front() == '#' || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw sklr::ParseError("expected 'key = value' in '" + path + "'", lineno);
    const std::string key = trim_copy(t.substr(0, eq));
    std::string value = trim_copy(t.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    if (key.empty() || key == "config") throw sklr::ParseError("invalid key in '" + path + "'", lineno);
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

// Splices the contents of `--config FILE` in front of the explicit flags, so
// the explicit flags win under the take-last policy.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      continue;
    }
    if (args.empty()) break;
    auto extra = config_arguments(path);
    args.insert(args.begin() + 1, extra.begin(), extra.end());
    break;
  }
  return args;
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw sklr::ParseError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::map<int, int> label_map_or_empty(const std::string& s) {
  if (s.empty()) return {};
  try {
    return sklr::parse_label_map(s);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

template <class T>
std::vector<T> parse_list(const std::string& s, const char* what) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::istringstream is(tok);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof()) throw ConfigError(std::string("malformed ") + what + " list '" + s + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

// ---------------------------------------------------------------------------

struct BlobsCmd {
  double sigma = 0.3;
  std::size_t per_cluster = 25;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("blobs", "four Gaussian clusters on the unit-square corners");
    add_config(app);
    app->add_option("--sigma", sigma, "cluster standard deviation")->capture_default_str();
    app->add_option("--per-cluster", per_cluster, "points per cluster")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "output dataset (delimited, labeled)")->required();
    app->callback([this] { code = run(); });
  }

  int run() const {
    const auto ds = sklr::unit_square_clusters(sigma, per_cluster, seed);
    ensure_parent(out);
    sklr::save_dataset(ds, out);
    write_json(sklr::report::provenance_json(
                   "blobs", {{"sigma", sigma}, {"per_cluster", per_cluster}, {"seed", seed}, {"layout", "unit-square"}},
                   {}, {out}),
               out + ".json");
    return kExitOk;
  }
  int code = kExitOk;
};

struct SplitCmd {
  DataArgs data;
  double fraction = 0.8;
  std::uint64_t seed = 0;
  std::string train_out, holdout_out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("split", "stratified train / holdout split");
    add_config(app);
    data.add(app);
    app->add_option("--train-fraction", fraction)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--train-out", train_out)->required();
    app->add_option("--holdout-out", holdout_out)->required();
    app->callback([this] { code = run(); });
  }

  int run() const {
    const auto ds = data.load();
    std::pair<sklr::Dataset, sklr::Dataset> parts;
    try {
      parts = sklr::split_train_holdout(ds, fraction, seed);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    ensure_parent(train_out);
    ensure_parent(holdout_out);
    sklr::save_dataset(parts.first, train_out);
    sklr::save_dataset(parts.second, holdout_out);
    write_json(sklr::report::provenance_json("split", {{"train_fraction", fraction}, {"seed", seed}, {"data", data.echo()}},
                                             {data.path}, {train_out, holdout_out}),
               train_out + ".json");
    return kExitOk;
  }
  int code = kExitOk;
};

struct SynthCmd {
  DataArgs data;
  std::size_t n_neq = 80;
  std::string constraint_mode = "multiclass";
  std::string eq_mode = "none";
  std::size_t n_eq = 0;
  std::string binary_map;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "synthesize triplet constraints from labels");
    add_config(app);
    data.add(app);
    app->add_option("--n-neq", n_neq, "outlier triplets")->capture_default_str();
    app->add_option("--constraint-mode", constraint_mode, "multiclass | binary | mixed")->capture_default_str();
    app->add_option("--eq-mode", eq_mode, "none | same-class | cross-class | random")->capture_default_str();
    app->add_option("--n-eq", n_eq, "equidistance triplets")->capture_default_str();
    app->add_option("--binary-map", binary_map, "super labels, e.g. 0:0,1:0,2:1,3:1");
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "constraint file")->required();
    app->callback([this] { code = run(); });
  }

  int run() const {
    const auto ds = data.load();
    if (!ds.labels) throw ConfigError("synth needs a labeled dataset");
    sklr::SynthesisOptions so;
    try {
      so.n_neq = n_neq;
      so.mode = sklr::parse_constraint_mode(constraint_mode);
      so.eq_mode = sklr::parse_eq_mode(eq_mode);
      so.n_eq = n_eq;
      so.seed = seed;
      so.binary_map = label_map_or_empty(binary_map);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    std::vector<sklr::Triplet> ts;
    try {
      ts = sklr::synthesize_from_labels(*ds.labels, so);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    ensure_parent(out);
    sklr::save_triplets(ts, out);
    write_json(sklr::report::provenance_json("synth",
                                             {{"n_neq", n_neq},
                                              {"constraint_mode", constraint_mode},
                                              {"eq_mode", eq_mode},
                                              {"n_eq", n_eq},
                                              {"binary_map", binary_map},
                                              {"seed", seed},
                                              {"triplets_written", ts.size()},
                                              {"data", data.echo()}},
                                             {data.path}, {out}),
               out + ".json");
    return kExitOk;
  }
  int code = kExitOk;
};

struct CorruptCmd {
  std::string constraints;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("corrupt", "swap the outlier of a fraction of Neq triplets");
    add_config(app);
    app->add_option("--constraints", constraints)->required();
    app->add_option("--noise", noise, "fraction of Neq triplets to corrupt")->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out)->required();
    app->callback([this] { code = run(); });
  }

  int run() const {
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("--noise must lie in [0, 1]");
    const auto ts = sklr::load_triplets(constraints);
    const auto bad = sklr::corrupt(ts, noise, seed);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (!(ts[i] == bad[i])) ++changed;
    ensure_parent(out);
    sklr::save_triplets(bad, out);
    write_json(sklr::report::provenance_json(
                   "corrupt", {{"noise", noise}, {"seed", seed}, {"triplets", ts.size()}, {"modified", changed}},
                   {constraints}, {out}),
               out + ".json");
    return kExitOk;
  }
  int code = kExitOk;
};

struct LearnCmd {
  DataArgs data;
  LearnerArgs learner;
  std::string constraints;
  std::uint64_t seed = 0;
  std::string out;
  std::string report;
  std::string write_kernel;
  bool subset = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("learn", "learn a kernel from triplet constraints");
    add_config(app);
    data.add(app);
    learner.add(app);
    app->add_option("--constraints", constraints, "constraint file")->required();
    app->add_option("--seed", seed, "sweep-order seed")->capture_default_str();
    app->add_option("--out", out, "factored kernel container")->required();
    app->add_option("--report", report, "report JSON (default: <out>.json)");
    app->add_option("--write-kernel", write_kernel, "also write the lifted n x n kernel (.txt: text)");
    app->add_flag("--subset", subset, "learn over the constrained items only, then extend to all items");
    app->callback([this] { code = run(); });
  }

  int run() const {
    const auto cfg = learner.resolve(seed);
    const auto ds = data.load();
    const auto triplets = sklr::load_triplets(constraints);
    try {
      sklr::validate_triplets(triplets, ds.size());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(constraints + ": " + e.what());
    }

    sklr::LearnReport rep;
    sklr::report::LearnContext ctx;
    ctx.data_path = data.path;
    ctx.constraints_path = constraints;
    ctx.n = ds.size();
    ctx.triplets = triplets.size();
    ctx.subset = subset;
    ensure_parent(out);
    Eigen::MatrixXd lifted;
    if (subset) {
      const auto res = sklr::run_sklr_subset(ds.features, triplets, cfg, learner.neighbors);
      rep = res.subset.report;
      ctx.rank = res.subset.learned.rank();
      ctx.clipped = res.subset.learned.clipped;
      ctx.negative_clipped = res.subset.problem.init.negative_clipped;
      ctx.negative_extreme = res.subset.problem.init.negative_extreme;
      sklr::save_factored(res.subset.learned, out);
      lifted = res.gram;
    } else {
      const auto res = sklr::run_sklr(ds.features, triplets, cfg, learner.neighbors);
      rep = res.report;
      ctx.rank = res.learned.rank();
      ctx.clipped = res.learned.clipped;
      ctx.negative_clipped = res.problem.init.negative_clipped;
      ctx.negative_extreme = res.problem.init.negative_extreme;
      sklr::save_factored(res.learned, out);
      if (!write_kernel.empty()) lifted = sklr::lift_kernel(res.learned);
    }
    ctx.outputs.push_back(out);
    if (!write_kernel.empty()) {
      ensure_parent(write_kernel);
      if (fs::path(write_kernel).extension() == ".txt")
        sklr::save_matrix_text(lifted, write_kernel);
      else
        sklr::save_matrix(lifted, write_kernel);
      ctx.outputs.push_back(write_kernel);
    }
    const std::string report_path = report.empty() ? out + ".json" : report;
    ensure_parent(report_path);
    write_json(sklr::report::learn_json(rep, cfg, learner.neighbors, ctx), report_path);

    if (!rep.converged) {
      if (cfg.mode == sklr::LearnMode::Hard) {
        std::cerr << "sklr learn: " << rep.total - rep.satisfied << " of " << rep.total
                  << " constraints still violated after " << rep.epochs << " epochs\n";
        return kExitNotConverged;
      }
      std::cerr << "sklr learn: warning: soft-margin multipliers did not stabilize\n";
    }
    return kExitOk;
  }
  int code = kExitOk;
};

// Factored containers are lifted; anything else goes through load_matrix_any.
Eigen::MatrixXd load_kernel_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sklr::ParseError("cannot open '" + path + "'");
  std::array<char, 8> head{};
  in.read(head.data(), 8);
  if (in && head == sklr::kFactorMagic) return sklr::lift_kernel(sklr::load_factored(path));
  return sklr::load_matrix_any(path);
}

struct ClusterCmd {
  std::string kernel;
  int k = 2;
  sklr::KMeansOptions opt;
  std::string out;
  std::string report;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("cluster", "kernel k-means on a kernel matrix");
    add_config(app);
    app->add_option("--kernel", kernel, "factored container, matrix container or text matrix")->required();
    app->add_option("--k", k, "cluster count")->capture_default_str();
    app->add_option("--n-init", opt.n_init, "restarts")->capture_default_str();
    app->add_option("--max-iter", opt.max_iter, "Lloyd iterations per restart")->capture_default_str();
    app->add_option("--seed", opt.seed)->capture_default_str();
    app->add_option("--out", out, "assignment file (index,cluster)")->required();
    app->add_option("--report", report, "report JSON (default: <out>.json)");
    app->callback([this] { code = run(); });
  }

  int run() const {
    const Eigen::MatrixXd K = load_kernel_any(kernel);
    if (K.rows() != K.cols()) throw ConfigError("kernel matrix is not square");
    if (opt.max_iter < 1) throw ConfigError("--max-iter must be positive");
    sklr::ClusteringResult res;
    try {
      res = sklr::kernel_kmeans(K, k, opt);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    ensure_parent(out);
    sklr::save_assignments(res.assignments, out);
    write_json(sklr::report::cluster_json(res, k, opt, kernel, out), report.empty() ? out + ".json" : report);
    return kExitOk;
  }
  int code = kExitOk;
};

struct EvaluateCmd {
  std::string assignments;
  DataArgs data;
  std::string binary_map;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("evaluate", "adjusted Rand index against dataset labels");
    add_config(app);
    app->add_option("--assignments", assignments)->required();
    data.add(app);
    app->add_option("--binary-map", binary_map, "score against super labels, e.g. 0:0,1:0,2:1,3:1");
    app->add_option("--out", out, "report JSON (default: stdout)");
    app->callback([this] { code = run(); });
  }

  int run() const {
    const auto pred = sklr::load_assignments(assignments);
    const auto ds = data.load();
    if (!ds.labels) throw ConfigError("evaluate needs a labeled dataset");
    std::vector<int> truth = *ds.labels;
    const auto map = label_map_or_empty(binary_map);
    if (!map.empty()) {
      try {
        truth = sklr::remap_labels(truth, map);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (truth.size() != pred.size())
      throw ConfigError("assignments have " + std::to_string(pred.size()) + " items but the labels have " +
                        std::to_string(truth.size()));
    bool degenerate = false;
    double ar = 0.0;
    try {
      ar = sklr::adjusted_rand(pred, truth, &degenerate);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const std::set<int> kp(pred.begin(), pred.end()), kt(truth.begin(), truth.end());
    if (degenerate) std::cerr << "sklr evaluate: warning: degenerate partitions\n";
    write_json(sklr::report::evaluate_json(ar, degenerate, pred.size(), kp.size(), kt.size(), assignments, data.path,
                                           !map.empty()),
               out);
    return kExitOk;
  }
  int code = kExitOk;
};

struct ExtendCmd {
  DataArgs data;
  std::string model;
  std::string holdout;
  std::string holdout_format = "delimited";
  bool holdout_labels = false;
  int neighbors = sklr::kDefaultNeighbors;
  std::string out;
  std::string cross;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("extend", "evaluate a learned kernel on new points");
    add_config(app);
    data.add(app);
    app->add_option("--model", model, "factored kernel learned on --data")->required();
    app->add_option("--holdout", holdout, "new points")->required();
    app->add_option("--holdout-format", holdout_format)->capture_default_str();
    app->add_flag("--holdout-labels", holdout_labels, "last holdout column is a label (ignored)");
    app->add_option("--knn", neighbors, "neighbor rank used when the model was learned")->capture_default_str();
    app->add_option("--out", out, "holdout x holdout Gram matrix (.txt: text)")->required();
    app->add_option("--cross", cross, "also write the holdout x training block");
    app->callback([this] { code = run(); });
  }

  static void save_any(const Eigen::MatrixXd& M, const std::string& path) {
    ensure_parent(path);
    if (fs::path(path).extension() == ".txt")
      sklr::save_matrix_text(M, path);
    else
      sklr::save_matrix(M, path);
  }

  int run() const {
    if (neighbors < 1) throw ConfigError("--knn must be positive");
    const auto train = data.load();
    const auto fk = sklr::load_factored(model);
    if (fk.n() != static_cast<Eigen::Index>(train.size()))
      throw ConfigError("model was learned on " + std::to_string(fk.n()) + " items but --data has " +
                        std::to_string(train.size()));
    sklr::DataFormat hf;
    try {
      hf = sklr::parse_data_format(holdout_format);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto held = sklr::load_dataset(holdout, hf, holdout_labels);
    if (held.dim() != train.dim()) throw ConfigError("holdout dimension differs from training dimension");
    const auto init = sklr::build_initial_kernel(train.features, neighbors);
    const Eigen::VectorXd lam = (fk.Q.transpose() * init.K0 * fk.Q).diagonal();
    if ((lam - fk.k0_eigenvalues).norm() > 1e-6 * fk.k0_eigenvalues.norm())
      throw ConfigError("model does not match the initial kernel of --data (check --knn)");
    sklr::KernelExtension ext;
    try {
      ext = sklr::build_extension(fk, init);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    save_any(sklr::extended_gram(ext, held.features), out);
    std::vector<std::string> outputs{out};
    if (!cross.empty()) {
      save_any(sklr::extended_gram(ext, held.features, train.features), cross);
      outputs.push_back(cross);
    }
    write_json(sklr::report::provenance_json("extend",
                                             {{"neighbors", neighbors},
                                              {"pinv_cutoff", 1e-10},
                                              {"train_items", train.size()},
                                              {"holdout_items", held.size()},
                                              {"rank", fk.rank()}},
                                             {data.path, model, holdout}, outputs),
               out + ".json");
    return kExitOk;
  }
  int code = kExitOk;
};

struct ExperimentCmd {
  DataArgs data;
  LearnerArgs learner;
  std::string grid = "20,40,80";
  std::string noise = "0";
  std::string modes = "hard";
  int trials = 30;
  std::string constraint_mode = "multiclass";
  std::string eq_mode = "none";
  std::size_t n_eq = 0;
  std::string binary_map;
  bool evaluate_binary = false;
  bool baseline = false;
  int k = 0;
  int n_init = 10;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("experiment", "constraint-count x noise x mode sweep scored by adjusted Rand");
    add_config(app);
    data.add(app);
    learner.add(app);
    app->add_option("--grid", grid, "constraint counts, comma separated")->capture_default_str();
    app->add_option("--noise", noise, "corruption fractions, comma separated")->capture_default_str();
    app->add_option("--modes", modes, "learning modes, comma separated")->capture_default_str();
    app->add_option("--trials", trials)->capture_default_str();
    app->add_option("--constraint-mode", constraint_mode)->capture_default_str();
    app->add_option("--eq-mode", eq_mode)->capture_default_str();
    app->add_option("--n-eq", n_eq)->capture_default_str();
    app->add_option("--binary-map", binary_map);
    app->add_flag("--evaluate-binary", evaluate_binary, "score against the super labels");
    app->add_flag("--baseline", baseline, "also score the initial kernel");
    app->add_option("--k", k, "cluster count (0: number of labels)")->capture_default_str();
    app->add_option("--n-init", n_init)->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--out", out, "output directory")->required();
    app->callback([this] { code = run(); });
  }

  int run() const {
    sklr::ExperimentSpec spec;
    try {
      spec.n_constraints = parse_list<std::size_t>(grid, "constraint count");
      spec.noise = parse_list<double>(noise, "noise");
      spec.modes.clear();
      std::stringstream ms(modes);
      for (std::string m; std::getline(ms, m, ',');) spec.modes.push_back(sklr::parse_learn_mode(m));
      spec.trials = trials;
      spec.constraint_mode = sklr::parse_constraint_mode(constraint_mode);
      spec.eq_mode = sklr::parse_eq_mode(eq_mode);
      spec.n_eq = n_eq;
      spec.binary_map = label_map_or_empty(binary_map);
      spec.evaluate_binary = evaluate_binary;
      spec.baseline = baseline;
      spec.clusters = k;
      spec.n_init = n_init;
      spec.neighbors = learner.neighbors;
      spec.seed = seed;
      spec.learner = learner.resolve(seed);
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto ds = data.load();
    sklr::ExperimentResult res;
    try {
      res = sklr::run_experiment(ds, spec);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    fs::create_directories(out);
    const std::string trials_path = (fs::path(out) / "trials.csv").string();
    const std::string agg_path = (fs::path(out) / "aggregate.csv").string();
    const std::string json_path = (fs::path(out) / "experiment.json").string();
    {
      std::ofstream t(trials_path);
      if (!t) throw sklr::ParseError("cannot write '" + trials_path + "'");
      sklr::write_trials_csv(res, t);
      std::ofstream a(agg_path);
      if (!a) throw sklr::ParseError("cannot write '" + agg_path + "'");
      sklr::write_aggregate_csv(res, a);
    }
    write_json(sklr::report::experiment_json(res, spec, data.path, {trials_path, agg_path}), json_path);
    return kExitOk;
  }
  int code = kExitOk;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel learning from relative distance comparisons"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_version_flag("--version", sklr::report::kToolVersion);

  BlobsCmd blobs;
  SplitCmd split;
  SynthCmd synth;
  CorruptCmd corrupt;
  LearnCmd learn;
  ClusterCmd cluster;
  EvaluateCmd evaluate;
  ExtendCmd extend;
  ExperimentCmd experiment;
  blobs.add(app);
  split.add(app);
  synth.add(app);
  corrupt.add(app);
  learn.add(app);
  cluster.add(app);
  evaluate.add(app);
  extend.add(app);
  experiment.add(app);

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "sklr: " << e.what() << '\n';
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    std::cerr << "sklr: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "sklr: invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const sklr::ParseError& e) {
    std::cerr << "sklr: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "sklr: " << e.what() << '\n';
    return kExitIo;
  } catch (const sklr::NumericalError& e) {
    std::cerr << "sklr: numerical failure: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "sklr: invalid input: " << e.what() << '\n';
    return kExitConfig;
  }

  for (int c : {blobs.code, split.code, synth.code, corrupt.code, learn.code, cluster.code, evaluate.code,
                extend.code, experiment.code})
    if (c != kExitOk) return c;
  return kExitOk;
}

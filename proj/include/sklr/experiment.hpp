#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sklr/clustering.hpp"
#include "sklr/constraints.hpp"
#include "sklr/dataset.hpp"
#include "sklr/init_kernel.hpp"
#include "sklr/learner.hpp"
#include "sklr/pipeline.hpp"

namespace sklr {

/// Sweep over constraint counts x noise levels x learning modes x trials.
struct ExperimentSpec {
  std::vector<std::size_t> n_constraints{20, 40, 80};
  std::vector<double> noise{0.0};
  std::vector<LearnMode> modes{LearnMode::Hard};
  int trials = 30;
  ConstraintMode constraint_mode = ConstraintMode::Multiclass;
  EqMode eq_mode = EqMode::None;
  std::size_t n_eq = 0;
  std::map<int, int> binary_map;
  /// Score against the super labels instead of the fine labels.
  bool evaluate_binary = false;
  /// Also cluster the initial kernel (method "k0") once per trial.
  bool baseline = false;
  int clusters = 0;  // 0: number of distinct evaluation labels
  int n_init = 10;
  int neighbors = kDefaultNeighbors;
  std::uint64_t seed = 0;
  LearnerConfig learner;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be at least 1");
    if (n_constraints.empty()) throw std::invalid_argument("constraint grid is empty");
    if (modes.empty()) throw std::invalid_argument("no learning modes selected");
    for (double f : noise)
      if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("noise levels must lie in [0, 1]");
    if ((evaluate_binary || constraint_mode != ConstraintMode::Multiclass) && binary_map.empty())
      throw std::invalid_argument("binary evaluation or constraints need a label map");
    learner.validate();
  }
};

struct TrialRow {
  std::string method;  // "sklr" (hard), "ssklr" (soft) or "k0"
  std::string mode;    // constraint synthesis mode
  std::size_t n_constraints = 0;
  double noise = 0.0;
  int trial = 0;
  double ar = 0.0;
  bool converged = true;
  int epochs = 0;
  double divergence = 0.0;
};

struct AggregateRow {
  std::string method;
  std::string mode;
  std::size_t n_constraints = 0;
  double noise = 0.0;
  int trials = 0;
  double mean_ar = 0.0;
  double std_ar = 0.0;
};

struct ExperimentResult {
  std::vector<TrialRow> rows;
  std::vector<AggregateRow> aggregates;
};

/// Seed for one trial, shared by every mode and noise level so that modes are
/// compared on the same constraint draws.
inline std::uint64_t trial_seed(std::uint64_t base, int trial, std::size_t n_constraints) {
  std::uint64_t x = base ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(trial + 1)) ^
                    (0xC2B2AE3D27D4EB4Full * static_cast<std::uint64_t>(n_constraints + 1));
  x ^= x >> 31;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 29;
  return x;
}

inline std::string method_name(LearnMode m) { return m == LearnMode::Hard ? "sklr" : "ssklr"; }

inline std::vector<AggregateRow> aggregate(const std::vector<TrialRow>& rows) {
  using Key = std::tuple<std::string, std::string, std::size_t, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> groups;
  for (const auto& r : rows) {
    Key key{r.method, r.mode, r.n_constraints, r.noise};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(r.ar);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order) {
    const auto& v = groups[key];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key),
                   static_cast<int>(v.size()), mean,
                   v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0});
  }
  return out;
}

/// Runs the sweep on a labeled dataset. Each trial synthesizes constraints,
/// corrupts them, learns, clusters the lifted kernel and scores it with the
/// adjusted Rand index.
inline ExperimentResult run_experiment(const Dataset& ds, const ExperimentSpec& spec) {
  spec.validate();
  ds.validate();
  if (!ds.labels) throw std::invalid_argument("experiments need a labeled dataset");
  const std::vector<int> truth = spec.evaluate_binary ? remap_labels(*ds.labels, spec.binary_map) : *ds.labels;
  const int k = spec.clusters > 0 ? spec.clusters : static_cast<int>(members_by_class(truth).size());

  ExperimentResult res;
  const InitialKernel init = build_initial_kernel(ds.features, spec.neighbors);
  const FactoredKernel initial = low_rank_factorize(init.K0, spec.learner.energy);
  const std::size_t n = ds.size();

  if (spec.baseline) {
    for (int t = 0; t < spec.trials; ++t) {
      const auto seed = trial_seed(spec.seed, t, 0);
      const auto cl = kernel_kmeans(init.K0, k, {spec.n_init, 300, seed});
      res.rows.push_back({"k0", "none", 0, 0.0, t, adjusted_rand(cl.assignments, truth), true, 0, 0.0});
    }
  }

  for (std::size_t nc : spec.n_constraints) {
    for (double noise : spec.noise) {
      for (LearnMode mode : spec.modes) {
        for (int t = 0; t < spec.trials; ++t) {
          const auto seed = trial_seed(spec.seed, t, nc);
          SynthesisOptions so;
          so.n_neq = nc;
          so.mode = spec.constraint_mode;
          so.eq_mode = spec.eq_mode;
          so.n_eq = spec.n_eq;
          so.seed = seed;
          so.binary_map = spec.binary_map;
          auto triplets = corrupt(synthesize_from_labels(*ds.labels, so), noise, seed + 1);
          LearnerConfig cfg = spec.learner;
          cfg.mode = mode;
          cfg.seed = seed + 2;
          LearnReport report;
          const auto constraints = transform_all(initial.Q, expand_all(triplets, n, cfg.gamma2));
          const FactoredKernel learned = learn(initial, constraints, cfg, &report);
          const auto cl = kernel_kmeans(lift_kernel(learned), k, {spec.n_init, 300, seed + 3});
          res.rows.push_back({method_name(mode), to_string(spec.constraint_mode), nc, noise, t,
                              adjusted_rand(cl.assignments, truth), report.converged, report.epochs,
                              report.divergence});
        }
      }
    }
  }
  res.aggregates = aggregate(res.rows);
  return res;
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

/// Long format: `method,mode,n_constraints,noise,trial,ar`.
inline void write_trials_csv(const ExperimentResult& res, std::ostream& out) {
  out << "method,mode,n_constraints,noise,trial,ar\n";
  for (const auto& r : res.rows)
    out << r.method << ',' << r.mode << ',' << r.n_constraints << ',' << format_real(r.noise) << ',' << r.trial
        << ',' << format_real(r.ar) << '\n';
}

inline void write_aggregate_csv(const ExperimentResult& res, std::ostream& out) {
  out << "method,mode,n_constraints,noise,trials,mean_ar,std_ar\n";
  for (const auto& a : res.aggregates)
    out << a.method << ',' << a.mode << ',' << a.n_constraints << ',' << format_real(a.noise) << ',' << a.trials
        << ',' << format_real(a.mean_ar) << ',' << format_real(a.std_ar) << '\n';
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t m = i; m <= j; ++m) r[idx[m]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / static_cast<double>(rx.size());
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / static_cast<double>(ry.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace sklr

#pragma once

// JSON documents written by the command-line tool. Every document carries a
// `schema` tag naming one of the files under schemas/.

#include <string>
#include <vector>

#include "json.hpp"

#include "sklr/clustering.hpp"
#include "sklr/experiment.hpp"
#include "sklr/learner.hpp"

namespace sklr::report {

using nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

inline json config_json(const LearnerConfig& cfg, int neighbors) {
  return {{"gamma2", cfg.gamma2},
          {"mode", to_string(cfg.mode)},
          {"lambda_neq", cfg.lambda_neq},
          {"lambda_eq", cfg.lambda_eq},
          {"satisfy_tolerance", cfg.satisfy_tolerance},
          {"max_epochs", cfg.max_epochs},
          {"alpha_stabilize_tol", cfg.alpha_stabilize_tol},
          {"seed", cfg.seed},
          {"energy", cfg.energy},
          {"neighbors", neighbors}};
}

struct LearnContext {
  std::string data_path;
  std::string constraints_path;
  std::size_t n = 0;
  std::size_t rank = 0;
  int clipped = 0;
  int negative_clipped = 0;
  double negative_extreme = 0.0;
  std::size_t triplets = 0;
  bool subset = false;
  std::vector<std::string> outputs;
};

inline json learn_json(const LearnReport& rep, const LearnerConfig& cfg, int neighbors, const LearnContext& ctx) {
  json j{{"schema", "sklr.learn_report/1"},
         {"tool_version", kToolVersion},
         {"converged", rep.converged},
         {"epochs", rep.epochs},
         {"final_max_violation", rep.final_max_violation},
         {"divergence", rep.divergence},
         {"satisfied", rep.satisfied},
         {"total", rep.total},
         {"projections", rep.projections},
         {"violation_trace", rep.violation_trace},
         {"n", ctx.n},
         {"rank", ctx.rank},
         {"triplets", ctx.triplets},
         {"subset", ctx.subset},
         {"initial_kernel",
          {{"negative_eigenvalues_clipped", ctx.negative_clipped},
           {"most_negative_eigenvalue", ctx.negative_extreme},
           {"factor_eigenvalues_clipped", ctx.clipped}}},
         {"config", config_json(cfg, neighbors)},
         {"inputs", {{"data", ctx.data_path}, {"constraints", ctx.constraints_path}}},
         {"outputs", ctx.outputs}};
  if (cfg.mode == LearnMode::Soft) {
    j["duals"] = rep.duals;
    j["slacks"] = rep.slacks;
  }
  if (!rep.converged) {
    j["warning"] = cfg.mode == LearnMode::Soft
                       ? "soft-margin multipliers did not stabilize within max_epochs"
                       : "constraints still violated after max_epochs";
  }
  return j;
}

inline json provenance_json(const std::string& command, json params, const std::vector<std::string>& inputs,
                            const std::vector<std::string>& outputs) {
  return {{"schema", "sklr.provenance/1"},
          {"tool_version", kToolVersion},
          {"command", command},
          {"params", std::move(params)},
          {"inputs", inputs},
          {"outputs", outputs}};
}

inline json cluster_json(const ClusteringResult& res, int k, const KMeansOptions& opt, const std::string& kernel,
                         const std::string& out) {
  std::vector<double> finals;
  for (const auto& t : res.objective_trace) finals.push_back(t.back());
  return {{"schema", "sklr.cluster/1"},
          {"tool_version", kToolVersion},
          {"k", k},
          {"n", res.assignments.size()},
          {"n_init", opt.n_init},
          {"max_iter", opt.max_iter},
          {"seed", opt.seed},
          {"objective", res.objective},
          {"iterations", res.iterations},
          {"restart_objectives", finals},
          {"inputs", {{"kernel", kernel}}},
          {"outputs", {out}}};
}

inline json evaluate_json(double ar, bool degenerate, std::size_t n, std::size_t k_pred, std::size_t k_true,
                          const std::string& assignments, const std::string& truth, bool binary) {
  json j{{"schema", "sklr.evaluate/1"},
         {"tool_version", kToolVersion},
         {"adjusted_rand", ar},
         {"degenerate", degenerate},
         {"n", n},
         {"clusters_predicted", k_pred},
         {"clusters_true", k_true},
         {"binary_labels", binary},
         {"inputs", {{"assignments", assignments}, {"truth", truth}}}};
  if (degenerate) j["warning"] = "both partitions trivial; adjusted Rand index is undefined";
  return j;
}

inline json experiment_json(const ExperimentResult& res, const ExperimentSpec& spec, const std::string& data,
                            const std::vector<std::string>& outputs) {
  json aggs = json::array();
  for (const auto& a : res.aggregates)
    aggs.push_back({{"method", a.method},
                    {"mode", a.mode},
                    {"n_constraints", a.n_constraints},
                    {"noise", a.noise},
                    {"trials", a.trials},
                    {"mean_ar", a.mean_ar},
                    {"std_ar", a.std_ar}});
  std::size_t unconverged = 0;
  for (const auto& r : res.rows)
    if (!r.converged) ++unconverged;
  std::vector<std::string> modes;
  for (auto m : spec.modes) modes.push_back(to_string(m));
  json bmap = json::object();
  for (auto [from, to] : spec.binary_map) bmap[std::to_string(from)] = to;
  return {{"schema", "sklr.experiment/1"},
          {"tool_version", kToolVersion},
          {"spec",
           {{"n_constraints", spec.n_constraints},
            {"noise", spec.noise},
            {"modes", modes},
            {"trials", spec.trials},
            {"constraint_mode", to_string(spec.constraint_mode)},
            {"eq_mode", to_string(spec.eq_mode)},
            {"n_eq", spec.n_eq},
            {"binary_map", bmap},
            {"evaluate_binary", spec.evaluate_binary},
            {"baseline", spec.baseline},
            {"clusters", spec.clusters},
            {"n_init", spec.n_init},
            {"seed", spec.seed},
            {"learner", config_json(spec.learner, spec.neighbors)}}},
          {"rows", res.rows.size()},
          {"unconverged_rows", unconverged},
          {"aggregates", aggs},
          {"inputs", {{"data", data}}},
          {"outputs", outputs}};
}

}  // namespace sklr::report

#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sklr/constraints.hpp"
#include "sklr/extension.hpp"
#include "sklr/init_kernel.hpp"
#include "sklr/learner.hpp"

namespace sklr {

/// Initial kernel, its factorization and the constraints moved into its r-space.
struct Problem {
  InitialKernel init;
  FactoredKernel initial;
  std::vector<Rank2Constraint> constraints;
};

inline Problem prepare_problem(const Eigen::MatrixXd& X, const std::vector<Triplet>& triplets,
                               const LearnerConfig& cfg, int neighbors = kDefaultNeighbors) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(X.rows());
  validate_triplets(triplets, n);
  Problem p;
  p.init = build_initial_kernel(X, neighbors);
  p.initial = low_rank_factorize(p.init.K0, cfg.energy);
  p.constraints = transform_all(p.initial.Q, expand_all(triplets, n, cfg.gamma2));
  return p;
}

struct LearnOutcome {
  Problem problem;
  FactoredKernel learned;
  LearnReport report;
};

/// Bandwidths, initial kernel, low-rank factorization, projections.
inline LearnOutcome run_sklr(const Eigen::MatrixXd& X, const std::vector<Triplet>& triplets,
                             const LearnerConfig& cfg, int neighbors = kDefaultNeighbors) {
  LearnOutcome out;
  out.problem = prepare_problem(X, triplets, cfg, neighbors);
  out.learned = learn(out.problem.initial, out.problem.constraints, cfg, &out.report);
  return out;
}

struct SubsetOutcome {
  std::vector<std::size_t> items;  // constrained items, ascending; row r of the subset is items[r]
  LearnOutcome subset;
  KernelExtension extension;
  Eigen::MatrixXd gram;  // learned kernel over every row of X
};

/// Learns over the constrained items only, then extends the result to all
/// of X through the initial-kernel cross terms.
inline SubsetOutcome run_sklr_subset(const Eigen::MatrixXd& X, const std::vector<Triplet>& triplets,
                                     const LearnerConfig& cfg, int neighbors = kDefaultNeighbors) {
  validate_triplets(triplets, static_cast<std::size_t>(X.rows()));
  SubsetOutcome out;
  for (const auto& t : triplets) out.items.insert(out.items.end(), {t.i, t.j, t.k});
  std::sort(out.items.begin(), out.items.end());
  out.items.erase(std::unique(out.items.begin(), out.items.end()), out.items.end());
  if (out.items.size() <= static_cast<std::size_t>(neighbors))
    throw std::invalid_argument("constraint subset has too few items for the neighbor count");
  std::map<std::size_t, std::size_t> local;
  Eigen::MatrixXd Xs(static_cast<Eigen::Index>(out.items.size()), X.cols());
  for (std::size_t r = 0; r < out.items.size(); ++r) {
    local[out.items[r]] = r;
    Xs.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(out.items[r]));
  }
  std::vector<Triplet> mapped = triplets;
  for (auto& t : mapped) {
    t.i = local[t.i];
    t.j = local[t.j];
    t.k = local[t.k];
  }
  out.subset = run_sklr(Xs, mapped, cfg, neighbors);
  out.extension = build_extension(out.subset.learned, out.subset.problem.init);
  out.gram = extended_gram(out.extension, X);
  return out;
}

}  // namespace sklr

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "sklr/constraints.hpp"
#include "sklr/error.hpp"
#include "sklr/factored_kernel.hpp"
#include "sklr/projections.hpp"

namespace sklr {

enum class LearnMode { Hard, Soft };

inline LearnMode parse_learn_mode(std::string_view s) {
  if (s == "hard") return LearnMode::Hard;
  if (s == "soft") return LearnMode::Soft;
  throw std::invalid_argument("unknown learning mode '" + std::string(s) + "'");
}

inline std::string to_string(LearnMode m) { return m == LearnMode::Hard ? "hard" : "soft"; }

struct LearnerConfig {
  double gamma2 = 2.0;
  LearnMode mode = LearnMode::Hard;
  double lambda_neq = 1e5;
  double lambda_eq = 1e5;
  double satisfy_tolerance = 1e-6;  // relative ε, see satisfaction_epsilon
  int max_epochs = 200;
  double alpha_stabilize_tol = 1e-4;
  std::uint64_t seed = 0;
  double energy = 0.9;

  void validate() const {
    if (!(gamma2 > 1.0)) throw std::invalid_argument("gamma^2 must exceed 1");
    if (!(lambda_neq > 0.0) || !(lambda_eq > 0.0)) throw std::invalid_argument("lambdas must be positive");
    if (!(satisfy_tolerance > 0.0)) throw std::invalid_argument("satisfaction tolerance must be positive");
    if (max_epochs < 1) throw std::invalid_argument("max epochs must be positive");
    if (!(alpha_stabilize_tol > 0.0)) throw std::invalid_argument("alpha tolerance must be positive");
    if (!(energy > 0.0 && energy <= 1.0)) throw std::invalid_argument("energy must lie in (0, 1]");
  }
};

struct LearnReport {
  int epochs = 0;
  bool converged = false;
  double final_max_violation = 0.0;
  double divergence = 0.0;
  std::size_t satisfied = 0;
  std::size_t total = 0;
  std::size_t projections = 0;
  std::vector<double> violation_trace;  // max violation after each epoch
  std::vector<double> duals;            // soft mode: accumulated multiplier per constraint
  std::vector<double> slacks;           // soft mode: ξ = multiplier / λ
};

struct SatisfactionSummary {
  std::size_t satisfied = 0;
  double max_violation = 0.0;
};

/// Counts constraints within ε of holding; max_violation is the largest excess.
inline SatisfactionSummary satisfied_count(const FactoredKernel& fk,
                                           const std::vector<Rank2Constraint>& constraints, double eps) {
  SatisfactionSummary s;
  for (const auto& rc : constraints) {
    const double v = violation(fk, rc);
    if (is_satisfied(v, rc.sense, eps)) ++s.satisfied;
    s.max_violation = std::max(s.max_violation, excess(v, rc.sense));
  }
  return s;
}

namespace detail {

inline std::string describe(const Rank2Constraint& rc) {
  return "constraint (triplet " + std::to_string(rc.origin.triplet) + ", form " +
         std::to_string(rc.origin.form) + ")";
}

inline bool inactive(const EigenPair& ep, double scale) {
  const double cut = 1e-12 * scale;
  if (std::abs(ep.eta1) <= cut && std::abs(ep.eta2) <= cut) return true;
  // One eigenvalue zero: no finite step reaches the boundary.
  const double mag = ep.eta1 * ep.eta1 + ep.eta2 * ep.eta2;
  return std::abs(ep.product()) <= 1e-14 * mag;
}

}  // namespace detail

/// Bregman-projection learning over constraints already transformed into
/// fk0's r-space.
///
/// Hard mode sweeps a fresh random permutation each epoch and projects every
/// unsatisfied constraint onto its boundary; it stops after the first epoch
/// that ends with all constraints satisfied. Soft mode visits every
/// constraint each epoch and takes the soft-margin step against the
/// multiplier accumulated for it so far (so a step may partially undo earlier
/// ones); it stops when no multiplier moved by more than
/// alpha_stabilize_tol · (1 + |previous|) over an epoch.
inline FactoredKernel learn(FactoredKernel fk, const std::vector<Rank2Constraint>& constraints,
                            const LearnerConfig& cfg, LearnReport* report_out = nullptr) {
  cfg.validate();
  fk.validate();
  LearnReport report;
  report.total = constraints.size();
  for (const auto& rc : constraints)
    if (rc.dim() != fk.rank()) throw std::invalid_argument("learn: " + detail::describe(rc) + " not in kernel space");

  const bool soft = cfg.mode == LearnMode::Soft;
  if (soft) report.duals.assign(constraints.size(), 0.0);

  if (constraints.empty()) {
    report.converged = true;
    report.divergence = logdet_divergence(fk);
    if (report_out) *report_out = std::move(report);
    return fk;
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(constraints.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double r = static_cast<double>(fk.rank());

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<double> duals_before = report.duals;
    const double eps = satisfaction_epsilon(fk, cfg.satisfy_tolerance);
    const double scale = fk.trace_hat() / r;

    for (std::size_t idx : order) {
      const auto& rc = constraints[idx];
      try {
        const auto pf = detail::project_factors(fk, rc);
        const double v = pf.B.trace();
        if (!soft && is_satisfied(v, rc.sense, eps)) continue;
        const EigenPair ep = detail::checked_pair(pf.B);
        if (detail::inactive(ep, scale)) continue;
        double alpha = 0.0;
        if (soft) {
          const double lambda = rc.sense == Sense::LeqZero ? cfg.lambda_neq : cfg.lambda_eq;
          alpha = alpha_soft(ep, lambda, rc.sense, report.duals[idx]);
          report.duals[idx] += alpha;
          if (rc.sense == Sense::LeqZero) report.duals[idx] = std::max(0.0, report.duals[idx]);
        } else {
          alpha = alpha_hard(ep, rc.sense);
        }
        if (alpha == 0.0) continue;
        fk = project(std::move(fk), rc, alpha);
        ++report.projections;
      } catch (const NumericalError& e) {
        throw NumericalError(detail::describe(rc) + ": " + e.what());
      }
    }

    ++report.epochs;
    const double eps_end = satisfaction_epsilon(fk, cfg.satisfy_tolerance);
    const auto summary = satisfied_count(fk, constraints, eps_end);
    report.violation_trace.push_back(summary.max_violation);
    report.satisfied = summary.satisfied;
    report.final_max_violation = summary.max_violation;

    if (soft) {
      double worst = 0.0;
      for (std::size_t c = 0; c < constraints.size(); ++c)
        worst = std::max(worst, std::abs(report.duals[c] - duals_before[c]) / (1.0 + std::abs(duals_before[c])));
      if (worst <= cfg.alpha_stabilize_tol) {
        report.converged = true;
        break;
      }
    } else if (summary.satisfied == constraints.size()) {
      report.converged = true;
      break;
    }
  }

  if (soft) {
    report.slacks.resize(constraints.size());
    for (std::size_t c = 0; c < constraints.size(); ++c) {
      const double lambda = constraints[c].sense == Sense::LeqZero ? cfg.lambda_neq : cfg.lambda_eq;
      report.slacks[c] = report.duals[c] / lambda;
    }
  }
  report.divergence = logdet_divergence(fk);
  if (report_out) *report_out = std::move(report);
  return fk;
}

/// Extreme eigenvalues of K̂, for PSD and rank checks.
inline std::pair<double, double> kernel_eigen_range(const FactoredKernel& fk) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fk.kernel_hat(), Eigen::EigenvaluesOnly);
  return {es.eigenvalues()(0), es.eigenvalues()(es.eigenvalues().size() - 1)};
}

}  // namespace sklr

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace sklr {

struct ClusteringResult {
  std::vector<int> assignments;
  double objective = 0.0;
  int n_init_used = 0;
  std::vector<int> iterations;                      // Lloyd iterations per restart
  std::vector<std::vector<double>> objective_trace;  // per restart, one entry per assignment
};

struct KMeansOptions {
  int n_init = 10;
  int max_iter = 300;
  std::uint64_t seed = 0;
};

namespace detail {

// Kernel-space distance of every point to every cluster mean.
inline Eigen::MatrixXd centroid_distances(const Eigen::MatrixXd& K, const std::vector<int>& assign, int k) {
  const auto n = K.rows();
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, k);
  Eigen::VectorXd size = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Z(i, assign[static_cast<std::size_t>(i)]) = 1.0;
    size(assign[static_cast<std::size_t>(i)]) += 1.0;
  }
  const Eigen::MatrixXd F = K * Z;  // F(i, c) = Σ_{j∈c} K_ij
  Eigen::VectorXd within(k);
  for (int c = 0; c < k; ++c) within(c) = Z.col(c).dot(F.col(c));
  Eigen::MatrixXd D(n, k);
  for (int c = 0; c < k; ++c) {
    if (size(c) == 0.0) {
      D.col(c).setConstant(std::numeric_limits<double>::infinity());
      continue;
    }
    D.col(c) = K.diagonal() - (2.0 / size(c)) * F.col(c) +
               Eigen::VectorXd::Constant(n, within(c) / (size(c) * size(c)));
  }
  return D.cwiseMax(0.0);
}

inline double objective_of(const Eigen::MatrixXd& D, const std::vector<int>& assign) {
  double s = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) s += D(static_cast<Eigen::Index>(i), assign[i]);
  return s;
}

// Moves the point farthest from its centroid into each empty cluster.
inline void repair_empty(const Eigen::MatrixXd& K, std::vector<int>& assign, int k) {
  while (true) {
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int a : assign) ++count[static_cast<std::size_t>(a)];
    auto empty = std::find(count.begin(), count.end(), 0);
    if (empty == count.end()) return;
    const Eigen::MatrixXd D = centroid_distances(K, assign, k);
    std::size_t best = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (count[static_cast<std::size_t>(assign[i])] < 2) continue;
      const double d = D(static_cast<Eigen::Index>(i), assign[i]);
      if (d > far) {
        far = d;
        best = i;
      }
    }
    assign[best] = static_cast<int>(empty - count.begin());
  }
}

// D²-weighted seeding in kernel space from a uniformly drawn first center.
inline std::vector<Eigen::Index> spread_seeds(const Eigen::MatrixXd& K, int k, std::mt19937_64& rng) {
  const auto n = K.rows();
  std::vector<Eigen::Index> centers;
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.push_back(first(rng));
  taken[static_cast<std::size_t>(centers[0])] = true;
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    const auto c = centers.back();
    for (Eigen::Index i = 0; i < n; ++i)
      best(i) = std::min(best(i), std::max(0.0, K(i, i) - 2.0 * K(i, c) + K(c, c)));
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!taken[static_cast<std::size_t>(i)]) total += best(i);
    Eigen::Index pick = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)] || best(i) <= 0.0) continue;
        acc += best(i);
        pick = i;
        if (acc >= target) break;
      }
    }
    if (pick < 0) {
      std::vector<Eigen::Index> free;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!taken[static_cast<std::size_t>(i)]) free.push_back(i);
      std::uniform_int_distribution<std::size_t> d(0, free.size() - 1);
      pick = free[d(rng)];
    }
    taken[static_cast<std::size_t>(pick)] = true;
    centers.push_back(pick);
  }
  return centers;
}

}  // namespace detail

/// Lloyd-style kernel k-means; best of `n_init` seeded restarts by objective
/// (sum of kernel-space distances of points to their cluster means).
inline ClusteringResult kernel_kmeans(const Eigen::MatrixXd& K, int k, const KMeansOptions& opt = {}) {
  const auto n = K.rows();
  if (K.cols() != n) throw std::invalid_argument("kernel_kmeans: kernel must be square");
  if (k <= 0) throw std::invalid_argument("kernel_kmeans: cluster count must be positive");
  if (k > n) throw std::invalid_argument("kernel_kmeans: more clusters than points");
  if (opt.n_init < 1) throw std::invalid_argument("kernel_kmeans: n_init must be positive");

  std::mt19937_64 rng(opt.seed);
  ClusteringResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opt.n_init; ++restart) {
    const auto centers = detail::spread_seeds(K, k, rng);
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      double dmin = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const auto j = centers[static_cast<std::size_t>(c)];
        const double d = i == j ? -1.0 : K(i, i) - 2.0 * K(i, j) + K(j, j);
        if (d < dmin) {
          dmin = d;
          assign[static_cast<std::size_t>(i)] = c;
        }
      }
    }
    detail::repair_empty(K, assign, k);
    std::vector<double> trace{detail::objective_of(detail::centroid_distances(K, assign, k), assign)};
    int iter = 0;
    for (; iter < opt.max_iter; ++iter) {
      const Eigen::MatrixXd D = detail::centroid_distances(K, assign, k);
      std::vector<int> next = assign;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = assign[static_cast<std::size_t>(i)];
        double dmin = D(i, arg);
        for (int c = 0; c < k; ++c)
          if (D(i, c) < dmin) {
            dmin = D(i, c);
            arg = c;
          }
        next[static_cast<std::size_t>(i)] = arg;
      }
      if (next == assign) break;
      assign = std::move(next);
      detail::repair_empty(K, assign, k);
      trace.push_back(detail::objective_of(detail::centroid_distances(K, assign, k), assign));
    }
    best.iterations.push_back(iter);
    best.objective_trace.push_back(trace);
    if (trace.back() < best.objective) {
      best.objective = trace.back();
      best.assignments = assign;
    }
  }
  best.n_init_used = opt.n_init;
  return best;
}

inline double choose2(double x) { return 0.5 * x * (x - 1.0); }

/// Adjusted Rand index from the contingency table of two partitions. When the
/// chance-corrected denominator vanishes (both partitions trivial) the result
/// is 1 for identical partitions and 0 otherwise, and `degenerate` is set.
inline double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b, bool* degenerate = nullptr) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand: partitions differ in length");
  if (a.size() < 2) throw std::invalid_argument("adjusted_rand: needs at least two items");
  if (degenerate) *degenerate = false;
  std::map<std::pair<int, int>, double> cells;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cells[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (auto& [key, c] : cells) index += choose2(c);
  for (auto& [key, c] : rows) sa += choose2(c);
  for (auto& [key, c] : cols) sb += choose2(c);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double maximum = 0.5 * (sa + sb);
  const double denom = maximum - expected;
  if (denom == 0.0) {
    if (degenerate) *degenerate = true;
    // Identical up to relabeling iff every row and column maps to a single cell.
    return cells.size() == rows.size() && cells.size() == cols.size() ? 1.0 : 0.0;
  }
  return (index - expected) / denom;
}

}  // namespace sklr

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>

#include <Eigen/Core>

#include "sklr/dataset.hpp"

namespace sklr {

/// Isotropic Gaussian blobs: `per_cluster` points around each row of
/// `centers`, labeled by row index.
inline Dataset make_blobs(const Eigen::MatrixXd& centers, double sigma, std::size_t per_cluster,
                          std::uint64_t seed) {
  if (centers.rows() < 1 || per_cluster < 1) throw std::invalid_argument("make_blobs: nothing to generate");
  if (!(sigma >= 0.0)) throw std::invalid_argument("make_blobs: sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(per_cluster) * centers.rows();
  Dataset ds;
  ds.features.resize(n, centers.cols());
  ds.labels.emplace();
  ds.ids.resize(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    for (std::size_t p = 0; p < per_cluster; ++p, ++row) {
      for (Eigen::Index d = 0; d < centers.cols(); ++d) ds.features(row, d) = centers(c, d) + sigma * noise(rng);
      ds.labels->push_back(static_cast<int>(c));
      ds.ids[static_cast<std::size_t>(row)] = static_cast<std::size_t>(row);
    }
  }
  return ds;
}

/// Four clusters on the corners of the unit square. Labels: 0 (0,0), 1 (0,1),
/// 2 (1,0), 3 (1,1).
inline Dataset unit_square_clusters(double sigma, std::size_t per_cluster, std::uint64_t seed) {
  Eigen::MatrixXd centers(4, 2);
  centers << 0, 0, 0, 1, 1, 0, 1, 1;
  return make_blobs(centers, sigma, per_cluster, seed);
}

/// Super-clusters of unit_square_clusters: left column {0, 1}, right column {2, 3}.
inline std::map<int, int> unit_square_super_labels() { return {{0, 0}, {1, 0}, {2, 1}, {3, 1}}; }

}  // namespace sklr

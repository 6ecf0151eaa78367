#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sklr/dataset.hpp"
#include "sklr/error.hpp"
#include "sklr/factored_kernel.hpp"

namespace sklr {

// Binary containers, host byte order (little-endian on every supported target):
//   matrix:          "SKLRMAT1" u64 rows u64 cols, rows*cols f64 row-major
//   factored kernel: "SKLRFAC1" u64 n u64 r i64 clipped,
//                    Q (n*r f64 row-major), G (r*r f64 row-major), eigenvalues (r f64)

inline constexpr std::array<char, 8> kMatrixMagic{'S', 'K', 'L', 'R', 'M', 'A', 'T', '1'};
inline constexpr std::array<char, 8> kFactorMagic{'S', 'K', 'L', 'R', 'F', 'A', 'C', '1'};

namespace detail {

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated container '" + path + "'");
  return v;
}

inline void put_matrix_body(std::ostream& out, const Eigen::MatrixXd& M) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R = M;
  out.write(reinterpret_cast<const char*>(R.data()), static_cast<std::streamsize>(sizeof(double) * R.size()));
}

inline Eigen::MatrixXd get_matrix_body(std::istream& in, std::uint64_t rows, std::uint64_t cols,
                                       const std::string& path) {
  if (rows > (1u << 24) || cols > (1u << 24)) throw ParseError("implausible matrix size in '" + path + "'");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> R(static_cast<Eigen::Index>(rows),
                                                                           static_cast<Eigen::Index>(cols));
  in.read(reinterpret_cast<char*>(R.data()), static_cast<std::streamsize>(sizeof(double) * R.size()));
  if (!in) throw ParseError("truncated container '" + path + "'");
  return R;
}

inline void check_magic(std::istream& in, const std::array<char, 8>& magic, const std::string& path) {
  std::array<char, 8> got{};
  in.read(got.data(), 8);
  if (!in || got != magic) throw ParseError("'" + path + "' is not a " + std::string(magic.data(), 8) + " container");
}

}  // namespace detail

inline void save_matrix(const Eigen::MatrixXd& M, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out.write(kMatrixMagic.data(), 8);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(M.rows()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(M.cols()));
  detail::put_matrix_body(out, M);
}

inline Eigen::MatrixXd load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  detail::check_magic(in, kMatrixMagic, path);
  const auto rows = detail::get<std::uint64_t>(in, path);
  const auto cols = detail::get<std::uint64_t>(in, path);
  return detail::get_matrix_body(in, rows, cols, path);
}

/// Comma-separated text, 17 significant digits.
inline void save_matrix_text(const Eigen::MatrixXd& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << M(i, j);
    out << '\n';
  }
}

inline Eigen::MatrixXd load_matrix_text(const std::string& path) {
  Dataset ds = load_dataset(path, DataFormat::Delimited);
  return ds.features;
}

/// Binary container if the file starts with the matrix magic, text otherwise.
inline Eigen::MatrixXd load_matrix_any(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::array<char, 8> head{};
  in.read(head.data(), 8);
  if (in && head == kMatrixMagic) return load_matrix(path);
  return load_matrix_text(path);
}

inline void save_factored(const FactoredKernel& fk, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out.write(kFactorMagic.data(), 8);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(fk.n()));
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(fk.rank()));
  detail::put<std::int64_t>(out, fk.clipped);
  detail::put_matrix_body(out, fk.Q);
  detail::put_matrix_body(out, fk.G);
  detail::put_matrix_body(out, fk.k0_eigenvalues);
}

inline FactoredKernel load_factored(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  detail::check_magic(in, kFactorMagic, path);
  const auto n = detail::get<std::uint64_t>(in, path);
  const auto r = detail::get<std::uint64_t>(in, path);
  FactoredKernel fk;
  fk.clipped = static_cast<int>(detail::get<std::int64_t>(in, path));
  fk.Q = detail::get_matrix_body(in, n, r, path);
  fk.G = detail::get_matrix_body(in, r, r, path);
  fk.k0_eigenvalues = detail::get_matrix_body(in, r, 1, path);
  fk.validate();
  return fk;
}

// Cluster assignments: header `index,cluster`, then one row per item.

inline void save_assignments(const std::vector<int>& assign, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "index,cluster\n";
  for (std::size_t i = 0; i < assign.size(); ++i) out << i << ',' << assign[i] << '\n';
}

inline std::vector<int> load_assignments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open assignment file '" + path + "'");
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (view.empty() || view.front() == '#' || view == "index,cluster") continue;
    auto toks = detail::split(view, ',');
    if (toks.size() != 2) throw ParseError("expected 'index,cluster'", lineno);
    const auto idx = detail::parse_integer(toks[0], lineno);
    if (idx != static_cast<long long>(out.size())) throw ParseError("assignment indices must be 0,1,2,...", lineno);
    out.push_back(static_cast<int>(detail::parse_integer(toks[1], lineno)));
  }
  if (out.empty()) throw ParseError("empty assignment file '" + path + "'");
  return out;
}

}  // namespace sklr

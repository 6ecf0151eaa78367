#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sklr/error.hpp"

namespace sklr {

/// n items in d dimensions, optionally labeled. Item identity is the row
/// index; `ids` tracks the row each item had in the dataset it was drawn
/// from, so subsamples and splits can be traced back.
struct Dataset {
  Eigen::MatrixXd features;
  std::optional<std::vector<int>> labels;
  std::vector<std::size_t> ids;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  bool has_labels() const { return labels.has_value(); }

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const {
    if (features.rows() < 1) throw std::invalid_argument("empty dataset");
    if (labels && labels->size() != size())
      throw std::invalid_argument("label count does not match item count");
    if (ids.size() != size())
      throw std::invalid_argument("id count does not match item count");
  }

  /// Rows `rows` of this dataset, in the given order.
  Dataset select(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    if (labels) out.labels.emplace();
    out.ids.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out.features.row(static_cast<Eigen::Index>(r)) =
          features.row(static_cast<Eigen::Index>(rows[r]));
      if (labels) out.labels->push_back((*labels)[rows[r]]);
      out.ids.push_back(ids[rows[r]]);
    }
    return out;
  }
};

enum class DataFormat { Delimited, SparseIndexValue };

inline DataFormat parse_data_format(std::string_view s) {
  if (s == "delimited" || s == "csv") return DataFormat::Delimited;
  if (s == "sparse" || s == "sparse-index-value") return DataFormat::SparseIndexValue;
  throw std::invalid_argument("unknown data format '" + std::string(s) + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError("non-numeric token '" + std::string(tok) + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + std::string(tok) + "'", line);
  return v;
}

inline long long parse_integer(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
    // Accept integral reals like "3.0" for labels written by other tools.
    double d = parse_real(tok, line);
    if (d != std::floor(d)) throw ParseError("non-integer label '" + std::string(tok) + "'", line);
    return static_cast<long long>(d);
  }
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline Dataset assemble(std::vector<std::vector<double>>& rows, std::vector<int>* labels) {
  Dataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  ds.features.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) ds.features(i, j) = rows[i][j];
  if (labels) ds.labels = std::move(*labels);
  ds.ids.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) ds.ids[i] = i;
  return ds;
}

inline Dataset parse_delimited(std::istream& in, bool labels_in_last_column) {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  bool labeled = labels_in_last_column;
  std::size_t arity = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (rows.empty() && trim(view.substr(1)) == "labels") labeled = true;
      continue;
    }
    auto toks = split(view, ',');
    if (arity == 0) {
      arity = toks.size();
      if (labeled && arity < 2)
        throw ParseError("labeled row needs at least one feature and a label", lineno);
    } else if (toks.size() != arity) {
      throw ParseError("inconsistent dimensionality: expected " + std::to_string(arity) +
                           " columns, found " + std::to_string(toks.size()),
                       lineno);
    }
    const std::size_t nfeat = labeled ? arity - 1 : arity;
    std::vector<double> row(nfeat);
    for (std::size_t c = 0; c < nfeat; ++c) row[c] = parse_real(toks[c], lineno);
    if (labeled) labels.push_back(static_cast<int>(parse_integer(toks.back(), lineno)));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty dataset");
  return assemble(rows, labeled ? &labels : nullptr);
}

inline Dataset parse_sparse(std::istream& in, std::size_t declared_dim) {
  std::vector<std::vector<std::pair<std::size_t, double>>> entries;
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  std::size_t max_index = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto toks = split_ws(view);
    labels.push_back(static_cast<int>(parse_integer(toks.front(), lineno)));
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      auto colon = toks[t].find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected idx:val, found '" + std::string(toks[t]) + "'", lineno);
      auto idx = parse_integer(toks[t].substr(0, colon), lineno);
      if (idx < 1) throw ParseError("sparse indices are 1-based", lineno);
      const auto uidx = static_cast<std::size_t>(idx);
      if (declared_dim > 0 && uidx > declared_dim)
        throw ParseError("index " + std::to_string(uidx) + " exceeds declared dimension " +
                             std::to_string(declared_dim),
                         lineno);
      max_index = std::max(max_index, uidx);
      row.emplace_back(uidx - 1, parse_real(toks[t].substr(colon + 1), lineno));
    }
    entries.push_back(std::move(row));
  }
  if (entries.empty()) throw ParseError("empty dataset");
  const std::size_t d = declared_dim > 0 ? declared_dim : max_index;
  if (d == 0) throw ParseError("sparse dataset has no features");
  std::vector<std::vector<double>> rows(entries.size(), std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (auto [c, v] : entries[i]) rows[i][c] = v;
  return assemble(rows, &labels);
}

}  // namespace detail

/// Reads a dataset. Delimited files are comma-separated with one item per row;
/// a leading `#labels` line (or `labels_in_last_column`) marks the final column
/// as the integer class label. Sparse files are `label idx:val ...` with
/// 1-based indices; `sparse_dim` of 0 infers d from the largest index.
inline Dataset load_dataset(const std::string& path, DataFormat format,
                            bool labels_in_last_column = false, std::size_t sparse_dim = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file '" + path + "'");
  return format == DataFormat::Delimited ? detail::parse_delimited(in, labels_in_last_column)
                                         : detail::parse_sparse(in, sparse_dim);
}

inline Dataset parse_dataset(const std::string& text, DataFormat format,
                             bool labels_in_last_column = false, std::size_t sparse_dim = 0) {
  std::istringstream in(text);
  return format == DataFormat::Delimited ? detail::parse_delimited(in, labels_in_last_column)
                                         : detail::parse_sparse(in, sparse_dim);
}

/// Writes the delimited format; `precision` significant digits (17 round-trips
/// doubles exactly).
inline void write_delimited(const Dataset& ds, std::ostream& out, int precision = 17) {
  if (ds.labels) out << "#labels\n";
  out << std::setprecision(precision);
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      if (j) out << ',';
      out << ds.features(i, j);
    }
    if (ds.labels) out << ',' << (*ds.labels)[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path, int precision = 17) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dataset file '" + path + "'");
  write_delimited(ds, out, precision);
}

/// Row indices grouped by label, classes in ascending label order.
inline std::map<int, std::vector<std::size_t>> members_by_class(const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
  return out;
}

/// Exactly `count` items from every class, drawn without replacement. The
/// result keeps the original row order.
inline Dataset subsample_per_class(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (!ds.labels) throw std::invalid_argument("subsample_per_class requires labels");
  if (count == 0) throw std::invalid_argument("subsample count must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& [label, members] : members_by_class(*ds.labels)) {
    if (members.size() < count)
      throw std::invalid_argument("class " + std::to_string(label) + " has " +
                                  std::to_string(members.size()) + " items, fewer than " +
                                  std::to_string(count));
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(chosen.begin(), chosen.end());
  return ds.select(chosen);
}

/// Disjoint (train, holdout) split, stratified per class when labels exist.
/// Each class contributes round(fraction * class size) training items.
inline std::pair<Dataset, Dataset> split_train_holdout(const Dataset& ds, double train_fraction,
                                                       std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  if (ds.size() < 2) throw std::invalid_argument("split needs at least two items");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> groups;
  if (ds.labels) {
    for (auto& [label, members] : members_by_class(*ds.labels)) groups.push_back(members);
  } else {
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    groups.push_back(std::move(all));
  }
  std::vector<std::size_t> train, hold;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    auto ntrain = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(g.size())));
    train.insert(train.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(ntrain));
    hold.insert(hold.end(), g.begin() + static_cast<std::ptrdiff_t>(ntrain), g.end());
  }
  // Keep both sides non-empty even when rounding starves one of them.
  if (train.empty()) {
    train.push_back(hold.back());
    hold.pop_back();
  } else if (hold.empty()) {
    hold.push_back(train.back());
    train.pop_back();
  }
  std::sort(train.begin(), train.end());
  std::sort(hold.begin(), hold.end());
  return {ds.select(train), ds.select(hold)};
}

}  // namespace sklr

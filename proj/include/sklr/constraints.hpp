#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sklr/dataset.hpp"
#include "sklr/error.hpp"
#include "sklr/factored_kernel.hpp"

namespace sklr {

enum class TripletKind { Neq, Eq };

/// Neq(i, j, k): k is the outlier among the three. Eq(i, j, k): all three are
/// equidistant.
struct Triplet {
  TripletKind kind = TripletKind::Neq;
  std::size_t i = 0, j = 0, k = 0;

  static Triplet neq(std::size_t i, std::size_t j, std::size_t k) { return {TripletKind::Neq, i, j, k}; }
  static Triplet eq(std::size_t i, std::size_t j, std::size_t k) { return {TripletKind::Eq, i, j, k}; }

  bool distinct() const { return i != j && j != k && i != k; }
  friend bool operator==(const Triplet&, const Triplet&) = default;
};

enum class Sense { LeqZero, EqZero };

/// Which expanded scalar form of a triplet a rank-2 constraint is.
/// Neq forms: 0 = (i,j|k), 1 = (j,i|k). Eq forms: 0 = (i,j=k), 1 = (j,i=k), 2 = (k,i=j).
struct ConstraintOrigin {
  std::size_t triplet = 0;
  int form = 0;
};

/// One scalar constraint tr(K C) <= 0 or = 0 with C = U Vᵀ held in factored
/// form. U and V have n rows before the Q-transform and r rows after.
struct Rank2Constraint {
  Eigen::Matrix<double, Eigen::Dynamic, 2> U;
  Eigen::Matrix<double, Eigen::Dynamic, 2> V;
  Sense sense = Sense::LeqZero;
  ConstraintOrigin origin;

  Eigen::Index dim() const { return U.rows(); }
  Eigen::MatrixXd dense() const { return U * V.transpose(); }
};

namespace detail {

inline void check_symmetric_factors(const Rank2Constraint& rc) {
  if (rc.U.rows() != rc.V.rows()) throw std::invalid_argument("rank-2 constraint: U and V row mismatch");
  std::vector<Eigen::Index> support;
  for (Eigen::Index a = 0; a < rc.U.rows(); ++a)
    if (rc.U.row(a).squaredNorm() + rc.V.row(a).squaredNorm() > 0.0) support.push_back(a);
  double scale = 1.0;
  for (auto a : support) scale = std::max(scale, rc.U.row(a).norm() * rc.V.row(a).norm());
  for (std::size_t p = 0; p < support.size(); ++p)
    for (std::size_t q = p + 1; q < support.size(); ++q) {
      const auto a = support[p], b = support[q];
      const double cab = rc.U.row(a).dot(rc.V.row(b));
      const double cba = rc.U.row(b).dot(rc.V.row(a));
      if (std::abs(cab - cba) > 1e-12 * scale)
        throw std::invalid_argument("rank-2 constraint: U Vᵀ is not symmetric");
    }
}

inline Rank2Constraint pairwise_difference_form(std::size_t n, double scale, std::size_t a,
                                                std::size_t b, std::size_t c, Sense sense,
                                                ConstraintOrigin origin) {
  // scale² (e_a - e_b)(e_a - e_b)ᵀ - (e_a - e_c)(e_a - e_c)ᵀ
  Rank2Constraint rc;
  rc.U.setZero(static_cast<Eigen::Index>(n), 2);
  rc.V.setZero(static_cast<Eigen::Index>(n), 2);
  const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b),
             ic = static_cast<Eigen::Index>(c);
  rc.U(ia, 0) = scale;
  rc.U(ib, 0) = -scale;
  rc.V(ia, 0) = scale;
  rc.V(ib, 0) = -scale;
  rc.U(ia, 1) = 1.0;
  rc.U(ic, 1) = -1.0;
  rc.V(ia, 1) = -1.0;
  rc.V(ic, 1) = 1.0;
  rc.sense = sense;
  rc.origin = origin;
  check_symmetric_factors(rc);
  return rc;
}

inline void check_triplet(const Triplet& t, std::size_t n) {
  if (!t.distinct()) throw std::invalid_argument("triplet indices must be pairwise distinct");
  if (t.i >= n || t.j >= n || t.k >= n)
    throw std::invalid_argument("triplet index out of range for " + std::to_string(n) + " items");
}

}  // namespace detail

/// Builds a constraint from explicit factors, verifying that U Vᵀ is symmetric.
inline Rank2Constraint make_rank2(Eigen::Matrix<double, Eigen::Dynamic, 2> U,
                                  Eigen::Matrix<double, Eigen::Dynamic, 2> V, Sense sense,
                                  ConstraintOrigin origin = {}) {
  Rank2Constraint rc{std::move(U), std::move(V), sense, origin};
  detail::check_symmetric_factors(rc);
  return rc;
}

/// C_(i,j|k) and C_(j,i|k), each γ²(e_a−e_b)(e_a−e_b)ᵀ − (e_a−e_k)(e_a−e_k)ᵀ.
inline std::array<Rank2Constraint, 2> expand_neq(const Triplet& t, std::size_t n, double gamma2,
                                                 std::size_t triplet_index = 0) {
  if (t.kind != TripletKind::Neq) throw std::invalid_argument("expand_neq needs a Neq triplet");
  if (!(gamma2 > 1.0)) throw std::invalid_argument("gamma^2 must exceed 1");
  detail::check_triplet(t, n);
  const double g = std::sqrt(gamma2);
  return {detail::pairwise_difference_form(n, g, t.i, t.j, t.k, Sense::LeqZero, {triplet_index, 0}),
          detail::pairwise_difference_form(n, g, t.j, t.i, t.k, Sense::LeqZero, {triplet_index, 1})};
}

/// C_(i,j=k), C_(j,i=k), C_(k,i=j): δ(i,j)=δ(i,k), δ(j,i)=δ(j,k), δ(k,i)=δ(k,j).
inline std::array<Rank2Constraint, 3> expand_eq(const Triplet& t, std::size_t n,
                                                std::size_t triplet_index = 0) {
  if (t.kind != TripletKind::Eq) throw std::invalid_argument("expand_eq needs an Eq triplet");
  detail::check_triplet(t, n);
  return {detail::pairwise_difference_form(n, 1.0, t.i, t.j, t.k, Sense::EqZero, {triplet_index, 0}),
          detail::pairwise_difference_form(n, 1.0, t.j, t.i, t.k, Sense::EqZero, {triplet_index, 1}),
          detail::pairwise_difference_form(n, 1.0, t.k, t.i, t.j, Sense::EqZero, {triplet_index, 2})};
}

/// Every scalar constraint implied by `ts`, in triplet order.
inline std::vector<Rank2Constraint> expand_all(const std::vector<Triplet>& ts, std::size_t n,
                                               double gamma2) {
  std::vector<Rank2Constraint> out;
  out.reserve(ts.size() * 3);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    if (ts[t].kind == TripletKind::Neq) {
      for (auto& rc : expand_neq(ts[t], n, gamma2, t)) out.push_back(std::move(rc));
    } else {
      for (auto& rc : expand_eq(ts[t], n, t)) out.push_back(std::move(rc));
    }
  }
  return out;
}

/// tr(K̂ Ĉ) = tr((GᵀV̂)ᵀ (GᵀÛ)), linear in K̂.
inline double violation(const FactoredKernel& fk, const Rank2Constraint& rc) {
  if (rc.dim() != fk.rank()) throw std::invalid_argument("violation: constraint not in kernel space");
  const Eigen::Matrix<double, Eigen::Dynamic, 2> X = fk.G.transpose() * rc.U;
  const Eigen::Matrix<double, Eigen::Dynamic, 2> Y = fk.G.transpose() * rc.V;
  return X.col(0).dot(Y.col(0)) + X.col(1).dot(Y.col(1));
}

/// Scale-relative satisfaction threshold ε = 1e-6 tr(K̂) / r.
inline double satisfaction_epsilon(const FactoredKernel& fk, double relative = 1e-6) {
  return relative * fk.trace_hat() / static_cast<double>(fk.rank());
}

inline bool is_satisfied(double value, Sense sense, double eps) {
  return sense == Sense::LeqZero ? value <= eps : std::abs(value) <= eps;
}

/// Amount by which a value breaks its constraint (0 when it holds exactly).
inline double excess(double value, Sense sense) {
  return sense == Sense::LeqZero ? std::max(0.0, value) : std::abs(value);
}

// ---------------------------------------------------------------------------
// Synthesis from labels

enum class ConstraintMode { Multiclass, Binary, Mixed };
enum class EqMode { None, SameClass, CrossClass, Random };

inline ConstraintMode parse_constraint_mode(std::string_view s) {
  if (s == "multiclass") return ConstraintMode::Multiclass;
  if (s == "binary") return ConstraintMode::Binary;
  if (s == "mixed") return ConstraintMode::Mixed;
  throw std::invalid_argument("unknown constraint mode '" + std::string(s) + "'");
}

inline std::string to_string(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::Multiclass: return "multiclass";
    case ConstraintMode::Binary: return "binary";
    case ConstraintMode::Mixed: return "mixed";
  }
  return "?";
}

inline EqMode parse_eq_mode(std::string_view s) {
  if (s == "none") return EqMode::None;
  if (s == "same-class" || s == "same_class") return EqMode::SameClass;
  if (s == "cross-class" || s == "cross_class") return EqMode::CrossClass;
  if (s == "random") return EqMode::Random;
  throw std::invalid_argument("unknown equality mode '" + std::string(s) + "'");
}

inline std::string to_string(EqMode m) {
  switch (m) {
    case EqMode::None: return "none";
    case EqMode::SameClass: return "same-class";
    case EqMode::CrossClass: return "cross-class";
    case EqMode::Random: return "random";
  }
  return "?";
}

struct SynthesisOptions {
  std::size_t n_neq = 0;
  ConstraintMode mode = ConstraintMode::Multiclass;
  EqMode eq_mode = EqMode::None;
  std::size_t n_eq = 0;
  std::uint64_t seed = 0;
  /// Fine label -> super label, required for Binary and Mixed.
  std::map<int, int> binary_map;
};

/// Parses "0:0,1:0,2:1,3:1".
inline std::map<int, int> parse_label_map(std::string_view s) {
  std::map<int, int> out;
  if (detail::trim(s).empty()) return out;
  for (auto entry : detail::split(s, ',')) {
    auto colon = entry.find(':');
    if (colon == std::string_view::npos)
      throw std::invalid_argument("label map entries look like fine:super");
    out[static_cast<int>(detail::parse_integer(entry.substr(0, colon), 0))] =
        static_cast<int>(detail::parse_integer(entry.substr(colon + 1), 0));
  }
  return out;
}

inline std::vector<int> remap_labels(const std::vector<int>& labels, const std::map<int, int>& map) {
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = map.find(labels[i]);
    if (it == map.end())
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " missing from label map");
    out[i] = it->second;
  }
  return out;
}

namespace detail {

struct ClassIndex {
  std::vector<int> labels;
  std::map<int, std::vector<std::size_t>> members;
  std::vector<std::size_t> pair_capable;  // items whose class has another member

  explicit ClassIndex(std::vector<int> l) : labels(std::move(l)), members(members_by_class(labels)) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (members[labels[i]].size() >= 2) pair_capable.push_back(i);
  }
};

template <class Rng>
std::size_t pick(const std::vector<std::size_t>& v, Rng& rng) {
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

template <class Rng>
Triplet draw_neq(const ClassIndex& ci, Rng& rng) {
  const std::size_t i = pick(ci.pair_capable, rng);
  const auto& same = ci.members.at(ci.labels[i]);
  std::size_t j = i;
  while (j == i) j = pick(same, rng);
  const std::size_t outsiders = ci.labels.size() - same.size();
  std::uniform_int_distribution<std::size_t> d(0, outsiders - 1);
  std::size_t skip = d(rng), k = 0;
  for (std::size_t a = 0; a < ci.labels.size(); ++a) {
    if (ci.labels[a] == ci.labels[i]) continue;
    if (skip-- == 0) {
      k = a;
      break;
    }
  }
  return Triplet::neq(i, j, k);
}

}  // namespace detail

/// Neq triplets (two items of one class, the outlier from another) followed by
/// Eq triplets (three items of one class, or one from each of three classes).
/// Deterministic for a fixed seed.
inline std::vector<Triplet> synthesize_from_labels(const std::vector<int>& labels,
                                                   const SynthesisOptions& opt) {
  std::mt19937_64 rng(opt.seed);
  std::vector<Triplet> out;
  out.reserve(opt.n_neq + opt.n_eq);
  detail::ClassIndex fine(labels);
  std::optional<detail::ClassIndex> coarse;
  if (opt.mode != ConstraintMode::Multiclass) {
    if (opt.binary_map.empty())
      throw std::invalid_argument("binary and mixed modes need a super-label map");
    coarse.emplace(remap_labels(labels, opt.binary_map));
  }
  auto usable = [](const detail::ClassIndex& ci) {
    return ci.members.size() >= 2 && !ci.pair_capable.empty();
  };
  if (opt.n_neq > 0) {
    if (opt.mode != ConstraintMode::Binary && !usable(fine))
      throw std::invalid_argument("Neq synthesis needs two classes and a class with two items");
    if (coarse && !usable(*coarse))
      throw std::invalid_argument("Neq synthesis needs two super classes and one with two items");
  }
  std::bernoulli_distribution coin(0.5);
  for (std::size_t t = 0; t < opt.n_neq; ++t) {
    bool use_coarse = opt.mode == ConstraintMode::Binary ||
                      (opt.mode == ConstraintMode::Mixed && coin(rng));
    out.push_back(detail::draw_neq(use_coarse ? *coarse : fine, rng));
  }

  if (opt.eq_mode == EqMode::None || opt.n_eq == 0) return out;
  std::vector<std::size_t> triple_capable;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (fine.members.at(labels[i]).size() >= 3) triple_capable.push_back(i);
  const std::size_t n_same = opt.eq_mode == EqMode::SameClass ? opt.n_eq
                             : opt.eq_mode == EqMode::Random  ? (opt.n_eq + 1) / 2
                                                              : 0;
  const std::size_t n_cross = opt.n_eq - n_same;
  if (n_same > 0 && triple_capable.empty())
    throw std::invalid_argument("same-class Eq synthesis needs a class with three items");
  if (n_cross > 0 && fine.members.size() < 3)
    throw std::invalid_argument("cross-class Eq synthesis needs three classes");
  std::vector<int> classes;
  for (auto& [label, m] : fine.members) classes.push_back(label);
  for (std::size_t t = 0; t < n_same; ++t) {
    const std::size_t i = detail::pick(triple_capable, rng);
    const auto& same = fine.members.at(labels[i]);
    std::size_t j = i, k = i;
    while (j == i) j = detail::pick(same, rng);
    while (k == i || k == j) k = detail::pick(same, rng);
    out.push_back(Triplet::eq(i, j, k));
  }
  for (std::size_t t = 0; t < n_cross; ++t) {
    std::vector<int> cs = classes;
    std::shuffle(cs.begin(), cs.end(), rng);
    out.push_back(Triplet::eq(detail::pick(fine.members.at(cs[0]), rng),
                              detail::pick(fine.members.at(cs[1]), rng),
                              detail::pick(fine.members.at(cs[2]), rng)));
  }
  return out;
}

/// Swaps the outlier of round(fraction * #Neq) uniformly chosen Neq triplets
/// with one of its two inliers (fair coin). Eq triplets and order are kept.
inline std::vector<Triplet> corrupt(std::vector<Triplet> ts, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::invalid_argument("corruption fraction must lie in [0, 1]");
  std::vector<std::size_t> neq;
  for (std::size_t t = 0; t < ts.size(); ++t)
    if (ts[t].kind == TripletKind::Neq) neq.push_back(t);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(neq.size())));
  std::mt19937_64 rng(seed);
  std::shuffle(neq.begin(), neq.end(), rng);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t c = 0; c < count; ++c) {
    Triplet& t = ts[neq[c]];
    if (coin(rng))
      std::swap(t.i, t.k);
    else
      std::swap(t.j, t.k);
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Text format: `neq i j k` / `eq i j k`, 0-based, `#` comments.

inline std::vector<Triplet> parse_triplets(std::istream& in) {
  std::vector<Triplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = detail::trim(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = detail::trim(view.substr(0, hash));
    if (view.empty()) continue;
    auto toks = detail::split_ws(view);
    if (toks.size() != 4) throw ParseError("expected '<neq|eq> i j k'", lineno);
    TripletKind kind;
    if (toks[0] == "neq")
      kind = TripletKind::Neq;
    else if (toks[0] == "eq")
      kind = TripletKind::Eq;
    else
      throw ParseError("unknown constraint kind '" + std::string(toks[0]) + "'", lineno);
    std::array<std::size_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      auto v = detail::parse_integer(toks[static_cast<std::size_t>(a) + 1], lineno);
      if (v < 0) throw ParseError("negative item index", lineno);
      idx[static_cast<std::size_t>(a)] = static_cast<std::size_t>(v);
    }
    Triplet t{kind, idx[0], idx[1], idx[2]};
    if (!t.distinct()) throw ParseError("triplet indices must be pairwise distinct", lineno);
    out.push_back(t);
  }
  return out;
}

inline std::vector<Triplet> load_triplets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open constraint file '" + path + "'");
  return parse_triplets(in);
}

inline void write_triplets(const std::vector<Triplet>& ts, std::ostream& out) {
  for (const auto& t : ts)
    out << (t.kind == TripletKind::Neq ? "neq " : "eq ") << t.i << ' ' << t.j << ' ' << t.k << '\n';
}

inline void save_triplets(const std::vector<Triplet>& ts, const std::string& path,
                          const std::string& header = {}) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write constraint file '" + path + "'");
  if (!header.empty()) out << "# " << header << '\n';
  write_triplets(ts, out);
}

/// Throws std::invalid_argument naming the first triplet with an index >= n.
inline void validate_triplets(const std::vector<Triplet>& ts, std::size_t n) {
  for (std::size_t t = 0; t < ts.size(); ++t) {
    if (ts[t].i >= n || ts[t].j >= n || ts[t].k >= n)
      throw std::invalid_argument("constraint " + std::to_string(t) + " references an item >= " +
                                  std::to_string(n));
    if (!ts[t].distinct())
      throw std::invalid_argument("constraint " + std::to_string(t) + " repeats an item");
  }
}

}  // namespace sklr

#pragma once

// Exact semantics for correspondences between finite topological spaces.
// Points are indices 0..n-1 with string labels; subsets are bitmasks.

#include "wsel/common.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wsel::finite {

using Mask = std::uint32_t;
constexpr int kMaxPoints = 32;

inline bool has(Mask s, int i) { return (s >> i) & 1u; }
inline bool subset(Mask a, Mask b) { return (a & ~b) == 0; }
inline int popcount(Mask s) { return std::popcount(s); }
inline Mask bit(int i) { return Mask{1} << i; }

struct TopologyError : ParameterError {
  using ParameterError::ParameterError;
};

/// A finite set with an explicit family of open sets.
class FiniteTopoSpace {
 public:
  FiniteTopoSpace(std::vector<std::string> labels, std::vector<Mask> opens)
      : labels_(std::move(labels)), opens_(std::move(opens)) {
    const int n = size();
    if (n < 1 || n > kMaxPoints) throw TopologyError("point count must be in [1, 32]");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (static_cast<int>(seen.size()) != n) throw TopologyError("duplicate point label");
    std::sort(opens_.begin(), opens_.end());
    opens_.erase(std::unique(opens_.begin(), opens_.end()), opens_.end());
    for (Mask o : opens_)
      if (!subset(o, full())) throw TopologyError("open set mentions an unknown point");
    if (!is_open(0)) throw TopologyError("opens must contain the empty set");
    if (!is_open(full())) throw TopologyError("opens must contain the full point set");
    for (Mask a : opens_)
      for (Mask b : opens_) {
        if (!is_open(a | b)) throw TopologyError("opens not closed under union");
        if (!is_open(a & b)) throw TopologyError("opens not closed under intersection");
      }
    nbhd_.assign(static_cast<std::size_t>(n), full());
    for (Mask o : opens_)
      for (int i = 0; i < n; ++i)
        if (has(o, i)) nbhd_[static_cast<std::size_t>(i)] &= o;
  }

  static FiniteTopoSpace discrete(int n) { return with_default_labels(n, all_subsets(n)); }
  static FiniteTopoSpace indiscrete(int n) {
    return with_default_labels(n, {0, (n == 32 ? ~Mask{0} : bit(n) - 1)});
  }
  /// Points 0 < 1 < ... < n-1 with the down-set topology {∅, {0}, {0,1}, ...}.
  static FiniteTopoSpace lower_rays(int n) {
    std::vector<Mask> o{0};
    for (int k = 1; k <= n; ++k) o.push_back(bit(k) - 1);
    return with_default_labels(n, o);
  }
  static FiniteTopoSpace with_default_labels(int n, std::vector<Mask> opens) {
    std::vector<std::string> l;
    for (int i = 0; i < n; ++i) l.push_back(std::to_string(i));
    return FiniteTopoSpace(std::move(l), std::move(opens));
  }

  int size() const { return static_cast<int>(labels_.size()); }
  Mask full() const { return size() == 32 ? ~Mask{0} : bit(size()) - 1; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<Mask>& opens() const { return opens_; }
  bool is_open(Mask s) const { return std::binary_search(opens_.begin(), opens_.end(), s); }
  bool is_closed(Mask s) const { return is_open(full() & ~s); }
  /// Smallest open set containing point i.
  Mask nbhd(int i) const { return nbhd_[static_cast<std::size_t>(i)]; }
  Mask interior(Mask s) const {
    Mask r = 0;
    for (int i = 0; i < size(); ++i)
      if (has(s, i) && subset(nbhd(i), s)) r |= bit(i);
    return r;
  }
  bool is_discrete() const { return static_cast<std::size_t>(opens_.size()) == (std::size_t{1} << size()); }
  int index_of(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (labels_[static_cast<std::size_t>(i)] == label) return i;
    throw TopologyError("unknown point label '" + label + "'");
  }

  static std::vector<Mask> all_subsets(int n) {
    std::vector<Mask> o;
    for (Mask s = 0; s < bit(n); ++s) o.push_back(s);
    return o;
  }

  bool operator==(const FiniteTopoSpace& o) const { return labels_ == o.labels_ && opens_ == o.opens_; }

 private:
  std::vector<std::string> labels_;
  std::vector<Mask> opens_;
  std::vector<Mask> nbhd_;
};

using SpacePtr = std::shared_ptr<const FiniteTopoSpace>;

inline SpacePtr share(FiniteTopoSpace s) { return std::make_shared<const FiniteTopoSpace>(std::move(s)); }

/// A correspondence between finite spaces; values[e] is a codomain mask.
class FiniteCorrespondence {
 public:
  FiniteCorrespondence(SpacePtr domain, SpacePtr codomain, std::vector<Mask> values)
      : dom_(std::move(domain)), cod_(std::move(codomain)), values_(std::move(values)) {
    if (static_cast<int>(values_.size()) != dom_->size())
      throw ParameterError("one value per domain point required");
    for (Mask v : values_)
      if (!subset(v, cod_->full())) throw ParameterError("value outside codomain");
  }

  const FiniteTopoSpace& domain() const { return *dom_; }
  const FiniteTopoSpace& codomain() const { return *cod_; }
  const SpacePtr& domain_ptr() const { return dom_; }
  const SpacePtr& codomain_ptr() const { return cod_; }
  Mask operator()(int e) const { return values_[static_cast<std::size_t>(e)]; }
  const std::vector<Mask>& values() const { return values_; }

  Mask support() const {
    Mask s = 0;
    for (int e = 0; e < dom_->size(); ++e)
      if (values_[static_cast<std::size_t>(e)]) s |= bit(e);
    return s;
  }
  Mask fiber(int y) const {
    Mask s = 0;
    for (int e = 0; e < dom_->size(); ++e)
      if (has(values_[static_cast<std::size_t>(e)], y)) s |= bit(e);
    return s;
  }
  /// Graph as one codomain mask per domain point (same layout as values).
  bool graph_contains(int e, int x) const { return has(values_[static_cast<std::size_t>(e)], x); }

 private:
  SpacePtr dom_, cod_;
  std::vector<Mask> values_;
};

/// A subset of a product, stored row-wise: rows[e] is the x-mask at e.
using Rows = std::vector<Mask>;

/// W open in the subspace sub × X of the product topology.
inline bool product_open(const FiniteTopoSpace& E, Mask sub, const FiniteTopoSpace& X, const Rows& W) {
  for (int e = 0; e < E.size(); ++e) {
    if (!has(sub, e)) continue;
    Mask ne = E.nbhd(e) & sub;
    for (int x = 0; x < X.size(); ++x) {
      if (!has(W[static_cast<std::size_t>(e)], x)) continue;
      Mask nx = X.nbhd(x);
      for (int f = 0; f < E.size(); ++f)
        if (has(ne, f) && !subset(nx, W[static_cast<std::size_t>(f)])) return false;
    }
  }
  return true;
}

inline Rows complement_rows(const FiniteTopoSpace& E, Mask sub, const FiniteTopoSpace& X, const Rows& W) {
  Rows c(static_cast<std::size_t>(E.size()), 0);
  for (int e = 0; e < E.size(); ++e)
    if (has(sub, e)) c[static_cast<std::size_t>(e)] = X.full() & ~W[static_cast<std::size_t>(e)];
  return c;
}

inline bool product_closed(const FiniteTopoSpace& E, Mask sub, const FiniteTopoSpace& X, const Rows& W) {
  return product_open(E, sub, X, complement_rows(E, sub, X, W));
}

// ---------------------------------------------------------------------------
// Continuity notions

inline bool is_open_graph(const FiniteCorrespondence& P) {
  return product_open(P.domain(), P.domain().full(), P.codomain(), P.values());
}

inline bool is_closed(const FiniteCorrespondence& P) {
  return product_closed(P.domain(), P.domain().full(), P.codomain(), P.values());
}

inline bool is_open_fibers(const FiniteCorrespondence& P) {
  for (int y = 0; y < P.codomain().size(); ++y)
    if (!P.domain().is_open(P.fiber(y))) return false;
  return true;
}

inline bool is_usc(const FiniteCorrespondence& P) {
  for (Mask V : P.codomain().opens()) {
    Mask up = 0;
    for (int e = 0; e < P.domain().size(); ++e)
      if (subset(P(e), V)) up |= bit(e);
    if (!P.domain().is_open(up)) return false;
  }
  return true;
}

inline bool is_lsc(const FiniteCorrespondence& P) {
  for (Mask V : P.codomain().opens()) {
    Mask lo = 0;
    for (int e = 0; e < P.domain().size(); ++e)
      if (P(e) & V) lo |= bit(e);
    if (!P.domain().is_open(lo)) return false;
  }
  return true;
}

inline bool has_local_intersection_property(const FiniteCorrespondence& P) {
  const auto& X = P.domain();
  for (int x = 0; x < X.size(); ++x) {
    if (!P(x)) continue;
    Mask common = P.codomain().full();
    for (int z = 0; z < X.size(); ++z)
      if (has(X.nbhd(x), z)) common &= P(z);
    if (!common) return false;
  }
  return true;
}

enum class TarafdarVariant {
  support,  ///< the cover need only cover the points with nonempty value
  whole     ///< the cover must cover every point of the domain
};

/// Decides the cover condition by collecting, for each y, every open set
/// inside the fiber of y.
inline bool is_tarafdar_continuous(const FiniteCorrespondence& P,
                                   TarafdarVariant variant = TarafdarVariant::support) {
  Mask covered = 0;
  for (int y = 0; y < P.codomain().size(); ++y) {
    Mask fib = P.fiber(y);
    for (Mask O : P.domain().opens())
      if (subset(O, fib)) covered |= O;
  }
  Mask need = variant == TarafdarVariant::support ? P.support() : P.domain().full();
  return subset(need, covered);
}

/// Cover O^y indexed by codomain point.
using TarafdarCover = std::vector<Mask>;

/// For each x with nonempty value pick the smallest y with y in P(z) for all
/// z near x, take U^x = N(x) and let O^y be the union of the U^x assigned to y.
inline Outcome<TarafdarCover> extract_tarafdar_cover(const FiniteCorrespondence& P,
                                                     TarafdarVariant variant = TarafdarVariant::support) {
  const auto& X = P.domain();
  TarafdarCover O(static_cast<std::size_t>(P.codomain().size()), 0);
  for (int x = 0; x < X.size(); ++x) {
    if (!P(x)) continue;
    Mask common = P.codomain().full();
    for (int z = 0; z < X.size(); ++z)
      if (has(X.nbhd(x), z)) common &= P(z);
    if (!common) return Outcome<TarafdarCover>::fail("no-cover: no common value near " + X.labels()[static_cast<std::size_t>(x)]);
    O[static_cast<std::size_t>(std::countr_zero(common))] |= X.nbhd(x);
  }
  Mask covered = 0;
  for (Mask o : O) covered |= o;
  if (variant == TarafdarVariant::whole && covered != X.full())
    return Outcome<TarafdarCover>::fail("no-cover: points with empty value cannot be covered");
  return O;
}

// ---------------------------------------------------------------------------
// Neighbourhood selection property and closed local selections

/// Literal sweep: anchors a, open V containing a, points (e,x) with x not in
/// M(e), and open rectangles (A∩V)×B around (e,x). Every product-open set
/// around (e,x) contains such a rectangle and shrinking U only weakens the
/// requirement, so rectangles are enough.
inline bool has_nsp(const FiniteCorrespondence& M) {
  const auto& E = M.domain();
  const auto& X = M.codomain();
  const Mask EM = M.support();
  for (int a = 0; a < E.size(); ++a) {
    if (!has(EM, a)) continue;
    bool anchor_ok = false;
    for (Mask V : E.opens()) {
      if (!has(V, a)) continue;
      bool v_ok = true;
      for (int e = 0; e < E.size() && v_ok; ++e) {
        if (!has(V, e)) continue;
        for (int x = 0; x < X.size() && v_ok; ++x) {
          if (has(M(e), x)) continue;
          bool found_u = false;
          for (Mask A : E.opens()) {
            if (!has(A, e)) continue;
            Mask UA = A & V;
            for (Mask B : X.opens()) {
              if (!has(B, x)) continue;
              bool good = true;
              for (int f = 0; f < E.size() && good; ++f)
                if (has(UA & EM, f) && subset(M(f), B)) good = false;
              if (good) {
                found_u = true;
                break;
              }
            }
            if (found_u) break;
          }
          v_ok = found_u;
        }
      }
      if (v_ok) {
        anchor_ok = true;
        break;
      }
    }
    if (!anchor_ok) return false;
  }
  return true;
}

/// Anchored local selection (V^a, ψ^a). selection[e] is zero outside V^a.
struct LocalSelectionWitness {
  int anchor = -1;
  Mask neighborhood = 0;
  Rows selection;
};

/// Graph of M on V minus the union of the smallest open rectangles around the
/// points (e,x), e in V, x not in M(e). Any selection meeting the requirement
/// of the observation, and any closed selection on V, lies inside this set.
inline Rows complement_construction(const FiniteCorrespondence& M, Mask V) {
  const auto& E = M.domain();
  const auto& X = M.codomain();
  Rows xi(static_cast<std::size_t>(E.size()), 0);
  for (int e = 0; e < E.size(); ++e)
    if (has(V, e)) xi[static_cast<std::size_t>(e)] = M(e);
  for (int e = 0; e < E.size(); ++e) {
    if (!has(V, e)) continue;
    for (int x = 0; x < X.size(); ++x) {
      if (has(M(e), x)) continue;
      Mask UA = E.nbhd(e) & V;
      Mask UB = X.nbhd(x);
      for (int f = 0; f < E.size(); ++f)
        if (has(UA, f)) xi[static_cast<std::size_t>(f)] &= ~UB;
    }
  }
  return xi;
}

inline bool nonempty_on(const Rows& sel, Mask where) {
  for (std::size_t e = 0; e < sel.size(); ++e)
    if (has(where, static_cast<int>(e)) && !sel[e]) return false;
  return true;
}

/// The observation's formulation: for every anchor some open V^a carries a
/// local selection whose graph avoids an open neighbourhood of every point
/// (e,x) with x outside M(e).
inline bool has_nsp_via_observation(const FiniteCorrespondence& M) {
  const auto& E = M.domain();
  const Mask EM = M.support();
  for (int a = 0; a < E.size(); ++a) {
    if (!has(EM, a)) continue;
    bool ok = false;
    for (Mask V : E.opens()) {
      if (!has(V, a)) continue;
      if (nonempty_on(complement_construction(M, V), V & EM)) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  return true;
}

/// Checks both invariants of a witness and closedness of its graph in V×X.
inline bool verify_witness(const FiniteCorrespondence& M, const LocalSelectionWitness& w, bool require_closed) {
  const auto& E = M.domain();
  if (!E.is_open(w.neighborhood) || !has(w.neighborhood, w.anchor)) return false;
  for (int e = 0; e < E.size(); ++e) {
    Mask s = w.selection[static_cast<std::size_t>(e)];
    if (!has(w.neighborhood, e) && s) return false;
    if (!subset(s, M(e))) return false;
  }
  if (!nonempty_on(w.selection, w.neighborhood & M.support())) return false;
  if (require_closed && !product_closed(E, w.neighborhood, M.codomain(), w.selection)) return false;
  return true;
}

/// Fails with the first anchor that has no closed local selection.
inline Outcome<std::vector<LocalSelectionWitness>> closed_local_selections(const FiniteCorrespondence& M) {
  const auto& E = M.domain();
  const Mask EM = M.support();
  std::vector<LocalSelectionWitness> out;
  for (int a = 0; a < E.size(); ++a) {
    if (!has(EM, a)) continue;
    bool found = false;
    for (Mask V : E.opens()) {
      if (!has(V, a)) continue;
      Rows xi = complement_construction(M, V);
      LocalSelectionWitness w{a, V, xi};
      if (verify_witness(M, w, true)) {
        out.push_back(std::move(w));
        found = true;
        break;
      }
    }
    if (!found)
      return Outcome<std::vector<LocalSelectionWitness>>::fail(
          "no closed local selection at " + E.labels()[static_cast<std::size_t>(a)]);
  }
  return out;
}

/// Two points of E_M with no disjoint separating opens in the subspace.
struct InseparablePair : PreconditionError {
  InseparablePair(std::string a, std::string b)
      : PreconditionError("support is not Hausdorff: " + a + " and " + b + " cannot be separated"),
        first(std::move(a)),
        second(std::move(b)) {}
  std::string first, second;
};

inline void require_hausdorff_support(const FiniteCorrespondence& M) {
  const auto& E = M.domain();
  const Mask EM = M.support();
  for (int e = 0; e < E.size(); ++e)
    for (int f = e + 1; f < E.size(); ++f) {
      if (!has(EM, e) || !has(EM, f)) continue;
      if ((E.nbhd(e) & E.nbhd(f) & EM) != 0)
        throw InseparablePair(E.labels()[static_cast<std::size_t>(e)], E.labels()[static_cast<std::size_t>(f)]);
    }
}

/// Glues closed local selections over the closed refinement by singletons of
/// the (discrete) support. Throws InseparablePair when the support is not
/// Hausdorff.
inline Outcome<FiniteCorrespondence> glue_global_selection(const FiniteCorrespondence& M) {
  require_hausdorff_support(M);
  auto locals = closed_local_selections(M);
  if (!locals) return Outcome<FiniteCorrespondence>::fail(locals.failure());
  std::vector<Mask> xi(static_cast<std::size_t>(M.domain().size()), 0);
  for (const auto& w : locals.value())
    xi[static_cast<std::size_t>(w.anchor)] |= w.selection[static_cast<std::size_t>(w.anchor)];
  return FiniteCorrespondence(M.domain_ptr(), M.codomain_ptr(), std::move(xi));
}

/// Closed in E_M × X, contained in M, nonempty on E_M.
inline bool verify_global_selection(const FiniteCorrespondence& M, const FiniteCorrespondence& xi) {
  const Mask EM = M.support();
  for (int e = 0; e < M.domain().size(); ++e) {
    if (!subset(xi(e), M(e))) return false;
    if (has(EM, e) && !xi(e)) return false;
    if (!has(EM, e) && xi(e)) return false;
  }
  return product_closed(M.domain(), EM, M.codomain(), xi.values());
}

// ---------------------------------------------------------------------------
// Continuous inclusion property

enum class Convexity {
  all_subsets,  ///< every subset of the codomain counts as convex
  intervals     ///< index intervals of a linearly ordered codomain
};

inline bool is_convex(Mask s, Convexity c) {
  if (c == Convexity::all_subsets || s == 0) return true;
  Mask shifted = s >> std::countr_zero(s);
  return (shifted & (shifted + 1)) == 0;
}

/// usc of F on the open subspace S.
inline bool usc_on(const FiniteTopoSpace& E, Mask S, const FiniteTopoSpace& X, const Rows& F) {
  for (Mask V : X.opens()) {
    Mask up = 0;
    for (int e = 0; e < E.size(); ++e)
      if (has(S, e) && subset(F[static_cast<std::size_t>(e)], V)) up |= bit(e);
    for (int e = 0; e < E.size(); ++e)
      if (has(up, e) && !subset(E.nbhd(e) & S, up)) return false;
  }
  return true;
}

struct CipBudgetExceeded : ParameterError {
  using ParameterError::ParameterError;
};

/// Exact search. The neighbourhood U^x = N(x) is the best choice (restriction
/// to a smaller open set preserves usc), and F^x ranges over all assignments
/// of nonempty closed admissible subsets of P(z), z in N(x).
inline bool has_continuous_inclusion_property(const FiniteCorrespondence& P,
                                              Convexity convexity = Convexity::all_subsets,
                                              std::size_t budget = 1u << 22) {
  const auto& E = P.domain();
  const auto& X = P.codomain();
  for (int x = 0; x < E.size(); ++x) {
    if (!P(x)) continue;
    const Mask U = E.nbhd(x);
    std::vector<int> pts;
    std::vector<std::vector<Mask>> options;
    std::size_t combos = 1;
    bool dead = false;
    for (int z = 0; z < E.size(); ++z) {
      if (!has(U, z)) continue;
      std::vector<Mask> opt;
      for (Mask s = P(z); s; s = (s - 1) & P(z))
        if (X.is_closed(s) && is_convex(s, convexity)) opt.push_back(s);
      if (opt.empty()) {
        dead = true;
        break;
      }
      combos *= opt.size();
      if (combos > budget) throw CipBudgetExceeded("continuous inclusion search exceeds budget");
      pts.push_back(z);
      options.push_back(std::move(opt));
    }
    if (dead) return false;
    std::vector<std::size_t> idx(pts.size(), 0);
    Rows F(static_cast<std::size_t>(E.size()), 0);
    bool found = false;
    while (true) {
      for (std::size_t k = 0; k < pts.size(); ++k) F[static_cast<std::size_t>(pts[k])] = options[k][idx[k]];
      if (usc_on(E, U, X, F)) {
        found = true;
        break;
      }
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == options[k].size()) idx[k++] = 0;
      if (k == idx.size()) break;
    }
    if (!found) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Enumeration

/// All topologies on n points, via preorders: x ≤ y iff y lies in N(x); the
/// opens are the up-closed sets. Ordered by their sorted open families.
inline std::vector<std::vector<Mask>> enumerate_topologies(int n) {
  if (n < 1 || n > 5) throw ParameterError("topology enumeration supports 1..5 points");
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) pairs.emplace_back(i, j);
  std::set<std::vector<Mask>> found;
  const std::uint64_t total = std::uint64_t{1} << pairs.size();
  for (std::uint64_t r = 0; r < total; ++r) {
    std::vector<Mask> up(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) up[static_cast<std::size_t>(i)] = bit(i);
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if ((r >> k) & 1u) up[static_cast<std::size_t>(pairs[k].first)] |= bit(pairs[k].second);
    bool transitive = true;
    for (int i = 0; i < n && transitive; ++i)
      for (int j = 0; j < n && transitive; ++j)
        if (has(up[static_cast<std::size_t>(i)], j) &&
            !subset(up[static_cast<std::size_t>(j)], up[static_cast<std::size_t>(i)]))
          transitive = false;
    if (!transitive) continue;
    std::vector<Mask> opens;
    for (Mask s = 0; s < bit(n); ++s) {
      bool closed_up = true;
      for (int i = 0; i < n && closed_up; ++i)
        if (has(s, i) && !subset(up[static_cast<std::size_t>(i)], s)) closed_up = false;
      if (closed_up) opens.push_back(s);
    }
    found.insert(opens);
  }
  return {found.begin(), found.end()};
}

/// Calls f on every correspondence dom ⇉ cod (values enumerated as a mixed
/// radix counter over codomain masks).
template <class F>
void for_each_correspondence(const SpacePtr& dom, const SpacePtr& cod, F&& f) {
  const int n = dom->size();
  const Mask top = cod->full();
  std::vector<Mask> v(static_cast<std::size_t>(n), 0);
  while (true) {
    f(FiniteCorrespondence(dom, cod, v));
    int k = 0;
    while (k < n && v[static_cast<std::size_t>(k)] == top) v[static_cast<std::size_t>(k++)] = 0;
    if (k == n) break;
    ++v[static_cast<std::size_t>(k)];
  }
}

// ---------------------------------------------------------------------------
// Named instances

/// Four points a,b,c,d with opens {∅,{a,b},{c,d},all}; value {1} on a,c and
/// {0} on b,d, so every nonempty open set meets both value classes. A finite
/// stand-in for an everywhere-interleaved indicator.
inline FiniteCorrespondence interleaved_indicator() {
  auto E = share(FiniteTopoSpace({"a", "b", "c", "d"}, {0b0000, 0b0011, 0b1100, 0b1111}));
  auto X = share(FiniteTopoSpace({"0", "1"}, {0b00, 0b01, 0b10, 0b11}));
  return FiniteCorrespondence(E, X, {0b10, 0b01, 0b10, 0b01});
}

}  // namespace wsel::finite

namespace wsel::finite {

// ---------------------------------------------------------------------------
// Exhaustive sweeps

struct SweepScope {
  int max_domain = 3;
  int max_codomain = 3;
  bool all_codomain_topologies = false;  ///< false: discrete codomains only
};

struct SweepReport {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  std::string first_detail;
  std::optional<FiniteCorrespondence> first_mismatch;
};

/// Runs check on every correspondence in scope. check returns an empty string
/// on agreement and a description otherwise. Output order does not depend on
/// the thread count.
template <class Check>
SweepReport sweep(const SweepScope& scope, Check&& check) {
  std::vector<std::pair<SpacePtr, SpacePtr>> pairs;
  for (int ne = 1; ne <= scope.max_domain; ++ne)
    for (int nx = 1; nx <= scope.max_codomain; ++nx) {
      std::vector<std::vector<Mask>> tx = scope.all_codomain_topologies
                                              ? enumerate_topologies(nx)
                                              : std::vector<std::vector<Mask>>{FiniteTopoSpace::all_subsets(nx)};
      for (const auto& te : enumerate_topologies(ne))
        for (const auto& t : tx)
          pairs.emplace_back(share(FiniteTopoSpace::with_default_labels(ne, te)),
                             share(FiniteTopoSpace::with_default_labels(nx, t)));
    }
  std::vector<SweepReport> parts(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) {
    auto& r = parts[i];
    for_each_correspondence(pairs[i].first, pairs[i].second, [&](const FiniteCorrespondence& c) {
      ++r.instances;
      std::string why = check(c);
      if (!why.empty()) {
        if (r.mismatches++ == 0) {
          r.first_detail = std::move(why);
          r.first_mismatch.emplace(c);
        }
      }
    });
  });
  SweepReport out;
  for (auto& p : parts) {
    out.instances += p.instances;
    if (p.mismatches && !out.mismatches) {
      out.first_detail = p.first_detail;
      out.first_mismatch = p.first_mismatch;
    }
    out.mismatches += p.mismatches;
  }
  return out;
}

inline std::string check_tarafdar_equivalence(const FiniteCorrespondence& P) {
  bool t = is_tarafdar_continuous(P), l = has_local_intersection_property(P);
  if (t != l) return "tarafdar=" + std::string(t ? "true" : "false") + " lip=" + (l ? "true" : "false");
  return {};
}

inline std::string check_selection_equivalence(const FiniteCorrespondence& M) {
  bool n = has_nsp(M), o = has_nsp_via_observation(M);
  bool c = closed_local_selections(M).ok();
  if (n == o && o == c) return {};
  auto b = [](bool v) { return v ? "true" : "false"; };
  return std::string("nsp=") + b(n) + " observation=" + b(o) + " closed_local_selections=" + b(c);
}

/// Only instances whose support is discrete are in scope; others count as
/// agreeing.
inline std::string check_gluing(const FiniteCorrespondence& M) {
  const auto& E = M.domain();
  const Mask EM = M.support();
  for (int e = 0; e < E.size(); ++e)
    if (has(EM, e) && (E.nbhd(e) & EM) != bit(e)) return {};
  bool local = closed_local_selections(M).ok();
  auto g = glue_global_selection(M);
  if (g.ok() != local) return std::string("glue=") + (g.ok() ? "true" : "false") + " local=" + (local ? "true" : "false");
  if (g && !verify_global_selection(M, g.value())) return "glued selection fails verification";
  return {};
}

/// Smallest (by domain size, then codomain size, then enumeration order)
/// instance with the local intersection property that fails the whole-space
/// cover variant.
inline std::optional<FiniteCorrespondence> smallest_tarafdar_separation(int max_points, bool require_nonempty_support) {
  for (int total = 2; total <= 2 * max_points; ++total)
    for (int ne = 1; ne <= max_points; ++ne) {
      int nx = total - ne;
      if (nx < 1 || nx > max_points) continue;
      for (const auto& te : enumerate_topologies(ne)) {
        auto E = share(FiniteTopoSpace::with_default_labels(ne, te));
        auto X = share(FiniteTopoSpace::discrete(nx));
        std::optional<FiniteCorrespondence> hit;
        for_each_correspondence(E, X, [&](const FiniteCorrespondence& P) {
          if (hit) return;
          if (require_nonempty_support && !P.support()) return;
          if (is_tarafdar_continuous(P, TarafdarVariant::support) && !is_tarafdar_continuous(P, TarafdarVariant::whole))
            hit.emplace(P);
        });
        if (hit) return hit;
      }
    }
  return std::nullopt;
}

}  // namespace wsel::finite

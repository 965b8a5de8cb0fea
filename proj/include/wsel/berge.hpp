#pragma once

// Parameterised maximisation: argmax correspondences of utilities and of
// preference correspondences over finite choice samples, the continuous
// selection property at scale, and the closed-selection pipelines built on
// them.

#include "wsel/correspondence.hpp"

#include <functional>

namespace wsel {

struct BergeProblem {
  GridPtr E;
  std::vector<Vec> X;
  std::vector<std::vector<int>> F;  ///< constraint values, indices into X
  Scale scale;
  double lipschitz = 1.0;  ///< declared for the argmax correspondence
  /// utility[e][x]; empty for preference problems
  std::vector<std::vector<double>> utility;
  /// prefers[e][x][y] != 0 when y ∈ P(e, x); empty for utility problems
  std::vector<std::vector<std::vector<char>>> prefers;
  /// set when X is the vertex set of a box grid (needed for the convex
  /// preference pipeline)
  GridPtr choice_grid;

  bool has_utility() const { return !utility.empty(); }
  std::size_t nE() const { return E->size(); }
  std::size_t nX() const { return X.size(); }
  bool feasible(std::size_t e, int x) const { return std::binary_search(F[e].begin(), F[e].end(), x); }
};

namespace detail {

inline void validate_constraint(BergeProblem& p) {
  if (!p.E) throw ParameterError("parameter grid missing");
  if (p.F.size() != p.E->size()) throw ParameterError("one constraint value per parameter vertex required");
  for (std::size_t e = 0; e < p.F.size(); ++e) {
    auto& row = p.F[e];
    if (row.empty()) throw ParameterError("empty constraint value at vertex " + std::to_string(e));
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (int x : row)
      if (x < 0 || static_cast<std::size_t>(x) >= p.X.size()) throw ParameterError("constraint index outside samples");
  }
}

}  // namespace detail

/// Every choice sample feasible at every parameter.
inline std::vector<std::vector<int>> full_constraint(std::size_t nE, std::size_t nX) {
  std::vector<int> all(nX);
  for (std::size_t i = 0; i < nX; ++i) all[i] = static_cast<int>(i);
  return std::vector<std::vector<int>>(nE, all);
}

template <class U>
BergeProblem make_utility_problem(GridPtr E, std::vector<Vec> X, std::vector<std::vector<int>> F, Scale scale, U&& u,
                                  double lipschitz = 1.0) {
  BergeProblem p{std::move(E), std::move(X), std::move(F), scale, lipschitz, {}, {}, nullptr};
  detail::validate_constraint(p);
  p.utility.assign(p.nE(), std::vector<double>(p.nX()));
  for (std::size_t e = 0; e < p.nE(); ++e)
    for (std::size_t x = 0; x < p.nX(); ++x) {
      double v = u(p.E->point(e), p.X[x]);
      if (!std::isfinite(v) && p.feasible(e, static_cast<int>(x)))
        throw ParameterError("utility not finite on the constraint graph");
      p.utility[e][x] = v;
    }
  return p;
}

/// better(e, x, y) is true when y is strictly preferred to x at e.
template <class B>
BergeProblem make_preference_problem(GridPtr E, std::vector<Vec> X, std::vector<std::vector<int>> F, Scale scale,
                                     B&& better, double lipschitz = 1.0) {
  BergeProblem p{std::move(E), std::move(X), std::move(F), scale, lipschitz, {}, {}, nullptr};
  detail::validate_constraint(p);
  p.prefers.assign(p.nE(), std::vector<std::vector<char>>(p.nX(), std::vector<char>(p.nX(), 0)));
  parallel_for(p.nE(), [&](std::size_t e) {
    for (std::size_t x = 0; x < p.nX(); ++x)
      for (std::size_t y = 0; y < p.nX(); ++y) p.prefers[e][x][y] = better(p.E->point(e), p.X[x], p.X[y]) ? 1 : 0;
  });
  return p;
}

/// The strict preference induced by the problem's utility.
inline BergeProblem induced_preference(const BergeProblem& p) {
  if (!p.has_utility()) throw ParameterError("problem has no utility");
  BergeProblem q = p;
  q.utility.clear();
  q.prefers.assign(p.nE(), std::vector<std::vector<char>>(p.nX(), std::vector<char>(p.nX(), 0)));
  for (std::size_t e = 0; e < p.nE(); ++e)
    for (std::size_t x = 0; x < p.nX(); ++x)
      for (std::size_t y = 0; y < p.nX(); ++y) q.prefers[e][x][y] = p.utility[e][y] > p.utility[e][x] + 1e-12;
  return q;
}

constexpr double kTieTolerance = 1e-12;

inline SampledCorrespondence argmax_u(const BergeProblem& p) {
  if (!p.has_utility()) throw ParameterError("argmax_u needs a utility objective");
  std::vector<std::vector<int>> M(p.nE());
  for (std::size_t e = 0; e < p.nE(); ++e) {
    double best = -std::numeric_limits<double>::infinity();
    for (int x : p.F[e]) best = std::max(best, p.utility[e][static_cast<std::size_t>(x)]);
    for (int x : p.F[e])
      if (p.utility[e][static_cast<std::size_t>(x)] >= best - kTieTolerance) M[e].push_back(x);
    if (M[e].empty()) throw InternalError("empty argmax over a nonempty finite set");
  }
  return SampledCorrespondence(p.E, p.X, std::move(M), p.scale, false, p.lipschitz);
}

/// M^P(e) = {x ∈ F(e) : P(e,x) ∩ F(e) = ∅}.
inline SampledCorrespondence argmax_p(const BergeProblem& p) {
  if (p.prefers.empty()) throw ParameterError("argmax_p needs a preference objective");
  std::vector<std::vector<int>> M(p.nE());
  for (std::size_t e = 0; e < p.nE(); ++e)
    for (int x : p.F[e]) {
      bool maximal = true;
      for (int y : p.F[e])
        if (p.prefers[e][static_cast<std::size_t>(x)][static_cast<std::size_t>(y)]) {
          maximal = false;
          break;
        }
      if (maximal) M[e].push_back(x);
    }
  return SampledCorrespondence(p.E, p.X, std::move(M), p.scale, false, p.lipschitz);
}

struct PreferenceAxioms {
  bool irreflexive = true;
  bool fully_transitive = true;
  bool transitive = true;
  std::string violation;  ///< first failing tuple, empty when all hold
};

/// Exhaustive sweep over sampled pairs and triples at every parameter.
inline PreferenceAxioms preference_axioms(const BergeProblem& p) {
  if (p.prefers.empty()) throw ParameterError("axioms need a preference objective");
  PreferenceAxioms a;
  const std::size_t n = p.nX();
  auto note = [&](const std::string& s) {
    if (a.violation.empty()) a.violation = s;
  };
  for (std::size_t e = 0; e < p.nE(); ++e) {
    const auto& P = p.prefers[e];
    for (std::size_t x = 0; x < n; ++x) {
      if (P[x][x]) {
        a.irreflexive = false;
        note("irreflexivity fails at e=" + std::to_string(e) + " x=" + std::to_string(x));
      }
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z) {
          if (a.fully_transitive && !P[x][y] && !P[y][z] && P[x][z]) {
            a.fully_transitive = false;
            note("full transitivity fails at e=" + std::to_string(e) + " (x,y,z)=(" + std::to_string(x) + "," +
                 std::to_string(y) + "," + std::to_string(z) + ")");
          }
          if (a.transitive && P[y][z] && P[x][y] && !P[x][z]) {
            a.transitive = false;
            note("transitivity fails at e=" + std::to_string(e) + " (x,y,z)=(" + std::to_string(x) + "," +
                 std::to_string(y) + "," + std::to_string(z) + ")");
          }
        }
    }
  }
  return a;
}

namespace detail {

/// Anchor a passes at (r, eps) when every feasible (e, x) in V = B(a, r)
/// clearly outside M(e) has some y ∈ X outside the eps-ball of x that is
/// feasible on B(e, r) ∩ V and beats every x' in that ball there.
template <class Beats>
bool csp_anchor_ok(const BergeProblem& p, const SampledCorrespondence& M, std::size_t a, double r, double eps,
                   Beats&& beats) {
  const auto& g = *p.E;
  const auto V = centered_ball(g, a, r);
  std::vector<char> inV(g.size(), 0);
  for (auto v : V) inV[v] = 1;
  const double tau = outside_threshold(M, r, eps);
  for (auto e : V) {
    const auto U = centered_ball(g, e, r, &inV);
    for (int x : p.F[e]) {
      const Vec& px = p.X[static_cast<std::size_t>(x)];
      if (M.within(e, px, tau)) continue;
      std::vector<int> near;
      for (int z = 0; z < static_cast<int>(p.nX()); ++z)
        if (l1(p.X[static_cast<std::size_t>(z)], px) <= eps) near.push_back(z);
      bool found = false;
      for (int y = 0; y < static_cast<int>(p.nX()) && !found; ++y) {
        if (l1(p.X[static_cast<std::size_t>(y)], px) <= eps) continue;
        bool ok = true;
        for (auto w : U) {
          if (!p.feasible(w, y)) {
            ok = false;
            break;
          }
          for (int z : near)
            if (!beats(w, y, z)) {
              ok = false;
              break;
            }
          if (!ok) break;
        }
        found = ok;
      }
      if (!found) return false;
    }
  }
  return true;
}

template <class Beats>
bool csp_at_scale(const BergeProblem& p, const SampledCorrespondence& M, const Ladder& ladder, Beats&& beats) {
  std::vector<char> ok(p.nE(), 0);
  parallel_for(p.nE(), [&](std::size_t a) {
    for (int k : ladder.delta_steps)
      for (double eps : ladder.eps)
        if (!ok[a] && csp_anchor_ok(p, M, a, k * p.E->mesh(), eps, beats)) ok[a] = 1;
  });
  return std::all_of(ok.begin(), ok.end(), [](char c) { return c; });
}

}  // namespace detail

/// u(e', y) >= u(e', x') form of the selection property.
inline bool check_csp_utility(const BergeProblem& p, const Ladder& ladder = {}) {
  if (!p.has_utility()) throw ParameterError("utility objective required");
  auto M = argmax_u(p);
  return detail::csp_at_scale(p, M, ladder, [&](std::size_t w, int y, int z) {
    return p.utility[w][static_cast<std::size_t>(y)] >= p.utility[w][static_cast<std::size_t>(z)] - kTieTolerance;
  });
}

/// x' ∉ P(e', y) form of the selection property.
inline bool check_csp_preference(const BergeProblem& p, const Ladder& ladder = {}) {
  if (p.prefers.empty()) throw ParameterError("preference objective required");
  auto M = argmax_p(p);
  return detail::csp_at_scale(p, M, ladder, [&](std::size_t w, int y, int z) {
    return !p.prefers[w][static_cast<std::size_t>(y)][static_cast<std::size_t>(z)];
  });
}

struct BergeReport {
  std::string kind;
  std::map<std::string, bool> checks;
  std::optional<PreferenceAxioms> axioms;
  std::optional<SelectionCertificate> certificate;
  bool scale_artifact = false;
  bool pass = false;
  std::string note;
};

inline nlohmann::ordered_json to_json(const BergeReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  nlohmann::ordered_json checks = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.checks) checks[k] = v;
  j["checks"] = checks;
  if (r.axioms)
    j["axioms"] = {{"irreflexive", r.axioms->irreflexive},
                   {"fullyTransitive", r.axioms->fully_transitive},
                   {"transitive", r.axioms->transitive}};
  if (r.certificate) j["certificate"] = to_json(*r.certificate);
  j["scaleArtifact"] = r.scale_artifact;
  j["pass"] = r.pass;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

namespace detail {

inline void closed_selection_stage(BergeReport& r, const SampledCorrespondence& M, const Ladder& ladder) {
  r.checks["nsp"] = check_nsp_at_scale(M, ladder);
  if (!r.checks["nsp"]) {
    r.scale_artifact = true;
    r.note = "selection property holds but NSP fails at this scale";
    return;
  }
  r.certificate = nsp_closed_selection(M, ladder);
  r.pass = r.certificate->pass;
}

}  // namespace detail

/// Utility selection property ⇒ NSP of the argmax ⇒ closed selection.
inline BergeReport verify_prop_bergeu(const BergeProblem& p, const Ladder& ladder = {}) {
  BergeReport r;
  r.kind = "utility";
  r.checks["csp"] = check_csp_utility(p, ladder);
  if (!r.checks["csp"]) throw PreconditionError("continuous selection property fails at scale");
  auto M = argmax_u(p);
  detail::closed_selection_stage(r, M, ladder);
  return r;
}

/// Same pipeline for an irreflexive, fully transitive preference.
inline BergeReport verify_prop_bergep(const BergeProblem& p, const Ladder& ladder = {}) {
  BergeReport r;
  r.kind = "preference";
  r.axioms = preference_axioms(p);
  r.checks["irreflexive"] = r.axioms->irreflexive;
  r.checks["fullyTransitive"] = r.axioms->fully_transitive;
  r.checks["transitive"] = r.axioms->transitive;
  if (!r.axioms->irreflexive || !r.axioms->fully_transitive || !r.axioms->transitive)
    throw PreconditionError(r.axioms->violation);
  r.checks["csp"] = check_csp_preference(p, ladder);
  if (!r.checks["csp"]) throw PreconditionError("continuous selection property fails at scale");
  auto M = argmax_p(p);
  detail::closed_selection_stage(r, M, ladder);
  return r;
}

/// ψ(e, x) = P(e, x) ∩ F(e) as a correspondence on the product grid E × X.
inline SampledCorrespondence better_feasible(const BergeProblem& p, double lipschitz = 2.0) {
  if (!p.choice_grid) throw ParameterError("convex pipeline needs the choice samples to be a box grid");
  const auto& E = *p.E;
  const auto& Xg = *p.choice_grid;
  if (E.kind() != GridKind::box || Xg.kind() != GridKind::box || E.lo() != Xg.lo() || E.hi() != Xg.hi() ||
      E.mesh() != Xg.mesh())
    throw ParameterError("parameter and choice grids must be boxes with equal bounds and mesh");
  if (Xg.size() != p.nX()) throw ParameterError("choice grid does not match the choice samples");
  auto G = std::make_shared<const SimplicialGrid>(SimplicialGrid::box(E.dim() + Xg.dim(), E.lo(), E.hi(), E.mesh()));
  std::vector<std::vector<int>> vals(G->size());
  for (std::size_t v = 0; v < G->size(); ++v) {
    const auto& k = G->index(v);
    IVec ke(k.begin(), k.begin() + E.dim()), kx(k.begin() + E.dim(), k.end());
    auto e = E.find(ke);
    auto x = Xg.find(kx);
    if (!e || !x) throw InternalError("product vertex outside factor grids");
    for (int y : p.F[*e])
      if (p.prefers[*e][*x][static_cast<std::size_t>(y)]) vals[v].push_back(y);
  }
  Scale s = p.scale;
  return SampledCorrespondence(G, p.X, std::move(vals), s, true, lipschitz);
}

/// Convex-valued preference pipeline: hull irreflexivity, inclusion
/// property of ψ, closed convex constraint; then nonemptiness and
/// closedness of M^P.
inline BergeReport verify_prop_bergepc(const BergeProblem& p) {
  BergeReport r;
  r.kind = "convex-preference";
  if (p.prefers.empty()) throw ParameterError("preference objective required");
  for (std::size_t e = 0; e < p.nE(); ++e)
    for (std::size_t x = 0; x < p.nX(); ++x) {
      std::vector<Vec> better;
      for (std::size_t y = 0; y < p.nX(); ++y)
        if (p.prefers[e][x][y]) better.push_back(p.X[y]);
      if (!better.empty() && hull_distance_l1(better, p.X[x]) <= 1e-12)
        throw PreconditionError("x lies in the hull of its better set at e=" + std::to_string(e) +
                                " x=" + std::to_string(x));
    }
  r.checks["hullIrreflexive"] = true;
  auto psi = better_feasible(p);
  r.checks["inclusionProperty"] = check_continuous_inclusion_at_scale(psi);
  if (!r.checks["inclusionProperty"]) throw PreconditionError("better-feasible map lacks the inclusion property");
  SampledCorrespondence F(p.E, p.X, p.F, p.scale, true, p.lipschitz);
  r.checks["constraintClosed"] = check_closed_at_scale(F);
  if (!r.checks["constraintClosed"]) throw PreconditionError("constraint is not closed at scale");
  auto M = argmax_p(p);
  bool nonempty = true;
  for (std::size_t e = 0; e < p.nE(); ++e) nonempty = nonempty && M.nonempty(e);
  r.checks["argmaxNonempty"] = nonempty;
  r.checks["argmaxClosed"] = check_closed_at_scale(M);
  r.pass = nonempty && r.checks["argmaxClosed"];
  return r;
}

}  // namespace wsel

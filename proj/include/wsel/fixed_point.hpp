#pragma once

// Fixed points of sampled correspondences on the simplex by four routes
// (continuous selector, cover selector, glued usc sub-correspondence, hull
// proxy), each finished by the Sperner search; plus the Ky Fan minimax and
// the variational inequality over grid vertices.

#include "wsel/correspondence.hpp"

#include <ostream>

namespace wsel {

enum class Route { browder, tarafdar, he_yannelis, kakutani };

inline const char* route_name(Route r) {
  switch (r) {
    case Route::browder: return "browder";
    case Route::tarafdar: return "tarafdar";
    case Route::he_yannelis: return "he-yannelis";
    case Route::kakutani: return "kakutani";
  }
  return "?";
}

inline Route parse_route(const std::string& s) {
  for (Route r : {Route::browder, Route::tarafdar, Route::he_yannelis, Route::kakutani})
    if (s == route_name(r)) return r;
  throw ParameterError("unknown route '" + s + "'");
}

struct FixedPointReport {
  Vec point;
  double residual = 0;
  Route route = Route::browder;
  Scale scale;
  std::size_t cell = 0;
  double selector_residual = 0;
  double sperner_residual = 0;
};

inline nlohmann::ordered_json to_json(const FixedPointReport& r) {
  nlohmann::ordered_json j;
  j["route"] = route_name(r.route);
  j["point"] = std::vector<double>(r.point.data(), r.point.data() + r.point.size());
  j["residual"] = r.residual;
  j["selectorResidual"] = r.selector_residual;
  j["spernerResidual"] = r.sperner_residual;
  j["cell"] = r.cell;
  j["scale"] = {{"h", r.scale.h}, {"delta", r.scale.delta}, {"eps", r.scale.eps}};
  return j;
}

/// The estimate is a cell barycenter, where the sampled correspondence is
/// read as the hull of its values at the cell's vertices.
inline double cell_residual(const SampledCorrespondence& P, std::size_t cell, const Vec& point) {
  std::vector<Vec> pts;
  for (auto v : P.grid().cells()[cell])
    for (const auto& p : P.points(v)) pts.push_back(p);
  if (pts.empty()) return std::numeric_limits<double>::infinity();
  for (const auto& p : pts)
    if (l1(p, point) == 0.0) return 0.0;
  return hull_distance_l1(pts, point);
}

namespace detail {

inline void require_simplex_correspondence(const SampledCorrespondence& P) {
  const auto& g = P.grid();
  if (g.kind() != GridKind::simplex) throw ParameterError("fixed points need a simplex domain grid");
  for (const auto& y : P.samples()) {
    if (y.size() != g.dim()) throw ParameterError("codomain dimension differs from the simplex");
    if ((y.array() < -1e-9).any() || std::abs(y.sum() - 1.0) > 1e-9)
      throw ParameterError("codomain sample outside the simplex");
  }
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!P.nonempty(v)) throw SelectionPrecondition("empty value at vertex " + std::to_string(v));
  if (!P.convex()) throw SelectionPrecondition("values must be declared convex");
}

inline FixedPointReport finish(const SampledCorrespondence& P, const std::vector<Vec>& f, Route route,
                               double selector_residual, std::ostream* trace) {
  auto b = brouwer_sperner(P.grid(), f, trace);
  FixedPointReport r;
  r.point = b.point;
  r.cell = b.cell;
  r.route = route;
  r.scale = P.scale();
  r.sperner_residual = b.residual;
  r.selector_residual = selector_residual;
  r.residual = cell_residual(P, b.cell, b.point);
  return r;
}

/// Euclidean nearest point of hull(pts) to p. The l1 projection is not
/// unique and an LP vertex choice makes the proxy jump, so l2 is used.
inline Vec nearest_in_hull(const std::vector<Vec>& pts, const Vec& p) {
  if (pts.size() == 1) return pts.front();
  for (const auto& q : pts)
    if (l1(q, p) == 0.0) return q;
  std::vector<Vec> shifted;
  shifted.reserve(pts.size());
  for (const auto& q : pts) shifted.push_back(q - p);
  Vec z = p + min_norm_point(shifted);
  z = z.cwiseMax(0.0);
  return z / z.sum();
}

}  // namespace detail

/// Continuous selector over the fiber cover, then Sperner.
inline FixedPointReport browder_fixed_point(const SampledCorrespondence& P, std::ostream* trace = nullptr) {
  detail::require_simplex_correspondence(P);
  auto cert = yp_continuous_selection(P);
  return detail::finish(P, cert.selector, Route::browder, cert.residual, trace);
}

/// Selector from an extracted cover with one common value per element.
inline FixedPointReport tarafdar_fixed_point(const SampledCorrespondence& P, std::ostream* trace = nullptr) {
  detail::require_simplex_correspondence(P);
  if (!check_lip_at_scale(P)) throw SelectionPrecondition("local intersection property fails at scale");
  auto cover = extract_tarafdar_cover_at_scale(P);
  if (!cover) throw SelectionPrecondition(cover.failure());
  const auto& g = P.grid();
  auto pu = partition_of_unity(g, cover->sets);
  std::vector<Vec> f(g.size(), Vec::Zero(g.dim()));
  double worst = 0;
  for (std::size_t v = 0; v < g.size(); ++v) {
    for (std::size_t a = 0; a < cover->target.size(); ++a)
      if (pu.weights[v][a] > 0) f[v] += pu.weights[v][a] * P.samples()[static_cast<std::size_t>(cover->target[a])];
    worst = std::max(worst, P.distance(v, f[v]));
  }
  return detail::finish(P, f, Route::tarafdar, worst, trace);
}

/// Hull proxy: f(p) = nearest point of hull(values(p)) to p.
inline FixedPointReport kakutani_fixed_point(const SampledCorrespondence& P, std::ostream* trace = nullptr,
                                             bool check_preconditions = true) {
  detail::require_simplex_correspondence(P);
  if (check_preconditions && !check_usc_at_scale(P)) throw SelectionPrecondition("not upper semi-continuous at scale");
  const auto& g = P.grid();
  std::vector<Vec> f(g.size());
  parallel_for(g.size(), [&](std::size_t v) { f[v] = detail::nearest_in_hull(P.points(v), g.point(v)); });
  return detail::finish(P, f, Route::kakutani, 0.0, trace);
}

/// Local usc sub-correspondences glued by a partition of unity into
/// F(e) = Σ β_α(e) F^α(e), then the hull proxy on F. Residual against P.
inline FixedPointReport he_yannelis_fixed_point(const SampledCorrespondence& P, std::ostream* trace = nullptr,
                                                std::size_t hull_cap = 64) {
  detail::require_simplex_correspondence(P);
  const auto& g = P.grid();
  BallSystem balls(g, P.scale().delta);
  std::vector<LocalInclusion> locals;
  std::vector<char> covered(g.size(), 0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (covered[v]) continue;
    auto li = local_inclusion(P, balls, v);
    if (!li) throw SelectionPrecondition("no usc sub-correspondence near vertex " + std::to_string(v));
    for (std::size_t w = 0; w < g.size(); ++w)
      if (li->neighborhood[w]) covered[w] = 1;
    locals.push_back(std::move(*li));
  }
  std::vector<GridOpenSet> cover;
  for (const auto& li : locals) cover.push_back(GridOpenSet{li.neighborhood, std::nullopt, P.scale().delta});
  auto pu = partition_of_unity(g, std::move(cover));
  std::vector<Vec> f(g.size());
  parallel_for(g.size(), [&](std::size_t v) {
    std::vector<Vec> sum;
    for (std::size_t a = 0; a < locals.size(); ++a) {
      const double w = pu.weights[v][a];
      if (w <= 0) continue;
      auto part = farthest_point_prune(locals[a].values[v], hull_cap);
      if (sum.empty()) {
        for (auto& p : part) sum.push_back(w * p);
        continue;
      }
      std::vector<Vec> next;
      next.reserve(sum.size() * part.size());
      for (const auto& s : sum)
        for (const auto& p : part) next.push_back(s + w * p);
      sum = farthest_point_prune(next, hull_cap);
    }
    f[v] = detail::nearest_in_hull(sum, g.point(v));
  });
  double worst = 0;
  for (std::size_t v = 0; v < g.size(); ++v) worst = std::max(worst, P.distance(v, f[v]));
  return detail::finish(P, f, Route::he_yannelis, worst, trace);
}

inline FixedPointReport solve_fixed_point(const SampledCorrespondence& P, Route route, std::ostream* trace = nullptr) {
  switch (route) {
    case Route::browder: return browder_fixed_point(P, trace);
    case Route::tarafdar: return tarafdar_fixed_point(P, trace);
    case Route::he_yannelis: return he_yannelis_fixed_point(P, trace);
    case Route::kakutani: return kakutani_fixed_point(P, trace);
  }
  throw InternalError("unhandled route");
}

/// Single-valued map: residual is |f(p*) - p*| at the Sperner estimate.
template <class F>
FixedPointReport function_fixed_point(const SimplicialGrid& g, F&& f, Scale scale, std::ostream* trace = nullptr) {
  auto b = brouwer_sperner_fn(g, f, trace);
  FixedPointReport r;
  r.point = b.point;
  r.cell = b.cell;
  r.route = Route::kakutani;
  r.scale = scale;
  r.sperner_residual = b.residual;
  r.residual = l1(f(b.point), b.point);
  return r;
}

// ---------------------------------------------------------------------------
// Minimax problems over grid vertices

struct KyFanResult {
  Vec point;
  std::size_t vertex = 0;
  double certificate = 0;  ///< max_y f(x̄, y)
  double tolerance = 0;
  bool accepted = false;
};

inline nlohmann::ordered_json to_json(const KyFanResult& r) {
  nlohmann::ordered_json j;
  j["point"] = std::vector<double>(r.point.data(), r.point.data() + r.point.size());
  j["vertex"] = r.vertex;
  j["certificate"] = r.certificate;
  j["tolerance"] = r.tolerance;
  j["accepted"] = r.accepted;
  return j;
}

namespace detail {

template <class F>
KyFanResult ky_fan_indexed(const SimplicialGrid& g, F&& f, double L, double tol) {
  const std::size_t n = g.size();
  for (std::size_t x = 0; x < n; ++x)
    if (f(x, x) > 1e-12) throw ParameterError("diagonal condition f(x,x) <= 0 fails at vertex " + std::to_string(x));
  std::vector<double> worst(n, -std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t x) {
    for (std::size_t y = 0; y < n; ++y) worst[x] = std::max(worst[x], static_cast<double>(f(x, y)));
  });
  std::size_t best = 0;
  for (std::size_t x = 1; x < n; ++x)
    if (worst[x] < worst[best] || (worst[x] == worst[best] && lex_less(g.point(x), g.point(best), 0.0))) best = x;
  KyFanResult r;
  r.vertex = best;
  r.point = g.point(best);
  r.certificate = worst[best];
  r.tolerance = tol + L * g.mesh();
  r.accepted = r.certificate <= r.tolerance;
  return r;
}

}  // namespace detail

/// x̄ minimising max_y f(x, y) over vertex pairs; ties go to the
/// lexicographically smallest point. Accepted when the certificate is at
/// most tol + L·h.
template <class F>
KyFanResult ky_fan_solve(const SimplicialGrid& g, F&& f, double L = 0.0, double tol = 1e-6) {
  return detail::ky_fan_indexed(
      g, [&](std::size_t x, std::size_t y) { return f(g.point(x), g.point(y)); }, L, tol);
}

/// ⟨T(x̄), x̄ - y⟩ <= 0 for all y, through the Ky Fan solver.
template <class T>
KyFanResult variational_inequality_solve(const SimplicialGrid& g, T&& op, double L = 0.0, double tol = 1e-6) {
  std::vector<Vec> Tv(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) Tv[v] = op(g.point(v));
  return detail::ky_fan_indexed(
      g, [&](std::size_t x, std::size_t y) { return Tv[x].dot(g.point(x) - g.point(y)); }, L, tol);
}

}  // namespace wsel

#pragma once

// Grid-sampled correspondences and their continuity checkers at a working
// scale (h, δ, ε), plus the continuous and closed selection constructions.
//
// Two neighbourhood notions are used. Open-set notions (open fibers, local
// intersection, cover extraction, inclusion neighbourhoods) live in the
// topology generated by clipped δ-balls, whose centers may sit off-center or
// just outside a box domain. Metric notions (semi-continuity, closedness,
// NSP) compare a vertex with every vertex of its centered δ-ball and allow a
// Lipschitz slack L·|e - e'| on top of ε.

#include "wsel/simplex_geometry.hpp"

#include <json.hpp>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wsel {

struct Scale {
  double h = 1.0 / 64;
  double delta = 2.0 / 64;
  double eps = 1e-9;
};

/// Bounded search policy for the existential quantifiers.
struct Ladder {
  std::vector<int> delta_steps{2, 4, 8};
  std::vector<double> eps{1e-9, 1e-6, 1e-3};
};

using GridPtr = std::shared_ptr<const SimplicialGrid>;

class SampledCorrespondence {
 public:
  /// values[v] lists indices into samples.
  SampledCorrespondence(GridPtr grid, std::vector<Vec> samples, std::vector<std::vector<int>> values, Scale scale,
                        bool convex = true, double lipschitz = 1.0)
      : grid_(std::move(grid)),
        Y_(std::move(samples)),
        values_(std::move(values)),
        scale_(scale),
        convex_(convex),
        L_(lipschitz) {
    if (values_.size() != grid_->size()) throw ParameterError("one value per grid vertex required");
    if (scale_.delta < 2 * scale_.h - 1e-12) throw ParameterError("scale needs delta >= 2h");
    if (scale_.eps < 0) throw ParameterError("scale needs eps >= 0");
    if (std::abs(scale_.h - grid_->mesh()) > 1e-12) throw ParameterError("scale mesh differs from grid mesh");
    for (auto& v : values_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      for (int i : v)
        if (i < 0 || static_cast<std::size_t>(i) >= Y_.size()) throw ParameterError("value index outside samples");
    }
  }

  /// Builds the sample list from explicit point sets, merging points closer
  /// than 1e-12 coordinatewise.
  static SampledCorrespondence from_sets(GridPtr grid, const std::vector<std::vector<Vec>>& sets, Scale scale,
                                         bool convex = true, double lipschitz = 1.0) {
    std::map<std::vector<long long>, int> index;
    std::vector<Vec> Y;
    std::vector<std::vector<int>> vals(sets.size());
    for (std::size_t v = 0; v < sets.size(); ++v)
      for (const auto& p : sets[v]) {
        std::vector<long long> key(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) key[static_cast<std::size_t>(i)] = std::llround(p(i) * 1e12);
        auto [it, fresh] = index.emplace(key, static_cast<int>(Y.size()));
        if (fresh) Y.push_back(p);
        vals[v].push_back(it->second);
      }
    return SampledCorrespondence(std::move(grid), std::move(Y), std::move(vals), scale, convex, lipschitz);
  }

  const SimplicialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<Vec>& samples() const { return Y_; }
  const std::vector<int>& values(std::size_t v) const { return values_[v]; }
  const std::vector<std::vector<int>>& all_values() const { return values_; }
  std::vector<Vec> points(std::size_t v) const {
    std::vector<Vec> out;
    for (int i : values_[v]) out.push_back(Y_[static_cast<std::size_t>(i)]);
    return out;
  }
  const Scale& scale() const { return scale_; }
  bool convex() const { return convex_; }
  double lipschitz() const { return L_; }
  bool nonempty(std::size_t v) const { return !values_[v].empty(); }
  bool contains(std::size_t v, int y) const { return std::binary_search(values_[v].begin(), values_[v].end(), y); }

  std::vector<char> support() const {
    std::vector<char> s(values_.size(), 0);
    for (std::size_t v = 0; v < values_.size(); ++v) s[v] = !values_[v].empty();
    return s;
  }
  std::vector<char> fiber(int y) const {
    std::vector<char> f(values_.size(), 0);
    for (std::size_t v = 0; v < values_.size(); ++v) f[v] = contains(v, y);
    return f;
  }

  /// l1 distance from p to the value at v: to its hull when convex, else to
  /// the nearest sample. Empty values are at infinite distance.
  double distance(std::size_t v, const Vec& p) const {
    const auto& vals = values_[v];
    if (vals.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (int i : vals) best = std::min(best, l1(Y_[static_cast<std::size_t>(i)], p));
    if (!convex_ || best == 0.0 || vals.size() == 1) return best;
    if (p.size() == 1) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int i : vals) {
        lo = std::min(lo, Y_[static_cast<std::size_t>(i)](0));
        hi = std::max(hi, Y_[static_cast<std::size_t>(i)](0));
      }
      return std::max({0.0, lo - p(0), p(0) - hi});
    }
    return hull_distance_l1(points(v), p);
  }
  /// Same, stopping early once the distance is known to be at most bound.
  bool within(std::size_t v, const Vec& p, double bound) const {
    const auto& vals = values_[v];
    if (vals.empty()) return false;
    for (int i : vals)
      if (l1(Y_[static_cast<std::size_t>(i)], p) <= bound) return true;
    if (!convex_) return false;
    return distance(v, p) <= bound;
  }

  SampledCorrespondence with_values(std::vector<std::vector<int>> vals) const {
    return SampledCorrespondence(grid_, Y_, std::move(vals), scale_, convex_, L_);
  }
  SampledCorrespondence with_scale(Scale s) const {
    return SampledCorrespondence(grid_, Y_, values_, s, convex_, L_);
  }

 private:
  GridPtr grid_;
  std::vector<Vec> Y_;
  std::vector<std::vector<int>> values_;
  Scale scale_;
  bool convex_;
  double L_;
};

/// Sampled function or correspondence from a callback returning point sets.
template <class F>
SampledCorrespondence sample_correspondence(GridPtr grid, F&& values_at, Scale scale, bool convex = true,
                                            double lipschitz = 1.0) {
  std::vector<std::vector<Vec>> sets(grid->size());
  for (std::size_t v = 0; v < grid->size(); ++v) sets[v] = values_at(grid->point(v));
  return SampledCorrespondence::from_sets(std::move(grid), sets, scale, convex, lipschitz);
}

/// Centered δ-ball of a vertex, optionally intersected with a mask.
inline std::vector<std::size_t> centered_ball(const SimplicialGrid& g, std::size_t v, double r,
                                              const std::vector<char>* within = nullptr) {
  auto out = vertices_within(g, g.point(v), r);
  if (within) out.erase(std::remove_if(out.begin(), out.end(), [&](std::size_t w) { return !(*within)[w]; }), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Continuity at scale

inline bool check_open_fibers_at_scale(const SampledCorrespondence& P) {
  BallSystem balls(P.grid(), P.scale().delta);
  for (int y = 0; y < static_cast<int>(P.samples().size()); ++y)
    if (!balls.is_open(P.fiber(y))) return false;
  return true;
}

/// Graph open in the product of the ball topology and ε-balls of samples.
inline bool check_open_graph_at_scale(const SampledCorrespondence& P) {
  BallSystem balls(P.grid(), P.scale().delta);
  const auto& Y = P.samples();
  for (std::size_t v = 0; v < P.grid().size(); ++v)
    for (int y : P.values(v)) {
      std::vector<int> near;
      for (int z = 0; z < static_cast<int>(Y.size()); ++z)
        if (l1(Y[static_cast<std::size_t>(z)], Y[static_cast<std::size_t>(y)]) <= P.scale().eps) near.push_back(z);
      bool ok = false;
      for (auto b : balls.containing(v)) {
        bool inside = true;
        for (auto w : balls.ball(b))
          for (int z : near)
            if (!P.contains(w, z)) inside = false;
        if (inside) {
          ok = true;
          break;
        }
      }
      if (!ok) return false;
    }
  return true;
}

/// Largest sub-correspondence with δ-open fibers: each fiber replaced by
/// the union of the balls it contains.
inline SampledCorrespondence fiber_interior(const SampledCorrespondence& P) {
  BallSystem balls(P.grid(), P.scale().delta);
  std::vector<std::vector<int>> vals(P.grid().size());
  for (int y = 0; y < static_cast<int>(P.samples().size()); ++y) {
    auto f = balls.interior(P.fiber(y));
    for (std::size_t v = 0; v < f.size(); ++v)
      if (f[v]) vals[v].push_back(y);
  }
  return P.with_values(std::move(vals));
}

/// Smallest sample index common to every value on the ball, if any.
inline std::optional<int> common_sample(const SampledCorrespondence& P, const std::vector<std::size_t>& ball) {
  if (ball.empty()) return std::nullopt;
  std::vector<int> common = P.values(ball.front());
  for (std::size_t i = 1; i < ball.size() && !common.empty(); ++i) {
    std::vector<int> next;
    const auto& vi = P.values(ball[i]);
    std::set_intersection(common.begin(), common.end(), vi.begin(), vi.end(), std::back_inserter(next));
    common.swap(next);
  }
  if (common.empty()) return std::nullopt;
  return common.front();
}

inline bool check_lip_at_scale(const SampledCorrespondence& P) {
  BallSystem balls(P.grid(), P.scale().delta);
  for (std::size_t v = 0; v < P.grid().size(); ++v) {
    if (!P.nonempty(v)) continue;
    bool ok = false;
    for (auto b : balls.containing(v))
      if (common_sample(P, balls.ball(b))) {
        ok = true;
        break;
      }
    if (!ok) return false;
  }
  return true;
}

/// Upper semi-continuity: every vertex e' of the centered δ-ball of e has
/// value within ε + L|e - e'| of the hull of the value at e.
inline bool check_usc_at_scale(const SampledCorrespondence& P, const std::vector<char>* on = nullptr) {
  const auto& g = P.grid();
  const double eps = P.scale().eps, L = P.lipschitz();
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (on && !(*on)[v]) continue;
    for (auto w : centered_ball(g, v, P.scale().delta, on)) {
      if (w == v) continue;
      const double slack = eps + L * l1(g.point(v), g.point(w));
      for (int y : P.values(w))
        if (!P.contains(v, y) && !P.within(v, P.samples()[static_cast<std::size_t>(y)], slack)) return false;
    }
  }
  return true;
}

/// Lower semi-continuity with the declared Lipschitz budget.
inline bool check_lsc_at_scale(const SampledCorrespondence& P) {
  const auto& g = P.grid();
  const double eps = P.scale().eps, L = P.lipschitz();
  for (std::size_t v = 0; v < g.size(); ++v)
    for (auto w : centered_ball(g, v, P.scale().delta)) {
      if (w == v) continue;
      const double slack = eps + L * l1(g.point(v), g.point(w));
      for (int y : P.values(v))
        if (!P.contains(w, y) && !P.within(w, P.samples()[static_cast<std::size_t>(y)], slack)) return false;
    }
  return true;
}

/// Support function of the value at v in direction d (-inf when empty).
inline double support_value(const SampledCorrespondence& P, std::size_t v, const Vec& d) {
  double s = -std::numeric_limits<double>::infinity();
  for (int y : P.values(v)) s = std::max(s, d.dot(P.samples()[static_cast<std::size_t>(y)]));
  return s;
}

/// Half-spaces {ψ·z < r} containing the value at e keep containing nearby
/// values up to the same slack as usc. Directions need not be normalised;
/// the slack scales with their sup norm.
inline bool check_upper_demicontinuous(const SampledCorrespondence& P, const std::vector<Vec>& directions) {
  if (directions.empty()) throw ParameterError("at least one direction required");
  const auto& g = P.grid();
  const double eps = P.scale().eps, L = P.lipschitz();
  for (std::size_t v = 0; v < g.size(); ++v)
    for (const auto& d : directions) {
      const double sv = support_value(P, v, d);
      const double scale = d.cwiseAbs().maxCoeff();
      for (auto w : centered_ball(g, v, P.scale().delta)) {
        if (w == v || !P.nonempty(w)) continue;
        if (support_value(P, w, d) > sv + scale * (eps + L * l1(g.point(v), g.point(w)))) return false;
      }
    }
  return true;
}

/// Threshold beyond which a point counts as clearly outside a value.
inline double outside_threshold(const SampledCorrespondence& P, double radius, double eps) {
  return 2 * eps + 2 * P.lipschitz() * radius;
}

/// Graph closedness on the vertex set `on`: a sample farther than the
/// threshold from the value at e stays more than ε away from every value on
/// the centered ball of e (within `on`).
inline bool closed_on(const SampledCorrespondence& P, const std::vector<std::vector<int>>& rows,
                      const std::vector<char>& on, double radius, double eps) {
  const auto& g = P.grid();
  const auto F = P.with_values(rows);
  const double tau = outside_threshold(P, radius, eps);
  const auto& Y = P.samples();
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (!on[v]) continue;
    auto ball = centered_ball(g, v, radius, &on);
    for (int y = 0; y < static_cast<int>(Y.size()); ++y) {
      const Vec& p = Y[static_cast<std::size_t>(y)];
      if (F.within(v, p, tau)) continue;
      for (auto w : ball)
        if (F.within(w, p, eps)) return false;
    }
  }
  return true;
}

inline bool check_closed_at_scale(const SampledCorrespondence& P) {
  return closed_on(P, P.all_values(), std::vector<char>(P.grid().size(), 1), P.scale().delta, P.scale().eps);
}

// ---------------------------------------------------------------------------
// Neighbourhood selection property at scale

struct NspRung {
  double radius = 0;
  double eps = 0;
};

/// Anchor a passes with V = centered ball of radius r when every point (e,x)
/// of (V ∩ E_M) × samples with x clearly outside M(e) has, on the centered ball of e
/// inside V, only nonempty values that are not contained in the ε-ball of x.
inline bool nsp_anchor_ok(const SampledCorrespondence& M, std::size_t a, double r, double eps) {
  const auto& g = M.grid();
  const auto V = centered_ball(g, a, r);
  std::vector<char> inV(g.size(), 0);
  for (auto v : V) inV[v] = 1;
  const double tau = outside_threshold(M, r, eps);
  const auto& Y = M.samples();
  for (auto e : V) {
    if (!M.nonempty(e)) continue;
    auto U = centered_ball(g, e, r, &inV);
    for (int x = 0; x < static_cast<int>(Y.size()); ++x) {
      const Vec& p = Y[static_cast<std::size_t>(x)];
      if (M.within(e, p, tau)) continue;
      for (auto w : U) {
        if (!M.nonempty(w)) continue;
        bool inside = true;
        for (int y : M.values(w))
          if (l1(Y[static_cast<std::size_t>(y)], p) > eps) {
            inside = false;
            break;
          }
        if (inside) return false;
      }
    }
  }
  return true;
}

inline std::optional<NspRung> nsp_rung_for(const SampledCorrespondence& M, std::size_t a, const Ladder& ladder) {
  for (int k : ladder.delta_steps)
    for (double eps : ladder.eps) {
      double r = k * M.grid().mesh();
      if (nsp_anchor_ok(M, a, r, eps)) return NspRung{r, eps};
    }
  return std::nullopt;
}

inline bool check_nsp_at_scale(const SampledCorrespondence& M, const Ladder& ladder = {}) {
  std::vector<char> ok(M.grid().size(), 1);
  parallel_for(M.grid().size(), [&](std::size_t a) {
    if (M.nonempty(a)) ok[a] = nsp_rung_for(M, a, ladder).has_value();
  });
  return std::all_of(ok.begin(), ok.end(), [](char c) { return c; });
}

// ---------------------------------------------------------------------------
// Certificates

enum class SelectionKind { continuous_selector, closed_selection };

struct SelectionCertificate {
  SelectionKind kind = SelectionKind::continuous_selector;
  std::vector<Vec> selector;                  ///< continuous kind
  std::vector<std::vector<int>> selection;    ///< closed kind, sample indices
  double residual = 0;
  double modulus = 0;
  double modulus_budget = 0;
  bool closed = false;
  bool pass = false;
  std::optional<std::size_t> worst_vertex;
  Scale scale;
  std::string note;
};

inline nlohmann::ordered_json to_json(const SelectionCertificate& c) {
  nlohmann::ordered_json j;
  j["kind"] = c.kind == SelectionKind::continuous_selector ? "continuous-selector" : "closed-selection";
  j["residual"] = c.residual;
  j["modulus"] = c.modulus;
  if (c.kind == SelectionKind::continuous_selector) j["modulusBudget"] = c.modulus_budget;
  else j["closed"] = c.closed;
  j["scale"] = {{"h", c.scale.h}, {"delta", c.scale.delta}, {"eps", c.scale.eps}};
  j["pass"] = c.pass;
  if (c.worst_vertex) j["worstVertex"] = *c.worst_vertex;
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

/// True when every sample inside the hull of the value at v is itself in
/// the value; such values are read as hulls for membership.
inline bool hull_closed(const SampledCorrespondence& P, std::size_t v) {
  if (!P.convex() || P.values(v).size() <= 1) return true;
  auto pts = P.points(v);
  for (int y = 0; y < static_cast<int>(P.samples().size()); ++y)
    if (!P.contains(v, y) && hull_distance_l1(pts, P.samples()[static_cast<std::size_t>(y)]) <= 1e-12) return false;
  return true;
}

/// Membership residual of a point against the value at v: hull distance for
/// hull-closed convex values, sample distance otherwise.
inline double membership_residual(const SampledCorrespondence& P, std::size_t v, const Vec& p, bool hull_ok) {
  if (!P.nonempty(v)) return std::numeric_limits<double>::infinity();
  if (hull_ok) return P.distance(v, p);
  double best = std::numeric_limits<double>::infinity();
  for (int y : P.values(v)) best = std::min(best, l1(P.samples()[static_cast<std::size_t>(y)], p));
  return best;
}

struct SelectionPrecondition : PreconditionError {
  using PreconditionError::PreconditionError;
};

/// Continuous selector from the partition of unity subordinate to the fiber
/// cover: f(e) = Σ_y β_y(e) y.
inline SelectionCertificate yp_continuous_selection(const SampledCorrespondence& P) {
  const auto& g = P.grid();
  if (!P.convex()) throw SelectionPrecondition("values must be declared convex");
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!P.nonempty(v)) throw SelectionPrecondition("empty value at vertex " + std::to_string(v));
  if (!check_open_fibers_at_scale(P)) throw SelectionPrecondition("fibers are not open at scale");
  const auto& Y = P.samples();
  std::vector<GridOpenSet> cover;
  std::vector<int> which;
  for (int y = 0; y < static_cast<int>(Y.size()); ++y) {
    auto f = P.fiber(y);
    if (std::find(f.begin(), f.end(), 1) == f.end()) continue;
    cover.push_back(GridOpenSet{std::move(f), std::nullopt, P.scale().delta});
    which.push_back(y);
  }
  auto pu = partition_of_unity(g, std::move(cover));
  SelectionCertificate c;
  c.kind = SelectionKind::continuous_selector;
  c.scale = P.scale();
  c.selector.assign(g.size(), Vec::Zero(Y.front().size()));
  for (std::size_t v = 0; v < g.size(); ++v)
    for (std::size_t a = 0; a < which.size(); ++a)
      if (pu.weights[v][a] > 0) c.selector[v] += pu.weights[v][a] * Y[static_cast<std::size_t>(which[a])];
  double worst = -1;
  for (std::size_t v = 0; v < g.size(); ++v) {
    double r = membership_residual(P, v, c.selector[v], hull_closed(P, v));
    if (r > worst) {
      worst = r;
      c.worst_vertex = v;
    }
    for (auto w : g.neighbors(v)) c.modulus = std::max(c.modulus, l1(c.selector[v], c.selector[w]));
  }
  c.residual = worst;
  double diam = 0;
  for (const auto& a : Y)
    for (const auto& b : Y) diam = std::max(diam, l1(a, b));
  c.modulus_budget = diam * g.mesh() / P.scale().delta;
  c.pass = c.residual <= P.scale().eps && c.modulus <= c.modulus_budget + 1e-12;
  if (c.residual > P.scale().eps) c.note = "membership residual exceeds eps at vertex " + std::to_string(*c.worst_vertex);
  else c.worst_vertex.reset();
  return c;
}

// ---------------------------------------------------------------------------
// Closed selections

/// Candidate closed selections of M on the vertex set `on`, in the order
/// they are tried.
inline std::vector<std::vector<std::vector<int>>> closed_candidates(const SampledCorrespondence& M,
                                                                    const std::vector<char>& on, double radius,
                                                                    double eps) {
  const auto& g = M.grid();
  const auto& Y = M.samples();
  std::vector<std::vector<std::vector<int>>> out;
  auto restrict = [&](auto pick) {
    std::vector<std::vector<int>> rows(g.size());
    for (std::size_t v = 0; v < g.size(); ++v)
      if (on[v]) rows[v] = pick(v);
    return rows;
  };
  // M itself
  out.push_back(restrict([&](std::size_t v) { return M.values(v); }));
  // a sample common to every value on the set
  {
    std::vector<std::size_t> members;
    for (std::size_t v = 0; v < g.size(); ++v)
      if (on[v] && M.nonempty(v)) members.push_back(v);
    if (auto y = common_sample(M, members))
      out.push_back(restrict([&](std::size_t v) { return M.nonempty(v) ? std::vector<int>{*y} : std::vector<int>{}; }));
  }
  // the graph minus neighbourhoods of points clearly outside M
  {
    const double tau = outside_threshold(M, radius, eps);
    std::vector<std::vector<int>> rows = restrict([&](std::size_t v) { return M.values(v); });
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (!on[v]) continue;
      auto ball = centered_ball(g, v, radius, &on);
      for (int x = 0; x < static_cast<int>(Y.size()); ++x) {
        const Vec& p = Y[static_cast<std::size_t>(x)];
        if (M.within(v, p, tau)) continue;
        for (auto w : ball) {
          auto& r = rows[w];
          r.erase(std::remove_if(r.begin(), r.end(),
                                 [&](int y) { return l1(Y[static_cast<std::size_t>(y)], p) <= eps; }),
                  r.end());
        }
      }
    }
    out.push_back(std::move(rows));
  }
  // lexicographically smallest sample
  out.push_back(restrict([&](std::size_t v) {
    const auto& vals = M.values(v);
    if (vals.empty()) return std::vector<int>{};
    int best = vals.front();
    for (int y : vals)
      if (lex_less(Y[static_cast<std::size_t>(y)], Y[static_cast<std::size_t>(best)])) best = y;
    return std::vector<int>{best};
  }));
  return out;
}

inline bool nonempty_where_supported(const SampledCorrespondence& M, const std::vector<std::vector<int>>& rows,
                                     const std::vector<char>& on) {
  for (std::size_t v = 0; v < rows.size(); ++v)
    if (on[v] && M.nonempty(v) && rows[v].empty()) return false;
  return true;
}

/// First candidate on `on` ∩ E_M that is nonempty on E_M and closed there.
inline std::optional<std::vector<std::vector<int>>> closed_selection_on(const SampledCorrespondence& M,
                                                                        const std::vector<char>& on, double radius,
                                                                        double eps) {
  std::vector<char> onM(on.size(), 0);
  for (std::size_t v = 0; v < on.size(); ++v) onM[v] = on[v] && M.nonempty(v);
  for (auto& rows : closed_candidates(M, onM, radius, eps))
    if (nonempty_where_supported(M, rows, onM) && closed_on(M, rows, onM, radius, eps)) return rows;
  return std::nullopt;
}

/// No closed local selection at v for any rung of the ladder.
inline bool detect_jump(const SampledCorrespondence& F, std::size_t v, const Ladder& ladder = {}) {
  const auto& g = F.grid();
  for (int k : ladder.delta_steps)
    for (double eps : ladder.eps) {
      double r = k * g.mesh();
      std::vector<char> on(g.size(), 0);
      for (auto w : centered_ball(g, v, r)) on[w] = 1;
      if (closed_selection_on(F, on, r, eps)) return false;
    }
  return true;
}

/// Closed selection of M on E_M at the correspondence's own scale. Global
/// candidates are tried first; otherwise each vertex takes the value of a
/// local witness anchored there and the glued result is checked.
inline SelectionCertificate nsp_closed_selection(const SampledCorrespondence& M, const Ladder& ladder = {}) {
  if (!check_nsp_at_scale(M, ladder)) throw SelectionPrecondition("neighbourhood selection property fails at scale");
  const auto& g = M.grid();
  const auto EM = M.support();
  const double r = M.scale().delta, eps = M.scale().eps;
  SelectionCertificate c;
  c.kind = SelectionKind::closed_selection;
  c.scale = M.scale();
  std::optional<std::vector<std::vector<int>>> rows = closed_selection_on(M, EM, r, eps);
  if (!rows) {
    std::vector<std::vector<int>> glued(g.size());
    for (std::size_t a = 0; a < g.size(); ++a) {
      if (!EM[a]) continue;
      for (int k : ladder.delta_steps) {
        std::vector<char> on(g.size(), 0);
        for (auto w : centered_ball(g, a, k * g.mesh())) on[w] = 1;
        if (auto loc = closed_selection_on(M, on, k * g.mesh(), eps)) {
          glued[a] = (*loc)[a];
          break;
        }
      }
    }
    rows = glued;
    c.note = "glued from local witnesses";
  }
  c.selection = *rows;
  c.closed = closed_on(M, c.selection, EM, r, eps);
  bool contained = true, nonempty = true;
  for (std::size_t v = 0; v < g.size(); ++v) {
    for (int y : c.selection[v])
      if (!M.contains(v, y)) contained = false;
    if (EM[v] && c.selection[v].empty()) {
      nonempty = false;
      if (!c.worst_vertex) c.worst_vertex = v;
    }
  }
  c.residual = contained ? 0.0 : std::numeric_limits<double>::infinity();
  c.pass = c.closed && contained && nonempty;
  if (!nonempty) c.note = "empty selected value at vertex " + std::to_string(*c.worst_vertex);
  return c;
}

/// Re-checks an externally supplied closed selection against M.
inline SelectionCertificate certify_closed_selection(const SampledCorrespondence& M,
                                                     const std::vector<std::vector<int>>& rows) {
  const auto EM = M.support();
  SelectionCertificate c;
  c.kind = SelectionKind::closed_selection;
  c.scale = M.scale();
  c.selection = rows;
  c.closed = closed_on(M, rows, EM, M.scale().delta, M.scale().eps);
  bool ok = true;
  for (std::size_t v = 0; v < rows.size(); ++v) {
    for (int y : rows[v])
      if (!M.contains(v, y)) ok = false;
    if (EM[v] && rows[v].empty()) ok = false;
  }
  c.residual = ok ? 0.0 : std::numeric_limits<double>::infinity();
  c.pass = ok && c.closed;
  return c;
}

// ---------------------------------------------------------------------------
// Covers and continuous inclusion

/// Cover of the support by balls, each assigned a sample common to the
/// values on it (the at-scale version of the O^y construction). Cover
/// element α is the union of the balls assigned to sample target[α].
struct ScaleCover {
  std::vector<GridOpenSet> sets;
  std::vector<int> target;
};

inline Outcome<ScaleCover> extract_tarafdar_cover_at_scale(const SampledCorrespondence& P) {
  const auto& g = P.grid();
  BallSystem balls(g, P.scale().delta);
  std::map<int, std::vector<char>> by_target;
  for (std::size_t v = 0; v < g.size(); ++v) {
    if (!P.nonempty(v)) continue;
    bool found = false;
    for (auto b : balls.containing(v))
      if (auto y = common_sample(P, balls.ball(b))) {
        auto& s = by_target[*y];
        if (s.empty()) s.assign(g.size(), 0);
        for (auto w : balls.ball(b)) s[w] = 1;
        found = true;
        break;
      }
    if (!found) return Outcome<ScaleCover>::fail("no-cover: no common value near vertex " + std::to_string(v));
  }
  ScaleCover c;
  for (auto& [y, s] : by_target) {
    c.sets.push_back(GridOpenSet{s, std::nullopt, P.scale().delta});
    c.target.push_back(y);
  }
  return c;
}

enum class CoverScope { support, whole };

/// Cover by δ-open sets with a common value each: of the support, or of
/// the whole domain (which forces every value to be nonempty).
inline bool check_tarafdar_at_scale(const SampledCorrespondence& P, CoverScope scope = CoverScope::support) {
  if (scope == CoverScope::whole)
    for (std::size_t v = 0; v < P.grid().size(); ++v)
      if (!P.nonempty(v)) return false;
  return extract_tarafdar_cover_at_scale(P).ok();
}

/// Local sub-correspondence on a neighbourhood: point sets per member vertex.
struct LocalInclusion {
  std::vector<char> neighborhood;
  std::vector<std::vector<Vec>> values;  ///< indexed by vertex; empty outside
  std::string kind;
};

/// usc at scale of explicit point-set rows restricted to `on`.
inline bool rows_usc_on(const SampledCorrespondence& P, const std::vector<std::vector<Vec>>& rows,
                        const std::vector<char>& on) {
  auto F = SampledCorrespondence::from_sets(P.grid_ptr(), rows, P.scale(), true, P.lipschitz());
  return check_usc_at_scale(F, &on);
}

/// Searches, at vertex v, for a basic neighbourhood carrying an usc
/// sub-correspondence with nonempty values: a constant common sample, then P
/// itself, then the nearest point of each hull to the neighbourhood's mean
/// value.
inline std::optional<LocalInclusion> local_inclusion(const SampledCorrespondence& P, const BallSystem& balls,
                                                     std::size_t v) {
  const auto& g = P.grid();
  for (auto b : balls.containing(v)) {
    const auto& ball = balls.ball(b);
    if (auto y = common_sample(P, ball)) {
      LocalInclusion li{std::vector<char>(g.size(), 0), std::vector<std::vector<Vec>>(g.size()), "constant"};
      for (auto w : ball) {
        li.neighborhood[w] = 1;
        li.values[w] = {P.samples()[static_cast<std::size_t>(*y)]};
      }
      return li;
    }
  }
  for (auto b : balls.containing(v)) {
    const auto& ball = balls.ball(b);
    bool all_nonempty = std::all_of(ball.begin(), ball.end(), [&](std::size_t w) { return P.nonempty(w); });
    if (!all_nonempty) continue;
    std::vector<char> on(g.size(), 0);
    for (auto w : ball) on[w] = 1;
    std::vector<std::vector<Vec>> rows(g.size());
    for (auto w : ball) rows[w] = P.points(w);
    if (rows_usc_on(P, rows, on)) return LocalInclusion{on, rows, "restriction"};
    Vec mean = Vec::Zero(P.samples().front().size());
    double count = 0;
    for (auto w : ball)
      for (const auto& p : rows[w]) {
        mean += p;
        count += 1;
      }
    mean /= count;
    std::vector<std::vector<Vec>> near(g.size());
    for (auto w : ball) near[w] = {P.values(w).size() == 1 ? rows[w][0] : project_l1(rows[w], mean).nearest};
    if (rows_usc_on(P, near, on)) return LocalInclusion{on, near, "nearest-point"};
  }
  return std::nullopt;
}

inline bool check_continuous_inclusion_at_scale(const SampledCorrespondence& P) {
  if (!P.convex()) throw ParameterError("continuous inclusion needs convex-flagged values");
  BallSystem balls(P.grid(), P.scale().delta);
  for (std::size_t v = 0; v < P.grid().size(); ++v)
    if (P.nonempty(v) && !local_inclusion(P, balls, v)) return false;
  return true;
}

/// Vertices with nonempty value and no local inclusion, restricted to the
/// δ-interior of the support when `interior_only` is set.
inline std::vector<std::size_t> inclusion_failures(const SampledCorrespondence& P, bool interior_only) {
  if (!P.convex()) throw ParameterError("continuous inclusion needs convex-flagged values");
  const auto& g = P.grid();
  BallSystem balls(g, P.scale().delta);
  std::vector<char> on(g.size(), 0);
  for (std::size_t v = 0; v < g.size(); ++v) on[v] = P.nonempty(v);
  if (interior_only) on = balls.interior(on);
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (on[v] && !local_inclusion(P, balls, v)) out.push_back(v);
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

inline nlohmann::ordered_json to_json(const SampledCorrespondence& P) {
  nlohmann::ordered_json j;
  const auto& g = P.grid();
  j["grid"] = {{"kind", g.kind() == GridKind::simplex ? "simplex" : "box"},
               {"dim", g.dim()},
               {"mesh", g.mesh()},
               {"lo", g.lo()},
               {"hi", g.hi()}};
  j["scale"] = {{"h", P.scale().h}, {"delta", P.scale().delta}, {"eps", P.scale().eps}};
  j["convex"] = P.convex();
  j["lipschitz"] = P.lipschitz();
  nlohmann::ordered_json vals = nlohmann::ordered_json::array();
  for (std::size_t v = 0; v < g.size(); ++v) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& p : P.points(v)) row.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    vals.push_back(row);
  }
  j["values"] = vals;
  return j;
}

}  // namespace wsel

#pragma once

// Kuhn-triangulated grids on the price simplex and on boxes, partitions of
// unity over vertex sets, and the convex kernels (hull distance, separation,
// distance to the negative orthant) used by the numerical modules.

#include "wsel/common.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

namespace wsel {

using IVec = std::vector<int>;

// ---------------------------------------------------------------------------
// Grids

enum class GridKind { simplex, box };

/// Lattice grid with a Kuhn triangulation. Simplex grids hold the points of
/// {p >= 0, sum p = 1} with coordinates k_i/N; box grids hold lo + h*k with
/// 0 <= k_i <= N.
class SimplicialGrid {
 public:
  static SimplicialGrid simplex(int m, double h, int min_index = 0) {
    int N = steps_for(h);
    if (m < 1 || m > 8) throw ParameterError("simplex dimension must be in [1, 8]");
    if (min_index < 0 || min_index * m > N) throw ParameterError("clipping leaves no vertices");
    SimplicialGrid g;
    g.kind_ = GridKind::simplex;
    g.m_ = m;
    g.N_ = N;
    g.h_ = 1.0 / N;
    g.min_index_ = min_index;
    g.lo_ = 0.0;
    IVec k(static_cast<std::size_t>(m), 0);
    g.enumerate_simplex(k, 0, N);
    g.finish();
    return g;
  }

  static SimplicialGrid box(int d, double lo, double hi, double h) {
    if (d < 1 || d > 8) throw ParameterError("box dimension must be in [1, 8]");
    if (!(hi > lo)) throw ParameterError("box needs lo < hi");
    double ratio = (hi - lo) / h;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 0.5)
      throw ParameterError("box side must be an integral multiple of the mesh");
    SimplicialGrid g;
    g.kind_ = GridKind::box;
    g.m_ = d;
    g.N_ = static_cast<int>(std::lround(ratio));
    g.h_ = h;
    g.lo_ = lo;
    IVec k(static_cast<std::size_t>(d), 0);
    g.enumerate_box(k, 0);
    g.finish();
    return g;
  }

  GridKind kind() const { return kind_; }
  int dim() const { return m_; }
  double mesh() const { return h_; }
  int steps() const { return N_; }
  double lo() const { return lo_; }
  double hi() const { return lo_ + h_ * N_; }
  std::size_t size() const { return verts_.size(); }
  const IVec& index(std::size_t v) const { return verts_[v]; }
  const Vec& point(std::size_t v) const { return points_[v]; }
  const std::vector<std::vector<std::size_t>>& cells() const { return cells_; }

  std::optional<std::size_t> find(const IVec& k) const {
    auto it = lookup_.find(k);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  /// Grid vertices at lattice distance 1 (simplex: k + e_i - e_j, box: k ± e_i).
  const std::vector<std::size_t>& neighbors(std::size_t v) const { return adj_[v]; }

  /// Lattice l1 distance in units of h (simplex moves count 2 units).
  int lattice_l1(std::size_t a, std::size_t b) const {
    int s = 0;
    for (int i = 0; i < m_; ++i) s += std::abs(verts_[a][static_cast<std::size_t>(i)] - verts_[b][static_cast<std::size_t>(i)]);
    return s;
  }

  double diameter_l1() const { return kind_ == GridKind::simplex ? 2.0 : m_ * (hi() - lo()); }

  /// Nearest vertex in l1 with lexicographic tie-break on index.
  std::size_t nearest(const Vec& p) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < size(); ++v) {
      double d = l1(points_[v], p);
      if (d < bd - 1e-12) {
        bd = d;
        best = v;
      }
    }
    return best;
  }

  /// Sum of cell volumes in the reduced coordinates (first m-1 coordinates
  /// for the simplex, all coordinates for a box).
  double total_cell_volume() const {
    double total = 0;
    for (const auto& c : cells_) total += cell_volume(c);
    return total;
  }
  double domain_volume() const {
    int r = reduced_dim();
    if (kind_ == GridKind::box) return std::pow(hi() - lo(), r);
    double f = 1;
    for (int i = 2; i <= r; ++i) f *= i;
    double side = 1.0 - m_ * min_index_ * h_;
    return std::pow(side, r) / f;
  }
  double cell_volume(const std::vector<std::size_t>& c) const {
    int r = reduced_dim();
    if (r == 0) return 1.0;
    Eigen::MatrixXd D(r, r);
    for (int j = 0; j < r; ++j)
      for (int i = 0; i < r; ++i)
        D(i, j) = points_[c[static_cast<std::size_t>(j + 1)]](i) - points_[c[0]](i);
    double f = 1;
    for (int i = 2; i <= r; ++i) f *= i;
    return std::abs(D.determinant()) / f;
  }
  int reduced_dim() const { return kind_ == GridKind::simplex ? m_ - 1 : m_; }

 private:
  static int steps_for(double h) {
    if (!(h > 0 && h <= 1)) throw ParameterError("mesh must be in (0, 1]");
    double inv = 1.0 / h;
    if (std::abs(inv - std::round(inv)) > 1e-9) throw ParameterError("1/h must be an integer");
    return static_cast<int>(std::lround(inv));
  }

  void enumerate_simplex(IVec& k, int i, int left) {
    if (i == m_ - 1) {
      if (left < min_index_) return;
      k[static_cast<std::size_t>(i)] = left;
      add(k);
      return;
    }
    for (int v = min_index_; v <= left; ++v) {
      k[static_cast<std::size_t>(i)] = v;
      enumerate_simplex(k, i + 1, left - v);
    }
  }
  void enumerate_box(IVec& k, int i) {
    if (i == m_) {
      add(k);
      return;
    }
    for (int v = 0; v <= N_; ++v) {
      k[static_cast<std::size_t>(i)] = v;
      enumerate_box(k, i + 1);
    }
  }
  void add(const IVec& k) {
    lookup_[k] = verts_.size();
    verts_.push_back(k);
    Vec p(m_);
    for (int i = 0; i < m_; ++i)
      p(i) = kind_ == GridKind::simplex ? static_cast<double>(k[static_cast<std::size_t>(i)]) / N_
                                        : lo_ + h_ * k[static_cast<std::size_t>(i)];
    points_.push_back(p);
  }

  // Freudenthal cells. For the simplex, work in cumulative coordinates
  // s_j = k_1 + ... + k_j (j < m), which range over 0 <= s_1 <= ... <= s_{m-1} <= N;
  // the cube cells with base b and permutation π are kept when every vertex
  // satisfies the (clipped) monotonicity constraints.
  void finish() {
    const int r = reduced_dim();
    adj_.assign(verts_.size(), {});
    for (std::size_t v = 0; v < verts_.size(); ++v) {
      if (kind_ == GridKind::simplex) {
        for (int i = 0; i < m_; ++i)
          for (int j = 0; j < m_; ++j) {
            if (i == j) continue;
            IVec k = verts_[v];
            ++k[static_cast<std::size_t>(i)];
            --k[static_cast<std::size_t>(j)];
            if (auto w = find(k)) adj_[v].push_back(*w);
          }
      } else {
        for (int i = 0; i < m_; ++i)
          for (int d : {-1, 1}) {
            IVec k = verts_[v];
            k[static_cast<std::size_t>(i)] += d;
            if (auto w = find(k)) adj_[v].push_back(*w);
          }
      }
      std::sort(adj_[v].begin(), adj_[v].end());
    }
    if (r == 0) {
      cells_.push_back({0});
      return;
    }
    std::vector<int> perm(static_cast<std::size_t>(r));
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::vector<int>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));

    IVec base(static_cast<std::size_t>(r), 0);
    std::function<void(int)> rec = [&](int i) {
      if (i == r) {
        for (const auto& pi : perms) {
          IVec s = base;
          std::vector<std::size_t> cell;
          bool ok = true;
          for (int step = 0; step <= r && ok; ++step) {
            if (step > 0) ++s[static_cast<std::size_t>(pi[static_cast<std::size_t>(step - 1)])];
            auto v = from_reduced(s);
            if (!v) ok = false;
            else cell.push_back(*v);
          }
          if (ok) cells_.push_back(cell);
        }
        return;
      }
      for (int v = 0; v < N_; ++v) {
        base[static_cast<std::size_t>(i)] = v;
        rec(i + 1);
      }
    };
    rec(0);
    std::sort(cells_.begin(), cells_.end());
  }

  std::optional<std::size_t> from_reduced(const IVec& s) const {
    if (kind_ == GridKind::box) return find(s);
    IVec k(static_cast<std::size_t>(m_));
    int prev = 0;
    for (int j = 0; j < m_ - 1; ++j) {
      k[static_cast<std::size_t>(j)] = s[static_cast<std::size_t>(j)] - prev;
      prev = s[static_cast<std::size_t>(j)];
    }
    k[static_cast<std::size_t>(m_ - 1)] = N_ - prev;
    for (int x : k)
      if (x < min_index_) return std::nullopt;
    return find(k);
  }

  GridKind kind_ = GridKind::simplex;
  int m_ = 0, N_ = 0, min_index_ = 0;
  double h_ = 0, lo_ = 0;
  std::vector<IVec> verts_;
  std::vector<Vec> points_;
  std::map<IVec, std::size_t> lookup_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::vector<std::size_t>> cells_;
};

inline SimplicialGrid build_grid(int m, double h) { return SimplicialGrid::simplex(m, h); }

/// Simplex grid with every price coordinate at least h.
inline SimplicialGrid build_price_grid(int m, double h) { return SimplicialGrid::simplex(m, h, 1); }

// ---------------------------------------------------------------------------
// Open sets on grids

/// A vertex subset, optionally remembering the ball that generated it.
struct GridOpenSet {
  std::vector<char> member;
  std::optional<std::size_t> center;
  double radius = 0;

  bool contains(std::size_t v) const { return member[v] != 0; }
  std::size_t count() const { return static_cast<std::size_t>(std::count(member.begin(), member.end(), 1)); }
};

/// Closed l1 ball of radius r around a vertex, clipped to the grid.
inline GridOpenSet grid_ball(const SimplicialGrid& g, std::size_t c, double r) {
  GridOpenSet s;
  s.member.assign(g.size(), 0);
  s.center = c;
  s.radius = r;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (l1(g.point(v), g.point(c)) <= r + 1e-12) s.member[v] = 1;
  return s;
}

/// Vertices within l1 distance r of a point, in index order.
inline std::vector<std::size_t> vertices_within(const SimplicialGrid& g, const Vec& c, double r) {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (l1(g.point(v), c) <= r + 1e-12) out.push_back(v);
  return out;
}

/// The family of clipped balls of one radius, deduplicated, plus for each
/// vertex the balls that contain it. On box grids centers range over an
/// extended lattice, so a boundary vertex also sits in balls reaching only
/// inward.
class BallSystem {
 public:
  BallSystem(const SimplicialGrid& g, double r) : grid_(&g), r_(r) {
    const double h = g.mesh();
    const int reach = static_cast<int>(std::floor(r / h + 1e-9));
    std::map<std::vector<std::size_t>, std::size_t> seen;
    centered_.assign(g.size(), 0);
    containing_.assign(g.size(), {});
    auto consider = [&](const Vec& c, std::optional<std::size_t> at) {
      auto mem = vertices_within(g, c, r);
      if (mem.empty()) return;
      auto [it, fresh] = seen.emplace(mem, balls_.size());
      if (fresh) balls_.push_back(std::move(mem));
      if (at) centered_[*at] = it->second;
    };
    for (std::size_t v = 0; v < g.size(); ++v) consider(g.point(v), v);
    if (g.kind() == GridKind::box) {
      IVec k(static_cast<std::size_t>(g.dim()), -reach);
      std::function<void(int)> rec = [&](int i) {
        if (i == g.dim()) {
          bool inside = true;
          for (int x : k)
            if (x < 0 || x > g.steps()) inside = false;
          if (inside) return;
          Vec c(g.dim());
          for (int j = 0; j < g.dim(); ++j) c(j) = g.lo() + h * k[static_cast<std::size_t>(j)];
          consider(c, std::nullopt);
          return;
        }
        for (int x = -reach; x <= g.steps() + reach; ++x) {
          k[static_cast<std::size_t>(i)] = x;
          rec(i + 1);
        }
      };
      rec(0);
    }
    for (std::size_t b = 0; b < balls_.size(); ++b)
      for (auto v : balls_[b]) containing_[v].push_back(b);
  }

  const SimplicialGrid& grid() const { return *grid_; }
  double radius() const { return r_; }
  std::size_t count() const { return balls_.size(); }
  const std::vector<std::size_t>& ball(std::size_t b) const { return balls_[b]; }
  const std::vector<std::size_t>& containing(std::size_t v) const { return containing_[v]; }
  std::size_t centered(std::size_t v) const { return centered_[v]; }

  bool ball_inside(std::size_t b, const std::vector<char>& S) const {
    for (auto v : balls_[b])
      if (!S[v]) return false;
    return true;
  }
  /// Union of the balls contained in S: the largest open set inside S.
  std::vector<char> interior(const std::vector<char>& S) const {
    std::vector<char> out(S.size(), 0);
    for (std::size_t v = 0; v < S.size(); ++v) {
      if (!S[v]) continue;
      for (auto b : containing_[v])
        if (ball_inside(b, S)) {
          out[v] = 1;
          break;
        }
    }
    return out;
  }
  bool is_open(const std::vector<char>& S) const { return interior(S) == S; }
  GridOpenSet as_open_set(std::size_t b) const {
    GridOpenSet s;
    s.member.assign(grid_->size(), 0);
    for (auto v : balls_[b]) s.member[v] = 1;
    s.radius = r_;
    return s;
  }

 private:
  const SimplicialGrid* grid_;
  double r_;
  std::vector<std::vector<std::size_t>> balls_;
  std::vector<std::size_t> centered_;
  std::vector<std::vector<std::size_t>> containing_;
};

// ---------------------------------------------------------------------------
// Partitions of unity

struct PartitionOfUnity {
  std::vector<GridOpenSet> cover;
  /// weights[v][α]
  std::vector<std::vector<double>> weights;
};

struct UncoveredVertex : PreconditionError {
  explicit UncoveredVertex(std::size_t v)
      : PreconditionError("vertex " + std::to_string(v) + " lies in no cover element"), vertex(v) {}
  std::size_t vertex;
};

/// Grid distance (in lattice units) from every vertex to the complement of S;
/// 0 outside S. An empty complement gives diameter + 1 everywhere.
inline std::vector<double> distance_to_complement(const SimplicialGrid& g, const std::vector<char>& S) {
  std::vector<int> dist(g.size(), -1);
  std::queue<std::size_t> q;
  for (std::size_t v = 0; v < g.size(); ++v)
    if (!S[v]) {
      dist[v] = 0;
      q.push(v);
    }
  std::vector<double> out(g.size());
  if (q.empty()) {
    double unit = g.kind() == GridKind::simplex ? 2.0 : 1.0;
    std::fill(out.begin(), out.end(), g.diameter_l1() / g.mesh() / unit + 1.0);
    return out;
  }
  while (!q.empty()) {
    auto v = q.front();
    q.pop();
    for (auto w : g.neighbors(v))
      if (dist[w] < 0) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
  }
  for (std::size_t v = 0; v < g.size(); ++v) out[v] = dist[v] < 0 ? 0.0 : dist[v];
  return out;
}

inline PartitionOfUnity partition_of_unity(const SimplicialGrid& g, std::vector<GridOpenSet> cover) {
  PartitionOfUnity pu;
  pu.weights.assign(g.size(), std::vector<double>(cover.size(), 0.0));
  std::vector<std::vector<double>> d(cover.size());
  for (std::size_t a = 0; a < cover.size(); ++a) d[a] = distance_to_complement(g, cover[a].member);
  for (std::size_t v = 0; v < g.size(); ++v) {
    double s = 0;
    for (std::size_t a = 0; a < cover.size(); ++a) s += d[a][v];
    if (s <= 0) throw UncoveredVertex(v);
    for (std::size_t a = 0; a < cover.size(); ++a) pu.weights[v][a] = d[a][v] / s;
  }
  pu.cover = std::move(cover);
  return pu;
}

// ---------------------------------------------------------------------------
// Polytopes and convex kernels

/// V-representation with duplicate vertices merged.
class Polytope {
 public:
  Polytope() = default;
  explicit Polytope(std::vector<Vec> pts) {
    for (auto& p : pts) add(std::move(p));
  }
  void add(Vec p) {
    for (const auto& q : v_)
      if ((q - p).cwiseAbs().maxCoeff() <= 1e-12) return;
    v_.push_back(std::move(p));
  }
  const std::vector<Vec>& vertices() const { return v_; }
  bool empty() const { return v_.empty(); }
  std::size_t size() const { return v_.size(); }
  Eigen::Index dim() const { return v_.empty() ? 0 : v_.front().size(); }

 private:
  std::vector<Vec> v_;
};

/// Keeps at most cap points: the first point, then repeatedly the point
/// farthest (l1) from those kept. Deterministic.
inline std::vector<Vec> farthest_point_prune(const std::vector<Vec>& pts, std::size_t cap) {
  if (pts.size() <= cap) return pts;
  std::vector<Vec> keep{pts.front()};
  std::vector<double> dmin(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<char> taken(pts.size(), 0);
  taken[0] = 1;
  std::size_t last = 0;
  while (keep.size() < cap) {
    std::size_t best = 0;
    double bd = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (taken[i]) continue;
      dmin[i] = std::min(dmin[i], l1(pts[i], pts[last]));
      if (dmin[i] > bd) {
        bd = dmin[i];
        best = i;
      }
    }
    taken[best] = 1;
    last = best;
    keep.push_back(pts[best]);
  }
  return keep;
}

/// l1 distance from p to hull(V) and the nearest hull point, by LP:
/// p = Σλ_j v_j + u - w, λ in the unit simplex, minimise Σ(u + w).
struct HullProjection {
  double distance = 0;
  Vec nearest;
  Vec lambda;
};

inline HullProjection project_l1(const std::vector<Vec>& V, const Vec& p) {
  if (V.empty()) throw ParameterError("projection onto an empty hull");
  const auto k = p.size();
  const auto n = static_cast<Eigen::Index>(V.size());
  if (n == 1) return {l1(V[0], p), V[0], Vec::Ones(1)};
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k + 1, n + 2 * k);
  Vec b(k + 1), c = Vec::Zero(n + 2 * k);
  for (Eigen::Index j = 0; j < n; ++j) {
    A.block(0, j, k, 1) = V[static_cast<std::size_t>(j)];
    A(k, j) = 1;
  }
  A.block(0, n, k, k).setIdentity();
  A.block(0, n + k, k, k) = -Eigen::MatrixXd::Identity(k, k);
  b.head(k) = p;
  b(k) = 1;
  c.tail(2 * k).setOnes();
  auto s = solve_lp(A, b, c);
  if (!s.feasible) throw InternalError("hull projection LP infeasible");
  HullProjection out;
  out.lambda = s.x.head(n);
  out.nearest = Vec::Zero(k);
  for (Eigen::Index j = 0; j < n; ++j) out.nearest += out.lambda(j) * V[static_cast<std::size_t>(j)];
  out.distance = l1(out.nearest, p);
  return out;
}

inline double hull_distance_l1(const std::vector<Vec>& V, const Vec& p) { return project_l1(V, p).distance; }

/// Euclidean minimum-norm point of hull(P) (Wolfe's algorithm).
inline Vec min_norm_point(const std::vector<Vec>& P) {
  if (P.empty()) throw ParameterError("min-norm point of an empty set");
  const double tol = 1e-12;
  auto argmin_dot = [&](const Vec& x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < P.size(); ++i)
      if (P[i].dot(x) < P[best].dot(x) - 1e-15) best = i;
    return best;
  };
  std::vector<std::size_t> S{0};
  for (std::size_t i = 1; i < P.size(); ++i)
    if (P[i].squaredNorm() < P[S[0]].squaredNorm()) S[0] = i;
  Vec w = Vec::Ones(1);
  Vec x = P[S[0]];
  for (int outer = 0; outer < 1000; ++outer) {
    std::size_t j = argmin_dot(x);
    if (x.squaredNorm() - x.dot(P[j]) <= tol * std::max(1.0, P[j].squaredNorm()) ||
        std::find(S.begin(), S.end(), j) != S.end())
      return x;
    S.push_back(j);
    w.conservativeResize(static_cast<Eigen::Index>(S.size()));
    w(w.size() - 1) = 0;
    for (int inner = 0; inner < 1000; ++inner) {
      // affine minimiser over S
      const auto s = static_cast<Eigen::Index>(S.size());
      Eigen::MatrixXd M(s + 1, s + 1);
      for (Eigen::Index a = 0; a < s; ++a)
        for (Eigen::Index b = 0; b < s; ++b) M(a, b) = P[S[static_cast<std::size_t>(a)]].dot(P[S[static_cast<std::size_t>(b)]]);
      M.row(s).head(s).setOnes();
      M.col(s).head(s).setOnes();
      M(s, s) = 0;
      Vec rhs = Vec::Zero(s + 1);
      rhs(s) = 1;
      Vec sol = M.completeOrthogonalDecomposition().solve(rhs);
      Vec v = sol.head(s);
      if ((v.array() > tol).all()) {
        w = v;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index a = 0; a < s; ++a)
        if (v(a) <= tol && w(a) - v(a) > 0) theta = std::min(theta, w(a) / (w(a) - v(a)));
      w = (1 - theta) * w + theta * v;
      std::vector<std::size_t> S2;
      std::vector<double> w2;
      for (Eigen::Index a = 0; a < s; ++a)
        if (w(a) > tol) {
          S2.push_back(S[static_cast<std::size_t>(a)]);
          w2.push_back(w(a));
        }
      S = S2;
      w = Eigen::Map<Vec>(w2.data(), static_cast<Eigen::Index>(w2.size()));
    }
    x = Vec::Zero(P[0].size());
    for (std::size_t a = 0; a < S.size(); ++a) x += w(static_cast<Eigen::Index>(a)) * P[S[a]];
  }
  return x;
}

struct Separation {
  Vec q;
  double r = 0;
};

/// Strictly separating hyperplane q.a > r > q.b, from the minimum-distance
/// pair of the two hulls.
inline std::optional<Separation> strictly_separates(const Polytope& A, const Polytope& B, double tol = 1e-10) {
  if (A.empty() || B.empty()) throw ParameterError("separation needs nonempty polytopes");
  std::vector<Vec> diff;
  for (const auto& a : A.vertices())
    for (const auto& b : B.vertices()) diff.push_back(a - b);
  Vec d = min_norm_point(diff);
  double n = d.norm();
  if (n <= tol) return std::nullopt;
  Vec q = d / n;
  double amin = std::numeric_limits<double>::infinity(), bmax = -amin;
  for (const auto& a : A.vertices()) amin = std::min(amin, q.dot(a));
  for (const auto& b : B.vertices()) bmax = std::max(bmax, q.dot(b));
  if (!(amin > bmax + tol)) return std::nullopt;
  return Separation{q, 0.5 * (amin + bmax)};
}

/// min over hull(A) of the l1 norm of the positive part, via the LP
/// z = Σλ_j a_j, t >= z, t >= 0, minimise Σ t.
inline double min_distance_to_negative_orthant(const Polytope& A) {
  if (A.empty()) throw ParameterError("distance of an empty polytope");
  const auto k = A.dim();
  const auto n = static_cast<Eigen::Index>(A.size());
  // variables: λ (n), t (k), slack s = t - Σλa >= 0 (k)
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k + 1, n + 2 * k);
  Vec b = Vec::Zero(k + 1), c = Vec::Zero(n + 2 * k);
  for (Eigen::Index j = 0; j < n; ++j) {
    M.block(0, j, k, 1) = -A.vertices()[static_cast<std::size_t>(j)];
    M(k, j) = 1;
  }
  M.block(0, n, k, k).setIdentity();
  M.block(0, n + k, k, k) = -Eigen::MatrixXd::Identity(k, k);
  b(k) = 1;
  c.segment(n, k).setOnes();
  auto s = solve_lp(M, b, c);
  if (!s.feasible) throw InternalError("orthant LP infeasible");
  // recompute exactly from λ to avoid slack round-off
  Vec z = Vec::Zero(k);
  for (Eigen::Index j = 0; j < n; ++j) z += s.x(j) * A.vertices()[static_cast<std::size_t>(j)];
  double exact = z.cwiseMax(0.0).sum();
  double best_vertex = std::numeric_limits<double>::infinity();
  for (const auto& a : A.vertices()) best_vertex = std::min(best_vertex, a.cwiseMax(0.0).sum());
  return std::min(exact, best_vertex);
}

// ---------------------------------------------------------------------------
// Sperner search

struct BrouwerResult {
  Vec point;
  double residual = 0;
  std::size_t cell = 0;
  std::vector<int> labels;
};

/// Smallest k with f_k(v) <= v_k and v_k > 0.
inline int sperner_label(const Vec& v, const Vec& fv) {
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (fv(k) <= v(k) + 1e-15 && v(k) > 0) return static_cast<int>(k);
  throw InternalError("no eligible Sperner label");
}

/// Scans cells in lexicographic order for the first completely labeled one.
/// f is evaluated once per vertex; the fixed-point estimate is the cell
/// barycenter and the residual is the l1 gap of the averaged vertex images.
inline BrouwerResult brouwer_sperner(const SimplicialGrid& g, const std::vector<Vec>& fvals,
                                     std::ostream* trace = nullptr) {
  if (g.kind() != GridKind::simplex) throw ParameterError("Sperner search needs a simplex grid");
  if (fvals.size() != g.size()) throw ParameterError("one image per vertex required");
  for (std::size_t v = 0; v < g.size(); ++v) {
    const Vec& f = fvals[v];
    if ((f.array() < -1e-9).any() || std::abs(f.sum() - 1.0) > 1e-9)
      throw PreconditionError("image of vertex " + std::to_string(v) + " leaves the simplex");
  }
  std::vector<int> label(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) label[v] = sperner_label(g.point(v), fvals[v]);
  const auto m = static_cast<std::size_t>(g.dim());
  if (trace) *trace << "cell,labels,residual\n";
  for (std::size_t c = 0; c < g.cells().size(); ++c) {
    const auto& cell = g.cells()[c];
    std::vector<char> seen(m, 0);
    std::vector<int> ls;
    for (auto v : cell) {
      seen[static_cast<std::size_t>(label[v])] = 1;
      ls.push_back(label[v]);
    }
    bool complete = std::all_of(seen.begin(), seen.end(), [](char s) { return s; });
    if (!complete) continue;
    BrouwerResult r;
    r.cell = c;
    r.labels = ls;
    r.point = Vec::Zero(g.dim());
    Vec fbar = Vec::Zero(g.dim());
    for (auto v : cell) {
      r.point += g.point(v);
      fbar += fvals[v];
    }
    r.point /= static_cast<double>(cell.size());
    fbar /= static_cast<double>(cell.size());
    r.residual = l1(fbar, r.point);
    if (trace) {
      *trace << c << ",";
      for (std::size_t i = 0; i < ls.size(); ++i) *trace << (i ? " " : "") << ls[i];
      *trace << "," << r.residual << "\n";
    }
    return r;
  }
  throw InternalError("no completely labeled cell");
}

template <class F>
BrouwerResult brouwer_sperner_fn(const SimplicialGrid& g, F&& f, std::ostream* trace = nullptr) {
  std::vector<Vec> fv(g.size());
  parallel_for(g.size(), [&](std::size_t v) { fv[v] = f(g.point(v)); });
  return brouwer_sperner(g, fv, trace);
}

}  // namespace wsel

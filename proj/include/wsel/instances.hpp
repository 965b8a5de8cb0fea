#pragma once

// Named sampled correspondences used by the test suites and the CLI.

#include "wsel/correspondence.hpp"
#include "wsel/walras.hpp"

#include <functional>
#include <random>

namespace wsel::instances {

inline GridPtr line(double lo, double hi, double h) {
  return std::make_shared<const SimplicialGrid>(SimplicialGrid::box(1, lo, hi, h));
}

inline Scale scale_for(double h, double eps = 1e-9) { return Scale{h, 2 * h, eps}; }

inline Vec scalar(double x) { return make_vec({x}); }

/// {1} on (0,1], empty at 0.
inline SampledCorrespondence emptying_constant(double h) {
  return sample_correspondence(
      line(0, 1, h), [](const Vec& x) { return x(0) > 0 ? std::vector<Vec>{scalar(1)} : std::vector<Vec>{}; },
      scale_for(h));
}

/// x ↦ {x} on [0,1].
inline SampledCorrespondence identity_map(double h) {
  return sample_correspondence(line(0, 1, h), [](const Vec& x) { return std::vector<Vec>{x}; }, scale_for(h));
}

/// x ↦ {x' > x} ∪ {1}, with x' ranging over the domain grid.
inline SampledCorrespondence strict_upper_rays(double h) {
  auto g = line(0, 1, h);
  return sample_correspondence(
      g,
      [&](const Vec& x) {
        std::vector<Vec> out;
        for (int k = 0; k <= g->steps(); ++k)
          if (k * h > x(0) + 1e-12) out.push_back(scalar(k * h));
        out.push_back(scalar(1));
        return out;
      },
      scale_for(h));
}

/// e ↦ the open interval (e, 1) for e < 1, empty at 1, sampled on a
/// codomain lattice twice as fine as the domain.
inline SampledCorrespondence open_interval_above(double h) {
  const int N = static_cast<int>(std::lround(2 / h));
  return sample_correspondence(
      line(0, 1, h),
      [&](const Vec& e) {
        std::vector<Vec> out;
        for (int k = 0; k <= N; ++k) {
          double y = k * h / 2;
          if (y > e(0) + 1e-12 && y < 1 - 1e-12) out.push_back(scalar(y));
        }
        return out;
      },
      scale_for(h));
}

/// e ↦ {0.5 + 0.5e} as sample indices into M's samples; empty where M is.
inline std::vector<std::vector<int>> midpoint_selection(const SampledCorrespondence& M) {
  std::vector<std::vector<int>> rows(M.grid().size());
  for (std::size_t v = 0; v < rows.size(); ++v) {
    if (!M.nonempty(v)) continue;
    const double t = 0.5 + 0.5 * M.grid().point(v)(0);
    for (int y = 0; y < static_cast<int>(M.samples().size()); ++y)
      if (std::abs(M.samples()[static_cast<std::size_t>(y)](0) - t) < 1e-12) rows[v].push_back(y);
  }
  return rows;
}

/// {1} on even vertices and {0} on odd ones.
inline SampledCorrespondence parity_indicator(double h) {
  auto g = line(0, 1, h);
  std::vector<Vec> Y{scalar(0), scalar(1)};
  std::vector<std::vector<int>> vals(g->size());
  for (std::size_t v = 0; v < g->size(); ++v) vals[v] = {v % 2 == 0 ? 1 : 0};
  return SampledCorrespondence(g, Y, vals, scale_for(h), true, 1.0);
}

/// One agent's share on [0,2]: {0,k} off 1 and {k/n} at 1.
inline SampledCorrespondence jump_share(double h, double k, int n) {
  return sample_correspondence(
      line(0, 2, h),
      [&](const Vec& e) {
        if (std::abs(e(0) - 1) < 1e-12) return std::vector<Vec>{scalar(k / n)};
        return std::vector<Vec>{scalar(0), scalar(k)};
      },
      scale_for(h), false, 0.0);
}

/// Minkowski sum of n copies of jump_share.
inline SampledCorrespondence jump_aggregate(double h, double k, int n) {
  return sample_correspondence(
      line(0, 2, h),
      [&](const Vec& e) {
        if (std::abs(e(0) - 1) < 1e-12) return std::vector<Vec>{scalar(k)};
        std::vector<Vec> out;
        for (int j = 0; j <= n; ++j) out.push_back(scalar(j * k));
        return out;
      },
      scale_for(h), false, 0.0);
}

/// Random convex-valued correspondence on the (m-1)-simplex with open
/// fibers: nested l1 balls C_0 ⊂ ... ⊂ C_J of the codomain lattice around a
/// common center, domain sets B_0 = Δ and open B_j, and value Y ∩ C_j for
/// the largest j with e in B_j.
inline SampledCorrespondence random_open_fiber(int m, double h, std::mt19937_64& rng) {
  auto g = std::make_shared<const SimplicialGrid>(build_grid(m, h));
  const auto Ygrid = build_grid(m, 1.0 / 16);
  std::vector<Vec> Y;
  for (std::size_t i = 0; i < Ygrid.size(); ++i) Y.push_back(Ygrid.point(i));
  const double step = 2.0 / 16;
  std::uniform_int_distribution<std::size_t> pickY(0, Y.size() - 1), pickE(0, g->size() - 1);
  std::uniform_int_distribution<int> levels(1, 3), grow(1, 3);
  const Vec c = Y[pickY(rng)];
  const int J = levels(rng);
  std::vector<double> rho{(m == 2 ? 4 : 3) * step};
  for (int j = 1; j <= J; ++j) rho.push_back(rho.back() + grow(rng) * step);
  const Scale s = Scale{h, 2 * h, 1e-9};
  BallSystem balls(*g, s.delta);
  std::uniform_real_distribution<double> radius(2 * s.delta, 0.6);
  std::vector<int> level(g->size(), 0);
  for (int j = 1; j <= J; ++j) {
    std::vector<char> S(g->size(), 0);
    for (auto v : vertices_within(*g, g->point(pickE(rng)), radius(rng))) S[v] = 1;
    S = balls.interior(S);
    for (std::size_t v = 0; v < g->size(); ++v)
      if (S[v]) level[v] = j;
  }
  std::vector<std::vector<int>> vals(g->size());
  std::vector<std::vector<int>> by_level(static_cast<std::size_t>(J) + 1);
  for (int j = 0; j <= J; ++j)
    for (int y = 0; y < static_cast<int>(Y.size()); ++y)
      if (l1(Y[static_cast<std::size_t>(y)], c) <= rho[static_cast<std::size_t>(j)] + 1e-12)
        by_level[static_cast<std::size_t>(j)].push_back(y);
  for (std::size_t v = 0; v < g->size(); ++v) vals[v] = by_level[static_cast<std::size_t>(level[v])];
  return SampledCorrespondence(g, std::move(Y), std::move(vals), s, true, 1.0);
}

using SimplexMap = std::function<Vec(const Vec&)>;

inline GridPtr simplex_grid(int m, double h) { return std::make_shared<const SimplicialGrid>(build_grid(m, h)); }

inline std::vector<Vec> grid_points(const SimplicialGrid& g) {
  std::vector<Vec> out;
  for (std::size_t v = 0; v < g.size(); ++v) out.push_back(g.point(v));
  return out;
}

/// p ↦ lattice points strictly within l1 distance r of g(p); the lattice
/// is the domain grid itself.
inline SampledCorrespondence ball_around(int m, double h, const SimplexMap& f, double r, double L) {
  auto g = simplex_grid(m, h);
  auto Y = grid_points(*g);
  std::vector<std::vector<int>> vals(g->size());
  for (std::size_t v = 0; v < g->size(); ++v) {
    const Vec c = f(g->point(v));
    for (int y = 0; y < static_cast<int>(Y.size()); ++y)
      if (l1(Y[static_cast<std::size_t>(y)], c) < r - 1e-12) vals[v].push_back(y);
  }
  return SampledCorrespondence(g, std::move(Y), std::move(vals), scale_for(h), true, L);
}

/// ball_around with every fiber shrunk to its δ-interior.
inline SampledCorrespondence open_ball_around(int m, double h, const SimplexMap& f, double r, double L) {
  return fiber_interior(ball_around(m, h, f, r, L));
}

struct BallSpec {
  int m;
  SimplexMap f;
  double r;
  double L;
};

/// Balls around contractions q + (1-a)(σp - q) of coordinate cycles σ,
/// alternating between the 1- and 2-simplex. Declared L is the map's l1
/// constant plus one for lattice rounding of the ball.
inline std::vector<BallSpec> browder_specs(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<BallSpec> out;
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < count; ++i) {
    int m = 2 + i % 2;
    double a = 0.2 + 0.6 * U(rng);
    Vec q(m);
    for (int k = 0; k < m; ++k) q(k) = -std::log(1 - U(rng));
    q /= q.sum();
    int shift = 1 + i % (m - 1);
    SimplexMap f = [=](const Vec& p) {
      Vec s(m);
      for (int k = 0; k < m; ++k) s(k) = p((k + shift) % m);
      return Vec((1 - a) * s + a * q);
    };
    out.push_back({m, f, 0.15 + 0.1 * (i % 3), (1 - a) + 1.0});
  }
  return out;
}

/// Constant value: lattice points within l1 distance r of c.
inline SampledCorrespondence constant_ball(int m, double h, const Vec& c, double r) {
  return ball_around(m, h, [c](const Vec&) { return c; }, r, 0.0);
}

/// p ↦ {p} on the simplex grid.
inline SampledCorrespondence simplex_identity(int m, double h) {
  auto g = simplex_grid(m, h);
  auto Y = grid_points(*g);
  std::vector<std::vector<int>> vals(g->size());
  for (std::size_t v = 0; v < g->size(); ++v) vals[v] = {static_cast<int>(v)};
  return SampledCorrespondence(g, std::move(Y), std::move(vals), scale_for(h), true, 1.0);
}

/// Coarse lattice centers c_α (leading indices divisible by 3) with balls B_α of radius 4h; the value at p
/// is {c_α : p ∈ B_α} ∪ {p}. Each B_α carries the common value c_α, while
/// the fiber of a non-center p is the single vertex p.
inline SampledCorrespondence plateau_identity(int m, double h) {
  auto g = simplex_grid(m, h);
  auto Y = grid_points(*g);
  const int stride = 3;
  std::vector<std::vector<int>> vals(g->size());
  for (std::size_t c = 0; c < g->size(); ++c) {
    bool center = true;
    for (int i = 0; i + 1 < m; ++i) center = center && g->index(c)[static_cast<std::size_t>(i)] % stride == 0;
    if (!center) continue;
    for (auto v : vertices_within(*g, g->point(c), 4 * h + 1e-12)) vals[v].push_back(static_cast<int>(c));
  }
  for (std::size_t v = 0; v < g->size(); ++v) vals[v].push_back(static_cast<int>(v));
  return SampledCorrespondence(g, std::move(Y), std::move(vals), scale_for(h), true, 1.0);
}

/// On the 1-simplex: {(1,0)} left of the middle, {(0,1)} right of it, and
/// the whole segment at the middle vertex (h must divide 1/2).
inline SampledCorrespondence usc_step(double h) {
  auto g = simplex_grid(2, h);
  std::vector<Vec> Y{make_vec({1, 0}), make_vec({0, 1})};
  std::vector<std::vector<int>> vals(g->size());
  for (std::size_t v = 0; v < g->size(); ++v) {
    double p1 = g->point(v)(0);
    if (std::abs(p1 - 0.5) < 1e-12) vals[v] = {0, 1};
    else vals[v] = {p1 < 0.5 ? 0 : 1};
  }
  return SampledCorrespondence(g, std::move(Y), std::move(vals), scale_for(h), true, 1.0);
}

/// Cobb-Douglas economy with endowments uniform in [0,1]^m and weights
/// uniform in [0.1, 1] before normalisation.
inline ExchangeEconomy random_cobb_douglas_economy(std::mt19937_64& rng, int m, int n, double h = 1.0 / 32,
                                                  double hX = 1.0 / 64) {
  std::uniform_real_distribution<double> U(0, 1), W(0.1, 1);
  ExchangeEconomy econ{m, {}, h, hX};
  for (int i = 0; i < n; ++i) {
    Vec a(m), e(m);
    for (int k = 0; k < m; ++k) a(k) = W(rng);
    for (int k = 0; k < m; ++k) e(k) = U(rng);
    econ.agents.push_back(cobb_douglas(a / a.sum(), e));
  }
  return econ;
}

/// Two goods, endowments (1,1): one price-switch and one non-mixing agent.
inline ExchangeEconomy switch_and_nonmixing(double h = 1.0 / 32, double hX = 1.0 / 64) {
  return ExchangeEconomy{2, {price_switch(make_vec({1, 1})), non_mixing(make_vec({1, 1}))}, h, hX};
}

/// n non-mixing agents with endowment (1,1); each demands all of one good.
inline ExchangeEconomy replicated_nonmixing(int n, double h = 1.0 / 32, double hX = 1.0 / 64) {
  ExchangeEconomy econ{2, {}, h, hX};
  for (int i = 0; i < n; ++i) econ.agents.push_back(non_mixing(make_vec({1, 1})));
  return econ;
}

}  // namespace wsel::instances

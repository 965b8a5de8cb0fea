#include <catch_amalgamated.hpp>

#include "wsel/correspondence.hpp"
#include "wsel/finite_topology.hpp"
#include "wsel/instances.hpp"

#include <random>

using namespace wsel;
using namespace wsel::instances;

namespace {

const double h64 = 1.0 / 64;

// Window oracle for line grids: v is interior to S when some clipped window
// of 2d+1 consecutive lattice sites, centered anywhere in [-d, N+d], holds v
// and lies inside S.
bool window_open(const std::vector<char>& S, int d) {
  const int N = static_cast<int>(S.size()) - 1;
  for (int v = 0; v <= N; ++v) {
    if (!S[static_cast<std::size_t>(v)]) continue;
    bool ok = false;
    for (int k = v - d; k <= v + d && !ok; ++k) {
      if (k < -d || k > N + d) continue;
      bool inside = true;
      for (int w = std::max(0, k - d); w <= std::min(N, k + d); ++w) inside = inside && S[static_cast<std::size_t>(w)];
      ok = inside;
    }
    if (!ok) return false;
  }
  return true;
}

// Interval hull escape of a finite subset of the line.
double interval_escape(const std::vector<Vec>& from, const std::vector<Vec>& into) {
  double lo = 1e300, hi = -1e300, worst = 0;
  for (const auto& p : into) {
    lo = std::min(lo, p(0));
    hi = std::max(hi, p(0));
  }
  for (const auto& p : from) worst = std::max({worst, lo - p(0), p(0) - hi});
  return worst;
}

// Random correspondence on a line grid with values drawn from a small
// sample lattice, piecewise constant on runs so both outcomes occur.
SampledCorrespondence random_line(std::mt19937_64& rng, double h, bool convex, double L = 1.0) {
  auto g = line(0, 1, h);
  std::vector<Vec> Y;
  for (int k = 0; k <= 4; ++k) Y.push_back(scalar(k * 0.25));
  std::uniform_int_distribution<int> run(1, 12), mask(0, 31);
  std::vector<std::vector<int>> vals(g->size());
  std::size_t v = 0;
  while (v < g->size()) {
    int m = mask(rng), len = run(rng);
    std::vector<int> row;
    for (int y = 0; y < 5; ++y)
      if (m >> y & 1) row.push_back(y);
    for (int i = 0; i < len && v < g->size(); ++i, ++v) vals[v] = row;
  }
  return SampledCorrespondence(g, Y, vals, scale_for(h), convex, L);
}

}  // namespace

TEST_CASE("construction validates scale and values") {
  auto g = line(0, 1, 0.25);
  std::vector<Vec> Y{scalar(0)};
  std::vector<std::vector<int>> vals(g->size(), std::vector<int>{0});
  CHECK_NOTHROW(SampledCorrespondence(g, Y, vals, Scale{0.25, 0.5, 0}));
  CHECK_THROWS_AS(SampledCorrespondence(g, Y, vals, Scale{0.25, 0.3, 0}), ParameterError);
  CHECK_THROWS_AS(SampledCorrespondence(g, Y, vals, Scale{0.25, 0.5, -1}), ParameterError);
  CHECK_THROWS_AS(SampledCorrespondence(g, Y, vals, Scale{0.125, 0.5, 0}), ParameterError);
  vals[0] = {3};
  CHECK_THROWS_AS(SampledCorrespondence(g, Y, vals, Scale{0.25, 0.5, 0}), ParameterError);
  CHECK_THROWS_AS(SampledCorrespondence(g, Y, std::vector<std::vector<int>>(2), Scale{0.25, 0.5, 0}),
                  ParameterError);
}

TEST_CASE("open fibers match the window oracle on line grids") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    double h = 1.0 / 32;
    auto P = random_line(rng, h, true);
    for (int k : {2, 3}) {
      auto Q = P.with_scale(Scale{h, k * h, 1e-9});
      bool oracle = true;
      for (int y = 0; y < 5; ++y) oracle = oracle && window_open(Q.fiber(y), k);
      INFO("trial " << trial << " k " << k);
      CHECK(check_open_fibers_at_scale(Q) == oracle);
    }
  }
}

TEST_CASE("usc and lsc match interval oracles") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    double h = 1.0 / 32;
    auto P = random_line(rng, h, true);
    const auto& g = P.grid();
    bool usc = true, lsc = true;
    for (std::size_t v = 0; v < g.size(); ++v)
      for (std::size_t w = 0; w < g.size(); ++w) {
        double d = std::abs(g.point(v)(0) - g.point(w)(0));
        if (w == v || d > P.scale().delta + 1e-12) continue;
        double slack = P.scale().eps + d;
        if (P.nonempty(w) && interval_escape(P.points(w), P.points(v)) > slack) usc = false;
        if (!P.nonempty(v) && P.nonempty(w)) usc = false;
        if (P.nonempty(v) && !P.nonempty(w)) lsc = false;
        if (P.nonempty(v) && P.nonempty(w) && interval_escape(P.points(v), P.points(w)) > slack) lsc = false;
      }
    INFO("trial " << trial);
    CHECK(check_usc_at_scale(P) == usc);
    CHECK(check_lsc_at_scale(P) == lsc);
  }
}

TEST_CASE("constant one with an empty left end") {
  auto P = emptying_constant(h64);
  CHECK(check_open_fibers_at_scale(P));
  CHECK(check_lip_at_scale(P));
  CHECK(check_tarafdar_at_scale(P, CoverScope::support));
  CHECK_FALSE(check_tarafdar_at_scale(P, CoverScope::whole));
  auto cover = extract_tarafdar_cover_at_scale(P);
  REQUIRE(cover.ok());
  CHECK(cover->target.size() == 1);
}

TEST_CASE("identity is usc without open fibers") {
  for (double h : {1.0 / 16, h64}) {
    auto P = identity_map(h);
    CHECK(check_usc_at_scale(P));
    CHECK(check_lsc_at_scale(P));
    for (int k : {2, 4}) CHECK_FALSE(check_open_fibers_at_scale(P.with_scale(Scale{h, k * h, 1e-9})));
  }
}

TEST_CASE("strict upper rays have open fibers") {
  auto Q = strict_upper_rays(h64);
  CHECK(check_open_fibers_at_scale(Q));
  CHECK(check_lip_at_scale(Q));
}

TEST_CASE("sampled hull escape is the same for strict rays and the identity") {
  // Both escape their neighbours' hulls by exactly one mesh step, so no
  // sampled usc transcription can pass one and reject the other.
  auto Q = strict_upper_rays(h64);
  auto P = identity_map(h64);
  auto worst = [](const SampledCorrespondence& F) {
    double w = 0;
    const auto& g = F.grid();
    for (std::size_t v = 0; v < g.size(); ++v)
      for (auto u : g.neighbors(v)) w = std::max(w, interval_escape(F.points(u), F.points(v)));
    return w;
  };
  CHECK(worst(Q) == Catch::Approx(h64).margin(1e-12));
  CHECK(worst(P) == Catch::Approx(h64).margin(1e-12));
}

TEST_CASE("open interval values have the selection property and a closed selection") {
  auto M = open_interval_above(h64);
  CHECK_FALSE(M.nonempty(M.grid().size() - 1));
  CHECK(M.nonempty(M.grid().size() - 2));
  CHECK(check_nsp_at_scale(M));
  auto c = nsp_closed_selection(M);
  CHECK(c.pass);
  CHECK(c.closed);
  auto mid = midpoint_selection(M);
  for (std::size_t v = 0; v + 1 < mid.size(); ++v) CHECK(mid[v].size() == 1);
  auto cm = certify_closed_selection(M, mid);
  CHECK(cm.pass);
  auto j = to_json(c);
  CHECK(j["kind"] == "closed-selection");
  CHECK(j["pass"] == true);
  CHECK(j.contains("residual"));
  CHECK(j.contains("scale"));
}

TEST_CASE("a selection that leaves the values is rejected") {
  auto M = open_interval_above(h64);
  auto rows = midpoint_selection(M);
  rows[3] = {M.values(10).front()};
  if (!M.contains(3, rows[3][0])) CHECK_FALSE(certify_closed_selection(M, rows).pass);
  rows = midpoint_selection(M);
  rows[5].clear();
  CHECK_FALSE(certify_closed_selection(M, rows).pass);
}

TEST_CASE("parity indicator has no selection property at any rung") {
  auto M = parity_indicator(h64);
  for (int k : {2, 4, 8})
    for (double e : {1e-9, 1e-6, 1e-3}) {
      Ladder one{{k}, {e}};
      CHECK_FALSE(check_nsp_at_scale(M, one));
    }
  CHECK_FALSE(check_nsp_at_scale(M));
  CHECK_THROWS_AS(nsp_closed_selection(M), SelectionPrecondition);
  CHECK_FALSE(check_continuous_inclusion_at_scale(M));
  for (std::size_t v = 0; v < M.grid().size(); v += 7) CHECK(detect_jump(M, v));
}

TEST_CASE("closed sampled correspondences select themselves") {
  auto M = identity_map(h64);
  CHECK(check_closed_at_scale(M));
  CHECK(check_nsp_at_scale(M));
  auto c = nsp_closed_selection(M);
  CHECK(c.pass);
  CHECK(c.selection == M.all_values());
  // the graph of {1} on (0,1] accumulates at (0, 1), but it is closed
  // relative to its own support
  auto E = emptying_constant(h64);
  CHECK_FALSE(check_closed_at_scale(E));
  auto c2 = nsp_closed_selection(E);
  CHECK(c2.pass);
  CHECK(c2.selection == E.all_values());
}

TEST_CASE("jumps of a share and not of the aggregate") {
  const double k = 1.0;
  const int n = 4;
  auto F = jump_share(h64, k, n);
  auto at_one = F.grid().find(IVec{64});
  REQUIRE(at_one);
  CHECK(detect_jump(F, *at_one));
  CHECK_FALSE(detect_jump(F, 0));
  CHECK_FALSE(detect_jump(F, *at_one - 20));
  auto A = jump_aggregate(h64, k, n);
  CHECK_FALSE(detect_jump(A, *at_one));
  auto C = sample_correspondence(line(0, 2, h64), [](const Vec&) { return std::vector<Vec>{scalar(0.3)}; },
                                 scale_for(h64));
  for (std::size_t v = 0; v < C.grid().size(); v += 9) CHECK_FALSE(detect_jump(C, v));
}

TEST_CASE("upper demicontinuity") {
  auto g = std::make_shared<const SimplicialGrid>(SimplicialGrid::box(1, 0, 1, 1.0 / 16));
  const std::vector<Vec> axes{make_vec({1, 0}), make_vec({0, 1}), make_vec({-1, 0}), make_vec({0, -1})};
  auto P = sample_correspondence(
      g,
      [](const Vec& x) {
        std::vector<Vec> t{make_vec({0, 0}), make_vec({1, 0}), make_vec({0, 1})};
        if (x(0) > 0.5) t.push_back(make_vec({1, 1}));
        return t;
      },
      scale_for(1.0 / 16));
  CHECK(check_upper_demicontinuous(P, axes));
  CHECK_FALSE(check_usc_at_scale(P));
  CHECK_FALSE(check_upper_demicontinuous(P, {make_vec({1, 1})}));
  auto K = sample_correspondence(g, [](const Vec&) { return std::vector<Vec>{make_vec({0.2, 0.4})}; },
                                 scale_for(1.0 / 16));
  CHECK(check_upper_demicontinuous(K, axes));
  CHECK_THROWS_AS(check_upper_demicontinuous(K, {}), ParameterError);
}

TEST_CASE("implication chain on random line instances") {
  std::mt19937_64 rng(13);
  int open_graph = 0, closed = 0;
  for (int trial = 0; trial < 300; ++trial) {
    auto P = random_line(rng, 1.0 / 32, trial % 2 == 0);
    if (trial % 3 == 0) P = P.with_values(std::vector<std::vector<int>>(P.grid().size(), P.values(0)));
    INFO("trial " << trial);
    bool og = check_open_graph_at_scale(P), of = check_open_fibers_at_scale(P), lip = check_lip_at_scale(P);
    if (og) CHECK(of);
    if (of) CHECK(lip);
    if (lip) CHECK(check_tarafdar_at_scale(P));
    if (check_usc_at_scale(P)) CHECK(check_upper_demicontinuous(P, {scalar(1), scalar(-1)}));
    if (check_closed_at_scale(P)) {
      Ladder same{{2}, {P.scale().eps}};
      CHECK(check_nsp_at_scale(P, same));
      ++closed;
    }
    open_graph += og;
  }
  CHECK(open_graph > 0);
  CHECK(closed > 0);
}

TEST_CASE("tolerance checkers are monotone in eps") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 150; ++trial) {
    auto P = random_line(rng, 1.0 / 32, true, 0.0);
    for (double e : {0.0, 1e-9, 0.1}) {
      auto a = P.with_scale(Scale{P.scale().h, P.scale().delta, e});
      auto b = P.with_scale(Scale{P.scale().h, P.scale().delta, 2 * e + 0.2});
      if (check_usc_at_scale(a)) CHECK(check_usc_at_scale(b));
      if (check_lsc_at_scale(a)) CHECK(check_lsc_at_scale(b));
      if (check_upper_demicontinuous(a, {scalar(1), scalar(-1)}))
        CHECK(check_upper_demicontinuous(b, {scalar(1), scalar(-1)}));
    }
  }
}

TEST_CASE("continuous selector construction") {
  SECTION("constant value") {
    auto P = sample_correspondence(line(0, 1, h64),
                                   [](const Vec&) { return std::vector<Vec>{scalar(0.25), scalar(0.75)}; },
                                   scale_for(h64));
    auto c = yp_continuous_selection(P);
    CHECK(c.pass);
    CHECK(c.residual <= 1e-12);
    for (const auto& f : c.selector) CHECK(f(0) == Catch::Approx(0.5));
  }
  SECTION("values above half the argument") {
    auto g = line(0, 1, h64);
    auto P = sample_correspondence(
        g,
        [&](const Vec& x) {
          std::vector<Vec> out;
          for (int k = 0; k <= 64; ++k)
            if (k * h64 > x(0) / 2 + 1e-12) out.push_back(scalar(k * h64));
          return out;
        },
        scale_for(h64));
    REQUIRE(check_open_fibers_at_scale(P));
    auto c = yp_continuous_selection(P);
    CHECK(c.pass);
    CHECK(c.residual <= 1e-9);
    CHECK(c.modulus <= c.modulus_budget);
    for (std::size_t v = 0; v < g->size(); ++v) CHECK(c.selector[v](0) > g->point(v)(0) / 2);
    auto j = to_json(c);
    CHECK(j["kind"] == "continuous-selector");
    CHECK(j["pass"] == true);
  }
  SECTION("two islands read as a hull") {
    auto P = sample_correspondence(
        line(0, 1, h64),
        [](const Vec& x) {
          std::vector<Vec> out{scalar(0), scalar(1)};
          if (x(0) > 0.5) out.push_back(scalar(0.5));
          return out;
        },
        scale_for(h64));
    auto c = yp_continuous_selection(P);
    CHECK_FALSE(c.pass);
    CHECK(c.residual >= 0.25);
    REQUIRE(c.worst_vertex);
    CHECK(P.grid().point(*c.worst_vertex)(0) <= 0.5);
  }
  SECTION("preconditions") {
    CHECK_THROWS_AS(yp_continuous_selection(emptying_constant(h64)), SelectionPrecondition);
    CHECK_THROWS_AS(yp_continuous_selection(identity_map(h64)), SelectionPrecondition);
    CHECK_THROWS_AS(yp_continuous_selection(jump_share(h64, 1, 2)), SelectionPrecondition);
  }
}

TEST_CASE("continuous selectors on random open-fiber correspondences") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 60; ++trial) {
    int m = 2 + trial % 2;
    auto P = random_open_fiber(m, 1.0 / 32, rng);
    REQUIRE(check_open_fibers_at_scale(P));
    auto c = yp_continuous_selection(P);
    INFO("trial " << trial << " residual " << c.residual << " modulus " << c.modulus);
    CHECK(c.residual <= 1e-9);
    CHECK(c.modulus <= 2.0 * (1.0 / 32) / P.scale().delta);
    CHECK(c.pass);
  }
}

TEST_CASE("continuous inclusion") {
  CHECK(check_continuous_inclusion_at_scale(strict_upper_rays(h64)));
  CHECK(check_continuous_inclusion_at_scale(identity_map(h64)));
  CHECK(check_continuous_inclusion_at_scale(emptying_constant(h64)));
  CHECK_FALSE(check_continuous_inclusion_at_scale(parity_indicator(h64)));
  CHECK_THROWS_AS(check_continuous_inclusion_at_scale(jump_share(h64, 1, 2)), ParameterError);
}

TEST_CASE("ball topology and the finite checkers agree on an edge block") {
  // On the 3-simplex grid the edge {x3 = 0} is not open at scale while its
  // complement is, which is the two-point space with one open point.
  const double h = 1.0 / 8;
  auto g = std::make_shared<const SimplicialGrid>(build_grid(3, h));
  std::vector<char> edge(g->size(), 0), rest(g->size(), 0);
  for (std::size_t v = 0; v < g->size(); ++v) (g->index(v)[2] == 0 ? edge : rest)[v] = 1;
  BallSystem balls(*g, 2 * h);
  REQUIRE(balls.is_open(rest));
  REQUIRE_FALSE(balls.is_open(edge));
  auto dom = finite::share(finite::FiniteTopoSpace({"edge", "rest"}, {0b00, 0b10, 0b11}));
  auto cod = finite::share(finite::FiniteTopoSpace::discrete(2));
  const std::vector<Vec> Y{scalar(0), scalar(1)};
  int compared = 0;
  for (finite::Mask a = 0; a < 4; ++a)
    for (finite::Mask b = 0; b < 4; ++b) {
      finite::FiniteCorrespondence F(dom, cod, {a, b});
      std::vector<std::vector<int>> vals(g->size());
      for (std::size_t v = 0; v < g->size(); ++v) {
        finite::Mask m = edge[v] ? a : b;
        for (int y = 0; y < 2; ++y)
          if (m >> y & 1) vals[v].push_back(y);
      }
      SampledCorrespondence P(g, Y, vals, Scale{h, 2 * h, 1e-9});
      INFO("edge " << a << " rest " << b);
      CHECK(check_open_fibers_at_scale(P) == finite::is_open_fibers(F));
      CHECK(check_lip_at_scale(P) == finite::has_local_intersection_property(F));
      CHECK(check_open_graph_at_scale(P) == finite::is_open_graph(F));
      CHECK(check_tarafdar_at_scale(P, CoverScope::support) ==
            finite::is_tarafdar_continuous(F, finite::TarafdarVariant::support));
      CHECK(check_tarafdar_at_scale(P, CoverScope::whole) ==
            finite::is_tarafdar_continuous(F, finite::TarafdarVariant::whole));
      ++compared;
    }
  CHECK(compared >= 10);
}

TEST_CASE("correspondence json lists values per vertex") {
  auto P = emptying_constant(0.25);
  auto j = to_json(P);
  CHECK(j["grid"]["kind"] == "box");
  CHECK(j["values"].size() == 5);
  CHECK(j["values"][0].empty());
  CHECK(j["values"][1][0][0] == 1.0);
}

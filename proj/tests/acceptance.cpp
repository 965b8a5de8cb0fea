// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails; failing instances are written as JSON under
// WSEL_COUNTEREXAMPLE_DIR.

#include "wsel/correspondence.hpp"
#include "wsel/finite_topology.hpp"
#include "wsel/fixed_point.hpp"
#include "wsel/instances.hpp"
#include "wsel/json_io.hpp"
#include "wsel/walras.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace wsel;
using namespace wsel::instances;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void line(int id, bool ok, const std::string& what, const std::string& detail, double secs) {
  char t[32];
  std::snprintf(t, sizeof t, "%.1fs", secs);
  std::cout << (ok ? "PASS" : "FAIL") << "  " << id << "  " << what << ": " << detail << " (" << t << ")"
            << std::endl;
  if (!ok) ++failures;
}

void counterexample(const std::string& name, const json& j) {
  fs::create_directories(WSEL_COUNTEREXAMPLE_DIR);
  std::ofstream(fs::path(WSEL_COUNTEREXAMPLE_DIR) / name) << j.dump(2) << "\n";
}

std::string b(bool v) { return v ? "true" : "false"; }

std::string num(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

void tarafdar_equivalence() {
  Timer t;
  auto r = finite::sweep({3, 3, false}, finite::check_tarafdar_equivalence);
  if (r.mismatches) counterexample("c1_tarafdar.json", {{"detail", r.first_detail}, {"instance", finite::to_json(*r.first_mismatch)}});
  const double s = t.seconds();
  line(1, r.mismatches == 0 && s < 120, "Tarafdar continuity == local intersection property",
       "instances=" + std::to_string(r.instances) + " mismatches=" + std::to_string(r.mismatches), s);
}

void selection_equivalence() {
  Timer t;
  auto r = finite::sweep({3, 3, false}, finite::check_selection_equivalence);
  if (r.mismatches)
    counterexample("c2_selection.json", {{"detail", r.first_detail}, {"instance", finite::to_json(*r.first_mismatch)}});
  const double s = t.seconds();
  line(2, r.mismatches == 0 && s < 600, "nsp == observation construction == closed local selections",
       "instances=" + std::to_string(r.instances) + " mismatches=" + std::to_string(r.mismatches) +
           (r.mismatches ? " first: " + r.first_detail : ""),
       s);
}

void gluing() {
  Timer t;
  auto r = finite::sweep({3, 3, false}, finite::check_gluing);
  if (r.mismatches) counterexample("c3_gluing.json", {{"detail", r.first_detail}, {"instance", finite::to_json(*r.first_mismatch)}});
  line(3, r.mismatches == 0, "global selection glued from local ones on a discrete support",
       "instances=" + std::to_string(r.instances) + " failures=" + std::to_string(r.mismatches), t.seconds());
}

void sampled_counterexamples() {
  Timer t;
  const double h = 1.0 / 64;
  struct Item {
    std::string name;
    std::string check;
    bool got;
    bool want;
    SampledCorrespondence P;
  };
  std::vector<Item> items;
  auto E = emptying_constant(h);
  items.push_back({"constant one, empty at 0", "openFibers", check_open_fibers_at_scale(E), true, E});
  items.push_back({"constant one, empty at 0", "strengthenedTarafdar", check_tarafdar_at_scale(E, CoverScope::whole), false, E});
  auto I = identity_map(h);
  items.push_back({"identity", "usc", check_usc_at_scale(I), true, I});
  items.push_back({"identity", "openFibers", check_open_fibers_at_scale(I), false, I});
  auto Q = strict_upper_rays(h);
  items.push_back({"strict upper rays", "openFibers", check_open_fibers_at_scale(Q), true, Q});
  items.push_back({"strict upper rays", "usc", check_usc_at_scale(Q), false, Q});
  auto M = open_interval_above(h);
  bool cert = false;
  try {
    cert = nsp_closed_selection(M).pass;
  } catch (const PreconditionError&) {
  }
  items.push_back({"open interval values", "nsp", check_nsp_at_scale(M), true, M});
  items.push_back({"open interval values", "closedSelection", cert, true, M});
  auto R = parity_indicator(h);
  items.push_back({"parity indicator", "nsp", check_nsp_at_scale(R), false, R});
  int ok = 0;
  std::string bad;
  for (const auto& it : items) {
    if (it.got == it.want) {
      ++ok;
      continue;
    }
    bad += " [" + it.name + " " + it.check + "=" + b(it.got) + ", expected " + b(it.want) + "]";
    json j = to_json(it.P);
    j["check"] = it.check;
    j["expected"] = it.want;
    j["got"] = it.got;
    counterexample("c4_" + it.check + ".json", j);
  }
  line(4, ok == static_cast<int>(items.size()), "sampled counterexamples at h=1/64, delta=2h",
       std::to_string(ok) + "/" + std::to_string(items.size()) + " booleans match" + bad, t.seconds());
}

void yp_selection() {
  Timer t;
  const double h = 1.0 / 32;
  std::mt19937_64 rng(2024);
  int pass = 0, total = 0, skipped = 0;
  double worst_res = 0, worst_mod_ratio = 0;
  for (int i = 0; i < 1000; ++i) {
    const int m = 2 + i % 2;
    auto P = random_open_fiber(m, h, rng);
    if (!check_open_fibers_at_scale(P)) {
      ++skipped;
      continue;
    }
    ++total;
    auto c = yp_continuous_selection(P);
    const double budget = 2.0 * h / P.scale().delta;  // l1 diameter of the simplex is 2
    worst_res = std::max(worst_res, c.residual);
    worst_mod_ratio = std::max(worst_mod_ratio, c.modulus / budget);
    if (c.pass && c.residual <= 1e-9 && c.modulus <= budget) ++pass;
  }
  line(5, pass == total && skipped == 0, "continuous selectors on random open-fiber correspondences",
       std::to_string(pass) + "/" + std::to_string(total) + " pass, max residual=" + num(worst_res) +
           ", max modulus/budget=" + num(worst_mod_ratio),
       t.seconds());
}

void fixed_point_routes() {
  Timer t;
  const Route routes[] = {Route::browder, Route::tarafdar, Route::he_yannelis, Route::kakutani};
  auto cases = browder_specs(21, 20);
  int ok_bound = 0, ok_halving = 0, checks = 0, halvings = 0, pre = 0;
  std::string first_bad;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    double prev[4] = {0, 0, 0, 0};
    for (double h : {1.0 / 16, 1.0 / 32}) {
      auto P = open_ball_around(c.m, h, c.f, c.r, c.L);
      bool nonempty = true;
      for (std::size_t v = 0; v < P.grid().size(); ++v) nonempty = nonempty && P.nonempty(v);
      if (nonempty && check_open_fibers_at_scale(P)) ++pre;
      const double bound = c.m * (c.L * h + h);
      for (int k = 0; k < 4; ++k) {
        auto r = solve_fixed_point(P, routes[k]);
        ++checks;
        if (r.residual <= bound) ++ok_bound;
        else if (first_bad.empty())
          first_bad = " first: case " + std::to_string(i) + " route " + route_name(routes[k]) + " residual " + num(r.residual);
        if (h < 1.0 / 16) {
          ++halvings;
          if (r.residual <= prev[k] + 2 * c.L * (2 * h)) ++ok_halving;
        }
        prev[k] = r.residual;
      }
    }
  }
  line(6, ok_bound == checks && ok_halving == halvings && pre == 40, "fixed-point routes on open-fiber balls",
       "preconditions " + std::to_string(pre) + "/40, residual bound " + std::to_string(ok_bound) + "/" +
           std::to_string(checks) + ", halving " + std::to_string(ok_halving) + "/" + std::to_string(halvings) +
           first_bad,
       t.seconds());
}

void gnd() {
  Timer t;
  const double h = 1.0 / 128;
  auto r = gnd_solve(direct_excess_demand(2, [](const Vec& p) { return std::vector<Vec>{make_vec({p(1) - p(0), p(0) - p(1)})}; }), h);
  const double dist = l1(r.price, make_vec({0.5, 0.5}));
  bool ok = r.residual <= 1e-3 && dist <= 2 * h;
  std::string econ_detail;
  int econ_ok = 0, econ_total = 0;
  for (int N : {4, 6, 8, 10, 16, 32}) {
    ++econ_total;
    const double hh = 1.0 / N;
    auto e = gnd_solve(economy_excess_demand(switch_and_nonmixing(hh, hh / 2)), hh);
    if (e.residual == 0.0 && e.price(0) == 0.5 && e.price(1) == 0.5) ++econ_ok;
    else econ_detail += " [1/" + std::to_string(N) + ": residual " + num(e.residual) + "]";
  }
  ok = ok && econ_ok == econ_total;
  line(7, ok, "price search",
       "linear map residual=" + num(r.residual) + " |p*-(.5,.5)|_1=" + num(dist) + "; two-agent economy exact on " +
           std::to_string(econ_ok) + "/" + std::to_string(econ_total) + " grids" + econ_detail,
       t.seconds());
}

void wcfb() {
  Timer t;
  const double h = 1.0 / 16;
  int red = 0, literal = 0, n = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    const int m = 2 + static_cast<int>(seed % 2);
    Eigen::MatrixXd A(m, m);
    Vec bvec(m);
    for (int i = 0; i < m; ++i) {
      bvec(i) = U(rng);
      for (int j = 0; j < m; ++j) A(i, j) = U(rng);
    }
    const bool jump = seed % 4 == 3;
    auto f = [=](const Vec& p) {
      Vec z = A * p + bvec;
      if (jump) {
        z(0) = 1;
        if (p(0) >= 0.5) z(1) -= 1;
      }
      return std::vector<Vec>{z};
    };
    auto Z = sample_excess(direct_excess_demand(m, f), simplex_grid(m, h), scale_for(h), 2 * A.cwiseAbs().maxCoeff());
    if (!check_wcfb(Z)) continue;
    ++n;
    auto r = verify_wcfb_implies_cip(Z);
    red += r.red_flag;
    literal += !r.cip;
    if (r.red_flag) counterexample("c8_seed" + std::to_string(seed) + ".json", to_json(Z));
  }
  line(8, red == 0 && n == 20, "weak continuity from below gives the inclusion property",
       std::to_string(n) + " instances, red flags=" + std::to_string(red) +
           ", literal inclusion failures on the support edge=" + std::to_string(literal),
       t.seconds());
}

void single_valued_demand() {
  Timer t;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0, 1);
  int econs = 0, ok = 0;
  double worst = 0;
  std::string bad;
  for (int i = 0; i < 10; ++i) {
    const double h = 1.0 / 32, hX = 1.0 / 64;
    ExchangeEconomy econ{2, {}, h, hX};
    const int n = 1 + i % 4;
    for (int a = 0; a < n; ++a) econ.agents.push_back(cobb_douglas(make_vec({0.5, 0.5}), make_vec({U(rng), U(rng)})));
    ++econs;
    auto r = shafer_demand(econ);
    bool good = r.singleton && r.inclusion;
    const auto g = build_price_grid(2, h);
    for (std::size_t v = 0; v < g.size(); ++v) {
      const Vec p = g.point(v);
      for (int a = 0; a < n; ++a) {
        const double w = p.dot(econ.agents[static_cast<std::size_t>(a)].endowment);
        for (int k = 0; k < 2; ++k) {
          const double gap = std::abs(r.demand[static_cast<std::size_t>(a)][v](k) - w / (2 * p(k)));
          worst = std::max(worst, gap);
          good = good && gap <= hX;
        }
      }
    }
    ok += good;
  }
  // general weights and goods: demanded shares within hX of the weights
  for (int i = 0; i < 6; ++i) {
    const int m = 2 + i % 3;
    auto econ = random_cobb_douglas_economy(rng, m, 2, 1.0 / 16, 1.0 / 32);
    ++econs;
    auto r = shafer_demand(econ);
    if (r.singleton && r.closed_form_gap <= econ.hX + 1e-12) ++ok;
  }
  bool rejected = false;
  try {
    shafer_demand(ExchangeEconomy{2, {non_mixing(make_vec({1, 1}))}, 1.0 / 32, 1.0 / 64});
  } catch (const PreconditionError& e) {
    rejected = std::string(e.what()).find("strong convexity") != std::string::npos;
  }
  line(9, ok == econs && rejected, "single-valued demand under strong convexity",
       std::to_string(ok) + "/" + std::to_string(econs) + " Cobb-Douglas economies singleton and on the closed form (max gap " +
           num(worst) + "), non-mixing agent rejected=" + b(rejected),
       t.seconds());
}

void approximate_equilibrium() {
  Timer t;
  std::mt19937_64 rng(500);
  int pass = 0, total = 0;
  double worst_ratio = 0;
  std::string first_bad;
  for (int i = 0; i < 500; ++i) {
    const int m = 2 + i % 3;
    std::uniform_int_distribution<int> N(m, 50);
    auto econ = random_cobb_douglas_economy(rng, m, N(rng));
    auto r = akr_approx_equilibrium(econ);
    ++total;
    if (r.lhs <= r.bound) ++pass;
    else if (first_bad.empty()) {
      first_bad = " first failure: economy " + std::to_string(i);
      json j = to_json(r);
      j["goods"] = m;
      j["agents"] = econ.n();
      counterexample("c10_economy.json", j);
    }
    if (r.bound > 0) worst_ratio = std::max(worst_ratio, r.lhs / r.bound);
  }
  std::string rep;
  for (int n : {4, 16, 64}) {
    auto r = akr_approx_equilibrium(replicated_nonmixing(n));
    ++total;
    if (r.lhs <= r.bound) ++pass;
    rep += " n=" + std::to_string(n) + ":" + num(r.lhs) + "<=" + num(r.bound);
  }
  int eq = 0, cmp = 0;
  double max_diff = 0;
  std::mt19937_64 erng(12);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 5; ++trial)
    for (int n = 1; n <= 12; ++n) {
      const int m = 2 + (trial + n) % 3;
      std::vector<Vec> e;
      for (int i = 0; i < n; ++i) {
        Vec x(m);
        for (int k = 0; k < m; ++k) x(k) = U(erng);
        e.push_back(x);
      }
      for (int k = 1; k <= n; ++k) {
        const double g = e_stat_greedy(e, static_cast<std::size_t>(k)), x = e_stat_exhaustive(e, static_cast<std::size_t>(k));
        ++cmp;
        max_diff = std::max(max_diff, std::abs(g - x));
        if (std::abs(g - x) <= 1e-12 * std::max(1.0, std::abs(x))) ++eq;
      }
    }
  const double s = t.seconds();
  line(10, pass == total && eq == cmp && s < 900, "approximate equilibrium bound",
       std::to_string(pass) + "/" + std::to_string(total) + " economies within the bound (max lhs/bound " +
           num(worst_ratio) + ");" + rep + "; greedy == exhaustive " + std::to_string(eq) + "/" + std::to_string(cmp) +
           " (max diff " + num(max_diff) + ")" + first_bad,
       s);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WSEL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void determinism() {
  Timer t;
  const char* names[] = {"topo_tarafdar",  "check_open_interval", "select_yp_random", "fixpoint_browder",
                         "berge_quadratic", "gnd_refinement",      "akr_random",       "shafer_cobb_douglas",
                         "aggregate_jump_shares"};
  const fs::path base = fs::temp_directory_path() / ("wsel_acceptance_" + std::to_string(::getpid()));
  int same = 0, total = 0;
  std::string bad;
  for (const char* n : names) {
    ++total;
    const fs::path a = base / n / "a", b2 = base / n / "b";
    fs::remove_all(a);
    fs::remove_all(b2);
    const std::string sc = "--scenario " + (fs::path(WSEL_SCENARIO_DIR) / (std::string(n) + ".json")).string();
    const int ca = run_cli(sc + " --out " + a.string() + " --trace");
    const int cb = run_cli(sc + " --out " + b2.string() + " --trace");
    bool eq = ca == cb && ca != 2 && ca != 3 && fs::exists(a / "report.json");
    if (eq)
      for (const auto& e : fs::directory_iterator(a)) eq = eq && slurp(e.path()) == slurp(b2 / e.path().filename());
    if (eq) ++same;
    else bad += std::string(" ") + n;
  }
  fs::remove_all(base);
  line(11, same == total, "byte-identical reruns for every verb",
       std::to_string(same) + "/" + std::to_string(total) + " verbs" + (bad.empty() ? "" : ", differ:" + bad), t.seconds());
}

}  // namespace

int main() {
  tarafdar_equivalence();
  selection_equivalence();
  gluing();
  sampled_counterexamples();
  yp_selection();
  fixed_point_routes();
  gnd();
  wcfb();
  single_valued_demand();
  approximate_equilibrium();
  determinism();
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failures ? 1 : 0;
}

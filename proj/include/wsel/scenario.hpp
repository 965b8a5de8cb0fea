#pragma once

// Scenario files for the batch front end: schema validation, dispatch to the
// owning module, and report assembly. Everything here is deterministic for a
// fixed (scenario, seed, scale); the tool adds the input digest and writes
// the files.

#include "wsel/berge.hpp"
#include "wsel/correspondence.hpp"
#include "wsel/finite_topology.hpp"
#include "wsel/fixed_point.hpp"
#include "wsel/instances.hpp"
#include "wsel/json_io.hpp"
#include "wsel/plot.hpp"
#include "wsel/walras.hpp"

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wsel::cli {

inline const std::vector<std::string>& verbs() {
  static const std::vector<std::string> v{"topo-sweep", "check", "select", "fixpoint", "berge",
                                          "gnd",        "akr",   "shafer", "aggregate"};
  return v;
}

/// Command-line values that take precedence over the scenario file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> h, delta, eps;
  bool trace = false;
};

struct RunResult {
  json outcome = json::object();
  bool pass = false;
  std::string csv;
  std::optional<plot::Figure> figure;
  std::string trace;
};

/// Seed and scale as resolved from flags, the scenario and verb defaults.
class Context {
 public:
  std::uint64_t seed = 0;
  bool trace = false;

  Context() = default;
  Context(const json& scenario, const Overrides& o) : trace(o.trace) {
    seed = 0;
    if (scenario.contains("seed")) {
      const json& s = scenario["seed"];
      if (!s.is_number_integer() || s.get<long long>() < 0) throw SchemaError("/seed", "expected a nonnegative integer");
      seed = s.get<std::uint64_t>();
    }
    if (o.seed) seed = *o.seed;
    if (scenario.contains("scale")) {
      const json& sc = scenario["scale"];
      if (!sc.is_object()) throw SchemaError("/scale", "expected an object");
      for (auto it = sc.begin(); it != sc.end(); ++it)
        if (it.key() != "h" && it.key() != "delta" && it.key() != "eps")
          throw SchemaError("/scale/" + it.key(), "unknown field");
      if (sc.contains("h")) h_ = positive(sc["h"], "/scale/h");
      if (sc.contains("delta")) delta_ = positive(sc["delta"], "/scale/delta");
      if (sc.contains("eps")) {
        eps_ = number_at(sc["eps"], "/scale/eps");
        if (*eps_ < 0) throw SchemaError("/scale/eps", "expected a nonnegative number");
      }
    }
    if (o.h) h_ = positive(*o.h, "--mesh");
    if (o.delta) delta_ = positive(*o.delta, "--delta");
    if (o.eps) {
      if (*o.eps < 0) throw SchemaError("--eps", "expected a nonnegative number");
      eps_ = *o.eps;
    }
  }

  bool mesh_given() const { return h_.has_value(); }

  /// Fixes the scale, using default_h when no mesh was given.
  Scale resolve(double default_h, const std::string& where = "/scale/h") {
    Scale s;
    s.h = h_.value_or(default_h);
    const double inv = 1 / s.h;
    if (s.h > 1 || std::abs(inv - std::round(inv)) > 1e-9) throw SchemaError(where, "1/h must be an integer");
    s.delta = delta_.value_or(2 * s.h);
    if (s.delta < 2 * s.h - 1e-12) throw SchemaError("/scale/delta", "delta must be at least 2h");
    s.eps = eps_.value_or(1e-9);
    resolved = s;
    return s;
  }

  std::optional<Scale> resolved;

 private:
  static double positive(const json& j, const std::string& path) {
    double v = number_at(j, path);
    if (!(v > 0)) throw SchemaError(path, "expected a positive number");
    return v;
  }
  static double positive(double v, const std::string& path) {
    if (!(v > 0)) throw SchemaError(path, "expected a positive number");
    return v;
  }
  std::optional<double> h_, delta_, eps_;
};

using Job = std::function<RunResult()>;

struct Prepared {
  std::string verb;
  Context ctx;
  Job job;
};

// ---------------------------------------------------------------------------
// Field helpers

namespace detail {

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw SchemaError(path + "/" + it.key(), "unknown field");
  }
}

inline double opt_number(const json& j, const std::string& path, const char* key, double fallback) {
  return j.contains(key) ? number_at(j[key], path + "/" + key) : fallback;
}

inline long long int_at(const json& j, const std::string& path, long long lo, long long hi) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  long long v = j.get<long long>();
  if (v < lo || v > hi) throw SchemaError(path, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

inline long long opt_int(const json& j, const std::string& path, const char* key, long long fallback, long long lo,
                         long long hi) {
  return j.contains(key) ? int_at(j[key], path + "/" + key, lo, hi) : fallback;
}

inline bool opt_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw SchemaError(path + "/" + key, "expected a boolean");
  return j[key].get<bool>();
}

inline std::string opt_string(const json& j, const std::string& path, const char* key, const std::string& fallback) {
  return j.contains(key) ? string_at(j[key], path + "/" + key) : fallback;
}

inline std::string one_of(const json& j, const std::string& path, const std::vector<std::string>& options) {
  std::string s = string_at(j, path);
  if (std::find(options.begin(), options.end(), s) == options.end()) {
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    throw SchemaError(path, "expected one of " + list + "; got '" + s + "'");
  }
  return s;
}

inline Vec vec_at(const json& j, const std::string& path, long long dim = -1) {
  array_at(j, path);
  if (j.empty()) throw SchemaError(path, "expected a nonempty array");
  if (dim >= 0 && static_cast<long long>(j.size()) != dim)
    throw SchemaError(path, "expected " + std::to_string(dim) + " entries");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = number_at(j[k], path + "/" + std::to_string(k));
  return v;
}

inline std::vector<double> numbers_at(const json& j, const std::string& path) {
  array_at(j, path);
  if (j.empty()) throw SchemaError(path, "expected a nonempty array");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(number_at(j[k], path + "/" + std::to_string(k)));
  return out;
}

inline json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

/// Runs a constructor, reporting its argument errors at path.
template <class F>
auto at_path(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const SchemaError&) {
    throw;
  } catch (const ParameterError& e) {
    throw SchemaError(path, e.what());
  }
}

inline std::vector<std::string> names_at(const json& j, const std::string& path, const std::vector<std::string>& allowed) {
  array_at(j, path);
  std::vector<std::string> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(one_of(j[k], path + "/" + std::to_string(k), allowed));
  return out;
}

/// expect: {check: bool}; every key must be a known check.
inline std::map<std::string, bool> expectations(const json& payload, const std::string& path,
                                                const std::vector<std::string>& allowed) {
  std::map<std::string, bool> out;
  if (!payload.contains("expect")) return out;
  const json& e = payload["expect"];
  const std::string p = path + "/expect";
  if (!e.is_object()) throw SchemaError(p, "expected an object");
  for (auto it = e.begin(); it != e.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw SchemaError(p + "/" + it.key(), "unknown check");
    if (!it.value().is_boolean()) throw SchemaError(p + "/" + it.key(), "expected a boolean");
    out[it.key()] = it.value().get<bool>();
  }
  return out;
}

/// Compares outcome["checks"] against the expectations; pass is false on
/// any difference and the differing names are listed.
inline bool apply_expectations(json& outcome, const std::map<std::string, bool>& expect) {
  json diff = json::array();
  for (const auto& [k, v] : expect)
    if (!outcome["checks"].contains(k) || outcome["checks"][k].get<bool>() != v) diff.push_back(k);
  if (!expect.empty()) outcome["unexpected"] = diff;
  return diff.empty();
}

inline std::vector<std::string> merged(std::vector<std::string> checks, const std::map<std::string, bool>& expect) {
  for (const auto& [k, v] : expect)
    if (std::find(checks.begin(), checks.end(), k) == checks.end()) checks.push_back(k);
  return checks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sampled correspondences

inline const std::vector<std::string>& sampled_names() {
  static const std::vector<std::string> v{"emptying-constant", "identity",         "strict-upper-rays",
                                          "open-interval-above", "parity",         "usc-step",
                                          "jump-share",        "jump-aggregate",   "simplex-identity",
                                          "plateau-identity",  "random-open-fiber", "browder-ball",
                                          "constant-ball"};
  return v;
}

inline GridPtr grid_from_json(const json& j, const std::string& path) {
  detail::allow_keys(j, path, {"kind", "dim", "mesh", "lo", "hi"});
  const std::string kind = detail::one_of(field(j, path, "kind"), path + "/kind", {"simplex", "box"});
  const int dim = static_cast<int>(detail::int_at(field(j, path, "dim"), path + "/dim", 1, 8));
  const double mesh = number_at(field(j, path, "mesh"), path + "/mesh");
  return detail::at_path(path, [&] {
    if (kind == "simplex") return std::make_shared<const SimplicialGrid>(SimplicialGrid::simplex(dim, mesh));
    const double lo = detail::opt_number(j, path, "lo", 0), hi = detail::opt_number(j, path, "hi", 1);
    return std::make_shared<const SimplicialGrid>(SimplicialGrid::box(dim, lo, hi, mesh));
  });
}

/// Named instance or explicit {grid, values, convex, lipschitz}, the latter
/// in the layout written by to_json.
inline SampledCorrespondence sampled_from_json(const json& j, const std::string& path, Context& ctx,
                                               double default_h = 1.0 / 64) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  if (j.contains("named")) {
    detail::allow_keys(j, path, {"named", "goods", "agents", "k", "index", "center", "radius", "lipschitz"});
    const std::string name = detail::one_of(j["named"], path + "/named", sampled_names());
    const Scale s = ctx.resolve(default_h);
    const double h = s.h;
    const int m = static_cast<int>(detail::opt_int(j, path, "goods", 2, 1, 4));
    auto build = [&]() -> SampledCorrespondence {
      using namespace instances;
      if (name == "emptying-constant") return emptying_constant(h);
      if (name == "identity") return identity_map(h);
      if (name == "strict-upper-rays") return strict_upper_rays(h);
      if (name == "open-interval-above") return open_interval_above(h);
      if (name == "parity") return parity_indicator(h);
      if (name == "usc-step") return usc_step(h);
      if (name == "jump-share" || name == "jump-aggregate") {
        const int n = static_cast<int>(detail::opt_int(j, path, "agents", 4, 1, 64));
        const double k = detail::opt_number(j, path, "k", 1.0);
        return name == "jump-share" ? jump_share(h, k, n) : jump_aggregate(h, k, n);
      }
      if (name == "simplex-identity") return simplex_identity(m, h);
      if (name == "plateau-identity") return plateau_identity(m, h);
      if (name == "random-open-fiber") {
        std::mt19937_64 rng(ctx.seed);
        return random_open_fiber(m, h, rng);
      }
      if (name == "browder-ball") {
        const int idx = static_cast<int>(detail::opt_int(j, path, "index", 0, 0, 999));
        const auto spec = browder_specs(ctx.seed, idx + 1)[static_cast<std::size_t>(idx)];
        return open_ball_around(spec.m, h, spec.f, spec.r, spec.L);
      }
      const Vec c = j.contains("center") ? detail::vec_at(j["center"], path + "/center", m)
                                         : Vec(Vec::Constant(m, 1.0 / m));
      return constant_ball(m, h, c, detail::opt_number(j, path, "radius", 0.25));
    };
    auto P = detail::at_path(path, build);
    return P.with_scale(s);
  }
  detail::allow_keys(j, path, {"grid", "scale", "convex", "lipschitz", "values"});
  auto g = grid_from_json(field(j, path, "grid"), path + "/grid");
  if (ctx.mesh_given() && std::abs(ctx.resolve(g->mesh()).h - g->mesh()) > 1e-12)
    throw SchemaError(path + "/grid/mesh", "grid mesh differs from the scale mesh");
  const Scale s = ctx.resolve(g->mesh(), path + "/grid/mesh");
  const bool convex = detail::opt_bool(j, path, "convex", true);
  const double L = detail::opt_number(j, path, "lipschitz", 1.0);
  const json& vals = array_at(field(j, path, "values"), path + "/values");
  if (vals.size() != g->size())
    throw SchemaError(path + "/values", "expected one entry per grid vertex (" + std::to_string(g->size()) + ")");
  std::vector<std::vector<Vec>> sets(g->size());
  long long dim = -1;
  for (std::size_t v = 0; v < vals.size(); ++v) {
    const std::string pv = path + "/values/" + std::to_string(v);
    array_at(vals[v], pv);
    for (std::size_t k = 0; k < vals[v].size(); ++k) {
      Vec p = detail::vec_at(vals[v][k], pv + "/" + std::to_string(k), dim);
      dim = p.size();
      sets[v].push_back(p);
    }
  }
  return detail::at_path(path, [&] { return SampledCorrespondence::from_sets(g, sets, s, convex, L); });
}

// ---------------------------------------------------------------------------
// Economies

/// The economy's own mesh must agree with a mesh given on the command line
/// or in the scenario scale.
inline double economy_mesh(const json& j, const std::string& path, Context& ctx) {
  if (!j.contains("mesh")) return ctx.resolve(1.0 / 32).h;
  const double h = number_at(j["mesh"], path + "/mesh");
  if (ctx.mesh_given() && std::abs(ctx.resolve(h).h - h) > 1e-12)
    throw SchemaError(path + "/mesh", "economy mesh differs from the scale mesh");
  return ctx.resolve(h, path + "/mesh").h;
}

inline ExchangeEconomy economy_from_json(const json& j, const std::string& path, Context& ctx) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  if (j.contains("named")) {
    detail::allow_keys(j, path, {"named", "agents", "mesh", "shareMesh"});
    const std::string name =
        detail::one_of(j["named"], path + "/named", {"switch-and-nonmixing", "replicated-nonmixing"});
    const double h = economy_mesh(j, path, ctx);
    const double hX = detail::opt_number(j, path, "shareMesh", h / 2);
    if (name == "switch-and-nonmixing") return instances::switch_and_nonmixing(h, hX);
    return instances::replicated_nonmixing(static_cast<int>(detail::opt_int(j, path, "agents", 4, 1, 4096)), h, hX);
  }
  detail::allow_keys(j, path, {"goods", "mesh", "shareMesh", "agents"});
  ExchangeEconomy econ;
  econ.m = static_cast<int>(detail::int_at(field(j, path, "goods"), path + "/goods", 1, 6));
  econ.h = economy_mesh(j, path, ctx);
  econ.hX = detail::opt_number(j, path, "shareMesh", econ.h / 2);
  const json& agents = array_at(field(j, path, "agents"), path + "/agents");
  if (agents.empty()) throw SchemaError(path + "/agents", "at least one agent required");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string pa = path + "/agents/" + std::to_string(i);
    detail::allow_keys(agents[i], pa, {"endowment", "preference"});
    Vec e = detail::vec_at(field(agents[i], pa, "endowment"), pa + "/endowment", econ.m);
    const json& pref = field(agents[i], pa, "preference");
    const std::string pp = pa + "/preference";
    detail::allow_keys(pref, pp, {"kind", "weights"});
    const std::string kind =
        detail::one_of(field(pref, pp, "kind"), pp + "/kind", {"cobb-douglas", "price-switch", "non-mixing"});
    if (kind == "cobb-douglas") {
      Vec w = pref.contains("weights") ? detail::vec_at(pref["weights"], pp + "/weights", econ.m)
                                       : Vec(Vec::Constant(econ.m, 1.0 / econ.m));
      econ.agents.push_back(detail::at_path(pp, [&] { return cobb_douglas(w, e); }));
    } else if (kind == "price-switch") {
      econ.agents.push_back(detail::at_path(pp, [&] { return price_switch(e); }));
    } else {
      econ.agents.push_back(non_mixing(e));
    }
  }
  detail::at_path(path, [&] {
    econ.validate();
    SimplicialGrid::simplex(econ.m, econ.h);
    return 0;
  });
  return econ;
}

// ---------------------------------------------------------------------------
// Checks on sampled and finite correspondences

inline const std::vector<std::string>& sampled_checks() {
  static const std::vector<std::string> v{"openFibers", "openGraph", "lip", "usc", "lsc", "closed", "nsp",
                                          "tarafdar", "strengthenedTarafdar", "cip", "cfb", "wcfb", "jumpFree"};
  return v;
}

inline bool run_sampled_check(const std::string& name, const SampledCorrespondence& P) {
  if (name == "openFibers") return check_open_fibers_at_scale(P);
  if (name == "openGraph") return check_open_graph_at_scale(P);
  if (name == "lip") return check_lip_at_scale(P);
  if (name == "usc") return check_usc_at_scale(P);
  if (name == "lsc") return check_lsc_at_scale(P);
  if (name == "closed") return check_closed_at_scale(P);
  if (name == "nsp") return check_nsp_at_scale(P);
  if (name == "tarafdar") return check_tarafdar_at_scale(P, CoverScope::support);
  if (name == "strengthenedTarafdar") return check_tarafdar_at_scale(P, CoverScope::whole);
  if (name == "cip") return check_continuous_inclusion_at_scale(P);
  if (name == "cfb") return check_cfb(P);
  if (name == "wcfb") return check_wcfb(P);
  if (name == "jumpFree") {
    for (std::size_t v = 0; v < P.grid().size(); ++v)
      if (P.nonempty(v) && detect_jump(P, v)) return false;
    return true;
  }
  throw InternalError("unhandled check " + name);
}

inline const std::vector<std::string>& finite_checks() {
  static const std::vector<std::string> v{"openFibers", "openGraph", "lip", "usc", "lsc", "closed", "nsp",
                                          "nspObservation", "closedLocalSelections", "tarafdar",
                                          "strengthenedTarafdar", "cip"};
  return v;
}

inline bool run_finite_check(const std::string& name, const finite::FiniteCorrespondence& P) {
  using namespace finite;
  if (name == "openFibers") return is_open_fibers(P);
  if (name == "openGraph") return is_open_graph(P);
  if (name == "lip") return has_local_intersection_property(P);
  if (name == "usc") return is_usc(P);
  if (name == "lsc") return is_lsc(P);
  if (name == "closed") return is_closed(P);
  if (name == "nsp") return has_nsp(P);
  if (name == "nspObservation") return has_nsp_via_observation(P);
  if (name == "closedLocalSelections") return closed_local_selections(P).ok();
  if (name == "tarafdar") return is_tarafdar_continuous(P, TarafdarVariant::support);
  if (name == "strengthenedTarafdar") return is_tarafdar_continuous(P, TarafdarVariant::whole);
  if (name == "cip") return has_continuous_inclusion_property(P);
  throw InternalError("unhandled check " + name);
}

// ---------------------------------------------------------------------------
// Verbs

namespace verb {

inline Job topo_sweep(const json& p, const std::string& path, Context&) {
  detail::allow_keys(p, path, {"maxPoints", "check", "allCodomainTopologies"});
  const int n = static_cast<int>(detail::opt_int(p, path, "maxPoints", 3, 1, 4));
  const std::string check =
      detail::one_of(field(p, path, "check"), path + "/check", {"tarafdar-lip", "selection", "gluing"});
  const bool all = detail::opt_bool(p, path, "allCodomainTopologies", false);
  if (all && n > 3) throw SchemaError(path + "/maxPoints", "all-topology sweeps are capped at 3 points");
  return [=] {
    finite::SweepScope scope{n, n, all};
    finite::SweepReport rep;
    if (check == "tarafdar-lip") rep = finite::sweep(scope, finite::check_tarafdar_equivalence);
    else if (check == "selection") rep = finite::sweep(scope, finite::check_selection_equivalence);
    else rep = finite::sweep(scope, finite::check_gluing);
    RunResult r;
    r.outcome["check"] = check;
    r.outcome["maxPoints"] = n;
    r.outcome["allCodomainTopologies"] = all;
    r.outcome["instances"] = rep.instances;
    r.outcome["mismatches"] = rep.mismatches;
    if (rep.mismatches) {
      r.outcome["firstDetail"] = rep.first_detail;
      r.outcome["firstMismatch"] = finite::to_json(*rep.first_mismatch);
    }
    r.pass = rep.mismatches == 0;
    return r;
  };
}

inline Job check(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"correspondence", "checks", "expect"});
  const json& cj = field(p, path, "correspondence");
  const std::string cp = path + "/correspondence";
  const bool finite_input = cj.is_object() && cj.contains("domain");
  const auto& allowed = finite_input ? finite_checks() : sampled_checks();
  std::vector<std::string> names;
  if (p.contains("checks")) names = detail::names_at(p["checks"], path + "/checks", allowed);
  const auto expect = detail::expectations(p, path, allowed);
  names = detail::merged(names, expect);
  if (names.empty()) throw SchemaError(path + "/checks", "no checks requested");
  if (finite_input) {
    auto P = detail::at_path(cp, [&] { return finite::correspondence_from_json(cj, cp); });
    return [=] {
      RunResult r;
      for (const auto& n : names) r.outcome["checks"][n] = run_finite_check(n, P);
      r.pass = detail::apply_expectations(r.outcome, expect);
      return r;
    };
  }
  auto P = sampled_from_json(cj, cp, ctx);
  return [=] {
    RunResult r;
    std::vector<char> res(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) res[i] = run_sampled_check(names[i], P);
    for (std::size_t i = 0; i < names.size(); ++i) r.outcome["checks"][names[i]] = static_cast<bool>(res[i]);
    r.pass = detail::apply_expectations(r.outcome, expect);
    return r;
  };
}

inline Job select(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"correspondence", "method"});
  const std::string method = detail::one_of(field(p, path, "method"), path + "/method", {"yp", "nsp-closed"});
  auto P = sampled_from_json(field(p, path, "correspondence"), path + "/correspondence", ctx);
  return [=] {
    RunResult r;
    auto c = method == "yp" ? yp_continuous_selection(P) : nsp_closed_selection(P);
    r.outcome["method"] = method;
    r.outcome["certificate"] = to_json(c);
    r.pass = c.pass;
    return r;
  };
}

inline Job fixpoint(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"correspondence", "route", "maxResidual"});
  const std::string route_s =
      detail::one_of(field(p, path, "route"), path + "/route", {"browder", "tarafdar", "he-yannelis", "kakutani"});
  auto P = sampled_from_json(field(p, path, "correspondence"), path + "/correspondence", ctx, 1.0 / 32);
  if (P.grid().kind() != GridKind::simplex) throw SchemaError(path + "/correspondence", "fixed points need a simplex grid");
  const double m = P.grid().dim(), h = P.scale().h;
  const double bound = detail::opt_number(p, path, "maxResidual", m * (P.lipschitz() * h + h));
  const Route route = parse_route(route_s);
  const bool want_trace = ctx.trace;
  return [=] {
    RunResult r;
    std::ostringstream tr;
    auto rep = solve_fixed_point(P, route, want_trace ? &tr : nullptr);
    r.outcome = to_json(rep);
    r.outcome["bound"] = bound;
    r.pass = rep.residual <= bound;
    r.trace = tr.str();
    return r;
  };
}

namespace berge_detail {

inline const std::map<std::string, std::function<double(double, double)>>& utilities() {
  static const std::map<std::string, std::function<double(double, double)>> u{
      {"neg-distance", [](double e, double x) { return -(x - e) * (x - e); }},
      {"neg-distance-to-square", [](double e, double x) { return -std::abs(x - e * e); }},
      {"jump", [](double e, double x) { return e < 0.5 ? x : -x; }},
      {"constant", [](double, double) { return 0.0; }},
      {"increasing", [](double, double x) { return x; }},
  };
  return u;
}

inline const std::map<std::string, std::function<bool(double, double, double)>>& preferences() {
  static const std::map<std::string, std::function<bool(double, double, double)>> b{
      {"closer", [](double e, double x, double y) { return std::abs(y - e) < std::abs(x - e) - 1e-12; }},
      {"threshold", [](double e, double x, double y) { return std::abs(y - e) < std::abs(x - e) - 0.2; }},
      {"larger", [](double, double x, double y) { return y > x + 1e-12; }},
  };
  return b;
}

inline std::vector<std::string> keys_of(const auto& m) {
  std::vector<std::string> k;
  for (const auto& [name, f] : m) k.push_back(name);
  return k;
}

}  // namespace berge_detail

inline Job berge(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"grid", "samples", "constraint", "objective", "pipeline", "checks", "expect"});
  const Scale s = ctx.resolve(1.0 / 32);
  double elo = 0, ehi = 1;
  if (p.contains("grid")) {
    detail::allow_keys(p["grid"], path + "/grid", {"lo", "hi"});
    elo = detail::opt_number(p["grid"], path + "/grid", "lo", 0);
    ehi = detail::opt_number(p["grid"], path + "/grid", "hi", 1);
  }
  auto E = detail::at_path(path + "/grid", [&] { return instances::line(elo, ehi, s.h); });
  double xlo = elo, xhi = ehi, xh = s.h;
  if (p.contains("samples")) {
    const std::string sp = path + "/samples";
    detail::allow_keys(p["samples"], sp, {"lo", "hi", "mesh"});
    xlo = detail::opt_number(p["samples"], sp, "lo", elo);
    xhi = detail::opt_number(p["samples"], sp, "hi", ehi);
    xh = detail::opt_number(p["samples"], sp, "mesh", s.h);
  }
  auto Xg = detail::at_path(path + "/samples", [&] { return instances::line(xlo, xhi, xh); });
  const auto X = instances::grid_points(*Xg);
  const std::string cons = p.contains("constraint")
                               ? detail::one_of(p["constraint"], path + "/constraint", {"all", "at-most-parameter", "at-least-parameter"})
                               : "all";
  std::vector<std::vector<int>> F(E->size());
  for (std::size_t e = 0; e < E->size(); ++e)
    for (int x = 0; x < static_cast<int>(X.size()); ++x) {
      const double ev = E->point(e)(0), xv = X[static_cast<std::size_t>(x)](0);
      if (cons == "all" || (cons == "at-most-parameter" && xv <= ev + 1e-12) ||
          (cons == "at-least-parameter" && xv >= ev - 1e-12))
        F[e].push_back(x);
    }
  const json& obj = field(p, path, "objective");
  const std::string op = path + "/objective";
  detail::allow_keys(obj, op, {"kind", "expression", "table"});
  const std::string kind = detail::one_of(field(obj, op, "kind"), op + "/kind", {"utility", "table", "preference"});
  BergeProblem prob;
  if (kind == "utility") {
    const auto name = detail::one_of(field(obj, op, "expression"), op + "/expression",
                                     berge_detail::keys_of(berge_detail::utilities()));
    const auto u = berge_detail::utilities().at(name);
    prob = detail::at_path(op, [&] {
      return make_utility_problem(E, X, F, s, [&](const Vec& e, const Vec& x) { return u(e(0), x(0)); });
    });
  } else if (kind == "table") {
    const json& t = array_at(field(obj, op, "table"), op + "/table");
    if (t.size() != E->size()) throw SchemaError(op + "/table", "expected one row per grid vertex (" + std::to_string(E->size()) + ")");
    std::vector<std::vector<double>> rows;
    for (std::size_t e = 0; e < t.size(); ++e) {
      auto row = detail::numbers_at(t[e], op + "/table/" + std::to_string(e));
      if (row.size() != X.size())
        throw SchemaError(op + "/table/" + std::to_string(e), "expected one entry per sample (" + std::to_string(X.size()) + ")");
      rows.push_back(row);
    }
    prob = detail::at_path(op, [&] {
      auto P = make_utility_problem(E, X, F, s, [&](const Vec&, const Vec&) { return 0.0; });
      for (std::size_t e = 0; e < rows.size(); ++e) P.utility[e] = rows[e];
      return P;
    });
  } else {
    const auto name = detail::one_of(field(obj, op, "expression"), op + "/expression",
                                     berge_detail::keys_of(berge_detail::preferences()));
    const auto b = berge_detail::preferences().at(name);
    prob = detail::at_path(op, [&] {
      return make_preference_problem(E, X, F, s, [&](const Vec& e, const Vec& x, const Vec& y) { return b(e(0), x(0), y(0)); });
    });
  }
  const std::string pipeline = p.contains("pipeline")
                                   ? detail::one_of(p["pipeline"], path + "/pipeline", {"utility", "preference", "convex"})
                                   : (kind == "preference" ? "preference" : "utility");
  if (pipeline == "utility" && kind == "preference")
    throw SchemaError(path + "/pipeline", "the utility pipeline needs a utility objective");
  if (pipeline != "utility" && prob.has_utility()) prob = induced_preference(prob);
  if (pipeline == "convex") {
    if (std::abs(xlo - elo) > 1e-12 || std::abs(xhi - ehi) > 1e-12 || std::abs(xh - s.h) > 1e-12)
      throw SchemaError(path + "/samples", "the convex pipeline needs samples on the parameter grid");
    prob.choice_grid = Xg;
  }
  std::vector<std::string> extra;
  if (p.contains("checks")) extra = detail::names_at(p["checks"], path + "/checks", sampled_checks());
  std::vector<std::string> expectable = sampled_checks();
  for (const char* k : {"csp", "hullIrreflexive", "inclusionProperty", "constraintClosed", "argmaxNonempty", "argmaxClosed"})
    expectable.push_back(k);
  const auto expect = detail::expectations(p, path, expectable);
  return [=] {
    RunResult r;
    BergeReport rep = pipeline == "utility"      ? verify_prop_bergeu(prob)
                      : pipeline == "preference" ? verify_prop_bergep(prob)
                                                 : verify_prop_bergepc(prob);
    r.outcome = to_json(rep);
    const auto M = prob.has_utility() ? argmax_u(prob) : argmax_p(prob);
    for (const auto& n : extra) r.outcome["checks"][n] = run_sampled_check(n, M);
    r.pass = rep.pass && detail::apply_expectations(r.outcome, expect);
    return r;
  };
}

struct ZetaSpec {
  std::function<ExcessDemandMap(double)> make;  ///< by mesh
  double lipschitz = 1.0;
};

inline ZetaSpec zeta_from_payload(const json& p, const std::string& path, Context& ctx) {
  ZetaSpec z;
  if (p.contains("economy") == p.contains("zeta")) throw SchemaError(path, "expected exactly one of zeta, economy");
  if (p.contains("zeta")) {
    const json& j = p["zeta"];
    const std::string zp = path + "/zeta";
    detail::allow_keys(j, zp, {"kind", "value"});
    const std::string kind = detail::one_of(field(j, zp, "kind"), zp + "/kind", {"linear-two-good", "constant"});
    if (kind == "linear-two-good") {
      z.make = [](double) {
        return direct_excess_demand(2, [](const Vec& p) { return std::vector<Vec>{make_vec({p(1) - p(0), p(0) - p(1)})}; });
      };
    } else {
      const Vec c = detail::vec_at(field(j, zp, "value"), zp + "/value");
      if (c.size() > 6) throw SchemaError(zp + "/value", "at most 6 goods");
      z.make = [c](double) {
        return direct_excess_demand(static_cast<int>(c.size()), [c](const Vec&) { return std::vector<Vec>{c}; },
                                    std::max(1.0, c.cwiseAbs().maxCoeff()));
      };
      z.lipschitz = 0;
    }
    return z;
  }
  const ExchangeEconomy econ = economy_from_json(p["economy"], path + "/economy", ctx);
  z.make = [econ](double h) {
    ExchangeEconomy e = econ;
    e.h = h;
    return economy_excess_demand(e);
  };
  return z;
}

inline Job gnd(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"zeta", "economy", "meshes", "rounds", "tolerance", "lipschitz", "expectPrice", "priceTolerance"});
  const Scale s = ctx.resolve(1.0 / 128);
  std::vector<double> meshes{s.h};
  if (p.contains("meshes")) {
    meshes = detail::numbers_at(p["meshes"], path + "/meshes");
    for (std::size_t i = 0; i < meshes.size(); ++i) {
      const double inv = 1 / meshes[i];
      if (!(meshes[i] > 0 && meshes[i] <= 1) || std::abs(inv - std::round(inv)) > 1e-9)
        throw SchemaError(path + "/meshes/" + std::to_string(i), "1/h must be an integer");
    }
  }
  const int rounds = static_cast<int>(detail::opt_int(p, path, "rounds", 3, 0, 8));
  const double tol = detail::opt_number(p, path, "tolerance", 1e-3);
  auto z = zeta_from_payload(p, path, ctx);
  const double L = detail::opt_number(p, path, "lipschitz", z.lipschitz);
  std::optional<Vec> want;
  if (p.contains("expectPrice")) want = detail::vec_at(p["expectPrice"], path + "/expectPrice");
  const bool has_ptol = p.contains("priceTolerance");
  const double ptol = detail::opt_number(p, path, "priceTolerance", 0);
  return [=] {
    RunResult r;
    json solves = json::array();
    std::ostringstream csv;
    csv << "mesh,residual";
    plot::Series res{"residual", {}, {}};
    GndReport last;
    double last_h = 0;
    for (double h : meshes) {
      const auto zh = z.make(h);
      if (h == meshes.front()) {
        for (int k = 0; k < zh.m; ++k) csv << ",p" << (k + 1);
        csv << "\n";
      }
      last = gnd_solve(zh, h, rounds, L);
      last_h = h;
      json sj{{"mesh", h}};
      const json rep = to_json(last);
      for (const auto& [key, val] : rep.items()) sj[key] = val;
      solves.push_back(sj);
      csv << json(h).dump() << "," << json(last.residual).dump();
      for (Eigen::Index k = 0; k < last.price.size(); ++k) csv << "," << json(last.price(k)).dump();
      csv << "\n";
      res.x.push_back(h);
      res.y.push_back(last.residual);
    }
    r.outcome["solves"] = solves;
    r.outcome["price"] = detail::vec_json(last.price);
    r.outcome["residual"] = last.residual;
    r.outcome["tolerance"] = tol;
    r.pass = last.residual <= tol;
    if (want) {
      const double d = (last.price - *want).cwiseAbs().maxCoeff();
      const double bound = has_ptol ? ptol : 2 * last_h;
      r.outcome["priceError"] = d;
      r.outcome["priceTolerance"] = bound;
      r.pass = r.pass && want->size() == last.price.size() && d <= bound;
    }
    r.csv = csv.str();
    r.figure = plot::Figure{"Gale-Nikaido-Debreu residual", "mesh h", "residual", true, {res}};
    return r;
  };
}

inline Job akr(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"economy", "replicate", "random", "rounds", "checkPreconditions"});
  int forms = p.contains("economy") + p.contains("replicate") + p.contains("random");
  if (forms != 1) throw SchemaError(path, "expected exactly one of economy, replicate, random");
  const int rounds = static_cast<int>(detail::opt_int(p, path, "rounds", 3, 0, 8));
  const bool pre = detail::opt_bool(p, path, "checkPreconditions", true);
  std::vector<ExchangeEconomy> econs;
  const bool single = p.contains("economy");
  if (single) {
    econs.push_back(economy_from_json(p["economy"], path + "/economy", ctx));
  } else if (p.contains("replicate")) {
    const std::string rp = path + "/replicate";
    detail::allow_keys(p["replicate"], rp, {"sizes", "shareMesh"});
    const double h = ctx.resolve(1.0 / 32).h;
    const double hX = detail::opt_number(p["replicate"], rp, "shareMesh", h / 2);
    const json& sizes = array_at(field(p["replicate"], rp, "sizes"), rp + "/sizes");
    if (sizes.empty()) throw SchemaError(rp + "/sizes", "expected a nonempty array");
    for (std::size_t i = 0; i < sizes.size(); ++i)
      econs.push_back(instances::replicated_nonmixing(
          static_cast<int>(detail::int_at(sizes[i], rp + "/sizes/" + std::to_string(i), 2, 4096)), h, hX));
  } else {
    const std::string rp = path + "/random";
    const json& j = p["random"];
    detail::allow_keys(j, rp, {"count", "goods", "maxAgents", "shareMesh"});
    const int count = static_cast<int>(detail::opt_int(j, rp, "count", 20, 1, 10000));
    std::vector<int> goods{2, 3, 4};
    if (j.contains("goods")) {
      goods.clear();
      const json& g = array_at(j["goods"], rp + "/goods");
      if (g.empty()) throw SchemaError(rp + "/goods", "expected a nonempty array");
      for (std::size_t i = 0; i < g.size(); ++i)
        goods.push_back(static_cast<int>(detail::int_at(g[i], rp + "/goods/" + std::to_string(i), 1, 4)));
    }
    const int max_n = static_cast<int>(detail::opt_int(j, rp, "maxAgents", 50, 1, 1000));
    const double h = ctx.resolve(1.0 / 32).h;
    const double hX = detail::opt_number(j, rp, "shareMesh", h / 2);
    std::mt19937_64 rng(ctx.seed);
    for (int i = 0; i < count; ++i) {
      const int m = goods[static_cast<std::size_t>(i) % goods.size()];
      if (max_n < m) throw SchemaError(rp + "/maxAgents", "must be at least the number of goods");
      std::uniform_int_distribution<int> N(m, max_n);
      const int n = N(rng);
      econs.push_back(instances::random_cobb_douglas_economy(rng, m, n, h, hX));
    }
  }
  return [=] {
    RunResult r;
    json runs = json::array();
    std::vector<std::pair<std::size_t, std::size_t>> order;
    std::vector<AKRReport> reps(econs.size());
    parallel_for(econs.size(), [&](std::size_t i) { reps[i] = akr_approx_equilibrium(econs[i], rounds, pre); });
    bool all = true;
    for (std::size_t i = 0; i < econs.size(); ++i) {
      const auto& rep = reps[i];
      runs.push_back({{"n", econs[i].n()}, {"m", econs[i].m}, {"lhs", rep.lhs}, {"bound", rep.bound},
                      {"pass", rep.pass}, {"price", detail::vec_json(rep.price)}});
      all = all && rep.pass;
      order.emplace_back(econs[i].n(), i);
    }
    if (single) r.outcome = to_json(reps.front());
    r.outcome["checkPreconditions"] = pre;
    r.outcome["runs"] = runs;
    r.outcome["allPass"] = all;
    r.pass = all;
    std::stable_sort(order.begin(), order.end(), [](auto a, auto b) { return a.first < b.first; });
    std::ostringstream csv;
    csv << "n,m,lhs,bound\n";
    plot::Series lhs{"lhs", {}, {}}, bound{"bound", {}, {}};
    for (const auto& [n, i] : order) {
      csv << n << "," << econs[i].m << "," << json(reps[i].lhs).dump() << "," << json(reps[i].bound).dump() << "\n";
      lhs.x.push_back(static_cast<double>(n));
      lhs.y.push_back(reps[i].lhs);
      bound.x.push_back(static_cast<double>(n));
      bound.y.push_back(reps[i].bound);
    }
    r.csv = csv.str();
    r.figure = plot::Figure{"approximate equilibrium bound", "agents n", "lhs", true, {lhs, bound}};
    return r;
  };
}

inline Job shafer(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"economy", "literal"});
  const auto econ = economy_from_json(field(p, path, "economy"), path + "/economy", ctx);
  const bool literal = detail::opt_bool(p, path, "literal", false);
  return [=] {
    RunResult r;
    auto rep = shafer_demand(econ, literal);
    r.outcome = to_json(rep);
    bool cd = true;
    for (const auto& a : econ.agents) cd = cd && a.kind == "cobb-douglas";
    r.pass = rep.singleton && (!rep.inclusion_checked || rep.inclusion);
    if (cd) {
      r.outcome["shareTolerance"] = econ.hX;
      r.pass = r.pass && rep.closed_form_gap <= econ.hX + 1e-12;
    }
    return r;
  };
}

inline Job aggregate(const json& p, const std::string& path, Context& ctx) {
  detail::allow_keys(p, path, {"kind", "agents", "k", "economy", "checks", "expect"});
  const std::string kind = detail::one_of(field(p, path, "kind"), path + "/kind", {"jump-shares", "economy"});
  std::vector<std::string> names;
  if (p.contains("checks")) names = detail::names_at(p["checks"], path + "/checks", sampled_checks());
  std::vector<std::string> expectable = sampled_checks();
  for (const char* k : {"partJumps", "weakWalras", "nonempty"}) expectable.push_back(k);
  const auto expect = detail::expectations(p, path, expectable);
  if (kind == "jump-shares") {
    if (p.contains("economy")) throw SchemaError(path + "/economy", "not used with jump-shares");
    const Scale s = ctx.resolve(1.0 / 64);
    const int n = static_cast<int>(detail::opt_int(p, path, "agents", 4, 1, 64));
    const double k = detail::opt_number(p, path, "k", 1.0);
    if (!(k > 0)) throw SchemaError(path + "/k", "expected a positive number");
    return [=] {
      RunResult r;
      std::vector<SampledCorrespondence> parts;
      for (int i = 0; i < n; ++i) parts.push_back(instances::jump_share(s.h, k, n).with_scale(s));
      auto A = aggregate_correspondence(parts);
      const auto one = A.grid().find(IVec{static_cast<int>(std::lround(1 / s.h))});
      r.outcome["checks"]["partJumps"] = detect_jump(parts.front(), *one);
      r.outcome["checks"]["jumpFree"] = run_sampled_check("jumpFree", A);
      for (const auto& nm : names) r.outcome["checks"][nm] = run_sampled_check(nm, A);
      json at1 = json::array();
      for (const auto& y : A.points(*one)) at1.push_back(y(0));
      r.outcome["valueAtOne"] = at1;
      r.pass = r.outcome["checks"]["jumpFree"].get<bool>() && detail::apply_expectations(r.outcome, expect);
      return r;
    };
  }
  if (p.contains("agents") || p.contains("k")) throw SchemaError(path, "agents and k are only used with jump-shares");
  const auto econ = economy_from_json(field(p, path, "economy"), path + "/economy", ctx);
  return [=] {
    RunResult r;
    auto z = economy_excess_demand(econ);
    auto g = std::make_shared<const SimplicialGrid>(build_grid(econ.m, econ.h));
    auto Z = sample_excess(z, g, Scale{econ.h, 2 * econ.h, 1e-9}, 1.0 / (econ.h * econ.h));
    bool nonempty = true;
    for (std::size_t v = 0; v < g->size(); ++v) nonempty = nonempty && Z.nonempty(v);
    r.outcome["checks"]["weakWalras"] = check_weak_walras(z, *g);
    r.outcome["checks"]["nonempty"] = nonempty;
    for (const auto& nm : names) r.outcome["checks"][nm] = run_sampled_check(nm, Z);
    r.outcome["vertices"] = g->size();
    r.outcome["maxValuePoints"] = [&] {
      std::size_t mx = 0;
      for (std::size_t v = 0; v < g->size(); ++v) mx = std::max(mx, Z.values(v).size());
      return mx;
    }();
    r.pass = nonempty && r.outcome["checks"]["weakWalras"].get<bool>() && detail::apply_expectations(r.outcome, expect);
    return r;
  };
}

}  // namespace verb

// ---------------------------------------------------------------------------
// Entry points

/// Validates the whole scenario and returns the computation to run.
inline Prepared prepare(const json& scenario, const Overrides& o) {
  detail::allow_keys(scenario, "", {"$schema", "verb", "payload", "seed", "scale", "output"});
  Prepared out;
  out.verb = detail::one_of(field(scenario, "", "verb"), "/verb", verbs());
  if (scenario.contains("output")) {
    detail::allow_keys(scenario["output"], "/output", {"report", "csv", "svg"});
    for (const char* k : {"report", "csv", "svg"})
      if (scenario["output"].contains(k)) {
        std::string f = string_at(scenario["output"][k], std::string("/output/") + k);
        if (f.empty() || f.find('/') != std::string::npos || f == "." || f == "..")
          throw SchemaError(std::string("/output/") + k, "expected a plain file name");
      }
  }
  out.ctx = Context(scenario, o);
  const json& payload = field(scenario, "", "payload");
  const std::string pp = "/payload";
  if (!payload.is_object()) throw SchemaError(pp, "expected an object");
  const auto& v = out.verb;
  if (v == "topo-sweep") out.job = verb::topo_sweep(payload, pp, out.ctx);
  else if (v == "check") out.job = verb::check(payload, pp, out.ctx);
  else if (v == "select") out.job = verb::select(payload, pp, out.ctx);
  else if (v == "fixpoint") out.job = verb::fixpoint(payload, pp, out.ctx);
  else if (v == "berge") out.job = verb::berge(payload, pp, out.ctx);
  else if (v == "gnd") out.job = verb::gnd(payload, pp, out.ctx);
  else if (v == "akr") out.job = verb::akr(payload, pp, out.ctx);
  else if (v == "shafer") out.job = verb::shafer(payload, pp, out.ctx);
  else out.job = verb::aggregate(payload, pp, out.ctx);
  return out;
}

inline std::string output_name(const json& scenario, const char* key, const std::string& fallback) {
  if (scenario.contains("output") && scenario["output"].contains(key)) return scenario["output"][key].get<std::string>();
  return fallback;
}

/// The report written for a run. Artifact names are relative to the output
/// directory so reports compare equal across directories.
inline json make_report(const Prepared& p, const RunResult& r, const std::string& digest, const json& artifacts) {
  json j;
  j["format"] = "walras-select-report/1";
  j["verb"] = p.verb;
  j["inputDigest"] = digest;
  j["seed"] = p.ctx.seed;
  if (p.ctx.resolved) {
    const auto& s = *p.ctx.resolved;
    j["scale"] = {{"h", s.h}, {"delta", s.delta}, {"eps", s.eps}};
  }
  j["outcome"] = r.outcome;
  j["pass"] = r.pass;
  j["artifacts"] = artifacts;
  return j;
}

}  // namespace wsel::cli

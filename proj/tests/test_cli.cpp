#include <catch_amalgamated.hpp>

#include "wsel/scenario.hpp"

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using wsel::json;

namespace {

const std::string kCli = WSEL_CLI_PATH;
const fs::path kScenarios = WSEL_SCENARIO_DIR;

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  fs::path d = fs::temp_directory_path() / ("wsel_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

Run run(const std::string& args) {
  const fs::path d = scratch("io");
  const std::string cmd = kCli + " " + args + " >" + (d / "out").string() + " 2>" + (d / "err").string();
  const int st = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.out = slurp(d / "out");
  r.err = slurp(d / "err");
  return r;
}

std::string scenario(const std::string& name) { return (kScenarios / (name + ".json")).string(); }

Run run_into(const std::string& name, const fs::path& out, const std::string& extra = "") {
  return run("--scenario " + scenario(name) + " --out " + out.string() + " " + extra);
}

json report_in(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

}  // namespace

TEST_CASE("exit code contract per verb") {
  struct Case {
    const char* name;
    int code;
  };
  const Case cases[] = {
      {"topo_tarafdar", 0},        {"topo_gluing", 0},
      {"check_emptying_constant", 0}, {"check_identity", 0},
      {"check_open_interval", 0},  {"check_parity", 0},
      {"check_explicit", 0},       {"check_finite_interleaved", 0},
      {"select_open_interval", 0}, {"select_yp_random", 0},
      {"select_parity", 1},        {"fixpoint_browder", 0},
      {"fixpoint_kakutani", 0},    {"berge_quadratic", 0},
      {"berge_convex", 0},         {"berge_table", 0},
      {"berge_jump", 1},           {"gnd_linear", 0},
      {"gnd_refinement", 0},       {"gnd_economy", 0},
      {"gnd_constant", 1},         {"akr_two_agent", 0},
      {"akr_two_agent_checked", 1}, {"akr_replicate", 0},
      {"akr_random", 0},           {"shafer_cobb_douglas", 0},
      {"shafer_nonmixing", 1},     {"aggregate_jump_shares", 0},
      {"aggregate_economy", 0},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    const auto dir = scratch(c.name);
    const auto r = run_into(c.name, dir);
    CHECK(r.code == c.code);
    REQUIRE(fs::exists(dir / "report.json"));
    const auto rep = report_in(dir);
    CHECK(rep["pass"] == (c.code == 0));
    CHECK(rep["inputDigest"].get<std::string>().rfind("sha256:", 0) == 0);
    CHECK(rep["inputDigest"].get<std::string>().size() == 7 + 64);
    if (c.code == 1 && rep["outcome"].contains("error")) CHECK(r.err.find("precondition failed") != std::string::npos);
  }
}

TEST_CASE("sweep reports carry instance counts") {
  const auto dir = scratch("topo");
  REQUIRE(run_into("topo_tarafdar", dir).code == 0);
  const auto o = report_in(dir)["outcome"];
  CHECK(o["instances"].get<std::size_t>() > 0);
  CHECK(o["mismatches"] == 0);
  CHECK_FALSE(report_in(dir).contains("scale"));
}

TEST_CASE("selection-equivalence sweep reports its mismatches") {
  // NSP is strictly weaker than the observation-based construction on
  // non-T1 domains; the sweep reports the disagreement and fails.
  const auto dir = scratch("topo_sel");
  CHECK(run_into("topo_selection", dir).code == 1);
  const auto o = report_in(dir)["outcome"];
  CHECK(o["mismatches"] == 1648);
  CHECK(o["firstDetail"].get<std::string>().find("nsp=true observation=false") != std::string::npos);
  CHECK(o.contains("firstMismatch"));
}

TEST_CASE("strict upper rays pass the sampled usc transcription") {
  // Expected false; reported as measured and the scenario fails.
  const auto dir = scratch("rays");
  CHECK(run_into("check_upper_rays", dir).code == 1);
  const auto o = report_in(dir)["outcome"];
  CHECK(o["checks"]["openFibers"] == true);
  CHECK(o["checks"]["usc"] == true);
  CHECK(o["unexpected"] == json::array({"usc"}));
}

TEST_CASE("report contents") {
  SECTION("two-agent economy without preconditions") {
    const auto dir = scratch("akr2");
    REQUIRE(run_into("akr_two_agent", dir).code == 0);
    const auto o = report_in(dir)["outcome"];
    CHECK(o["lhs"] == 0.0);
    CHECK(o["pass"] == true);
    CHECK(o["price"] == json::array({0.5, 0.5}));
  }
  SECTION("the checked run names the failing agent") {
    const auto dir = scratch("akr2c");
    REQUIRE(run_into("akr_two_agent_checked", dir).code == 1);
    CHECK(report_in(dir)["outcome"]["error"].get<std::string>().find("agent 0") != std::string::npos);
  }
  SECTION("gnd economy lands on the midpoint exactly") {
    const auto dir = scratch("gnde");
    REQUIRE(run_into("gnd_economy", dir).code == 0);
    const auto o = report_in(dir)["outcome"];
    CHECK(o["residual"] == 0.0);
    CHECK(o["price"] == json::array({0.5, 0.5}));
  }
  SECTION("gnd refinement is monotone and written as csv and svg") {
    const auto dir = scratch("gndr");
    REQUIRE(run_into("gnd_refinement", dir).code == 0);
    const auto rep = report_in(dir);
    CHECK(rep["artifacts"]["csv"] == "gnd.csv");
    CHECK(rep["artifacts"]["svg"] == "gnd.svg");
    const auto& solves = rep["outcome"]["solves"];
    REQUIRE(solves.size() == 4);
    for (std::size_t i = 1; i < solves.size(); ++i)
      CHECK(solves[i]["residual"].get<double>() <= solves[i - 1]["residual"].get<double>());
    const auto csv = slurp(dir / "gnd.csv");
    CHECK(csv.rfind("mesh,residual,p1,p2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto svg = slurp(dir / "gnd.svg");
    CHECK(svg.find("viewBox=\"0 0 640 400\"") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
  }
  SECTION("replicated economies stay below the bound") {
    const auto dir = scratch("akrr");
    REQUIRE(run_into("akr_replicate", dir).code == 0);
    for (const auto& r : report_in(dir)["outcome"]["runs"])
      CHECK(r["lhs"].get<double>() <= r["bound"].get<double>());
    const auto svg = slurp(dir / "akr.svg");
    CHECK(svg.find(">lhs<") != std::string::npos);
    CHECK(svg.find(">bound<") != std::string::npos);
  }
  SECTION("finite interleaved analogue") {
    const auto dir = scratch("fin");
    REQUIRE(run_into("check_finite_interleaved", dir).code == 0);
    const auto c = report_in(dir)["outcome"]["checks"];
    CHECK(c["nsp"] == false);
    CHECK(c["nspObservation"] == false);
    CHECK(c["closedLocalSelections"] == false);
  }
  SECTION("single-valued demand rejects the non-mixing agent") {
    const auto dir = scratch("shn");
    REQUIRE(run_into("shafer_nonmixing", dir).code == 1);
    CHECK(report_in(dir)["outcome"]["error"].get<std::string>().find("strong convexity") != std::string::npos);
  }
}

TEST_CASE("schema errors exit 2 with the offending path") {
  const std::pair<const char*, const char*> cases[] = {
      {"bad_verb", "/verb"},
      {"bad_route", "/payload/route"},
      {"bad_endowment", "/payload/economy/agents/0/endowment"},
      {"bad_delta", "/scale/delta"},
      {"bad_unknown_field", "/payload/tolerence"},
      {"bad_check_name", "/payload/checks/0"},
      {"bad_values_length", "/payload/correspondence/values"},
  };
  for (const auto& [name, path] : cases) {
    INFO(name);
    const auto dir = scratch(name);
    const auto r = run_into(name, dir);
    CHECK(r.code == 2);
    CHECK(r.err.find(std::string("schema error at ") + path + ":") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "report.json"));
  }
  SECTION("unreadable and malformed files") {
    CHECK(run("--scenario /nonexistent/x.json").code == 2);
    const auto d = scratch("malformed");
    std::ofstream(d / "m.json") << "{\"verb\": ";
    const auto r = run("--scenario " + (d / "m.json").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("invalid JSON") != std::string::npos);
  }
  SECTION("flag values are validated") {
    const auto r = run("--scenario " + scenario("check_identity") + " --mesh 0.3");
    CHECK(r.code == 2);
    CHECK(r.err.find("/scale/h") != std::string::npos);
    CHECK(run("--scenario " + scenario("check_identity") + " --eps -1").code == 2);
    CHECK(run("--scenario " + scenario("check_identity") + " --bogus").code == 2);
  }
}

TEST_CASE("reruns are byte-identical") {
  for (const char* name : {"topo_gluing", "check_open_interval", "select_yp_random", "fixpoint_browder", "berge_quadratic",
                           "gnd_refinement", "akr_random", "shafer_cobb_douglas", "aggregate_jump_shares",
                           "select_parity"}) {
    INFO(name);
    const auto a = scratch(std::string(name) + "_a"), b = scratch(std::string(name) + "_b");
    const int ca = run_into(name, a, "--trace").code;
    const int cb = run_into(name, b, "--trace").code;
    CHECK(ca == cb);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      REQUIRE(fs::exists(b / e.path().filename()));
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files >= 1);
  }
}

TEST_CASE("thread count does not change reports") {
  const auto a = scratch("thr1"), b = scratch("thr8");
  const std::string base = "--scenario " + scenario("akr_random") + " --out ";
  const int c1 = std::system(("WALRAS_SELECT_THREADS=1 " + kCli + " " + base + a.string() + " >/dev/null 2>&1").c_str());
  const int c8 = std::system(("WALRAS_SELECT_THREADS=8 " + kCli + " " + base + b.string() + " >/dev/null 2>&1").c_str());
  CHECK(c1 == c8);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
}

TEST_CASE("overrides and output modes") {
  SECTION("report on stdout without --out") {
    const auto r = run("--scenario " + scenario("check_identity"));
    CHECK(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["verb"] == "check");
    CHECK(j["artifacts"].empty());
  }
  SECTION("mesh override changes the recorded scale") {
    const auto r = run("--scenario " + scenario("check_identity") + " --mesh 0.03125 --eps 1e-6");
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["scale"]["h"] == 0.03125);
    CHECK(j["scale"]["delta"] == 0.0625);
    CHECK(j["scale"]["eps"] == 1e-6);
  }
  SECTION("an explicit grid rejects a conflicting mesh") {
    const auto r = run("--scenario " + scenario("check_explicit") + " --mesh 0.125");
    CHECK(r.code == 2);
    CHECK(r.err.find("/payload/correspondence/grid/mesh") != std::string::npos);
  }
  SECTION("seed override reaches randomized suites") {
    const auto a = json::parse(run("--scenario " + scenario("akr_random")).out);
    const auto b = json::parse(run("--scenario " + scenario("akr_random") + " --seed 12").out);
    CHECK(a["seed"] == 11);
    CHECK(b["seed"] == 12);
    CHECK(a["inputDigest"] == b["inputDigest"]);
    CHECK(a["outcome"] != b["outcome"]);
  }
  SECTION("trace is written on request only") {
    const auto a = scratch("tr_on"), b = scratch("tr_off");
    REQUIRE(run_into("fixpoint_browder", a, "--trace").code == 0);
    REQUIRE(run_into("fixpoint_browder", b).code == 0);
    CHECK(fs::exists(a / "trace.txt"));
    CHECK_FALSE(slurp(a / "trace.txt").empty());
    CHECK(report_in(a)["artifacts"]["trace"] == "trace.txt");
    CHECK_FALSE(fs::exists(b / "trace.txt"));
  }
}

TEST_CASE("scenario validation without running") {
  wsel::cli::Overrides none;
  auto parse = [](const char* s) { return json::parse(s); };
  SECTION("payload is validated before any computation") {
    // a huge sweep that would take hours if it ran before the bad field
    auto j = parse(R"({"verb":"topo-sweep","payload":{"maxPoints":4,"check":"selection","x":1}})");
    CHECK_THROWS_AS(wsel::cli::prepare(j, none), wsel::SchemaError);
  }
  SECTION("missing payload") {
    try {
      wsel::cli::prepare(parse(R"({"verb":"check"})"), none);
      FAIL("accepted");
    } catch (const wsel::SchemaError& e) {
      CHECK(e.path == "/payload");
    }
  }
  SECTION("output names must be plain") {
    auto j = parse(R"({"verb":"check","output":{"report":"../x.json"},"payload":{}})");
    try {
      wsel::cli::prepare(j, none);
      FAIL("accepted");
    } catch (const wsel::SchemaError& e) {
      CHECK(e.path == "/output/report");
    }
  }
  SECTION("all-topology sweeps are capped") {
    auto j = parse(R"({"verb":"topo-sweep","payload":{"maxPoints":4,"check":"gluing","allCodomainTopologies":true}})");
    CHECK_THROWS_AS(wsel::cli::prepare(j, none), wsel::SchemaError);
  }
  SECTION("exactly one economy form") {
    auto j = parse(R"({"verb":"akr","payload":{"replicate":{"sizes":[4]},"random":{}}})");
    CHECK_THROWS_AS(wsel::cli::prepare(j, none), wsel::SchemaError);
  }
  SECTION("expectations must name known checks") {
    auto j = parse(R"({"verb":"check","payload":{"correspondence":{"named":"identity"},"expect":{"foo":true}}})");
    try {
      wsel::cli::prepare(j, none);
      FAIL("accepted");
    } catch (const wsel::SchemaError& e) {
      CHECK(e.path == "/payload/expect/foo");
    }
  }
  SECTION("every shipped verb is covered by the scenario schema") {
    const auto s = json::parse(slurp(kScenarios / ".." / ".." / "schemas" / "scenario.schema.json"));
    const auto& listed = s["properties"]["verb"]["enum"];
    CHECK(listed.size() == wsel::cli::verbs().size());
    for (const auto& v : wsel::cli::verbs()) {
      CHECK(std::find(listed.begin(), listed.end(), v) != listed.end());
      CHECK(s["$defs"].contains("payload-" + v));
    }
  }
}

TEST_CASE("svg rendering") {
  using namespace wsel::plot;
  Figure f{"t", "x", "y", false, {{"a", {1, 2, 3}, {3, 2, 1}}}};
  const auto s = render_svg(f);
  CHECK(s == render_svg(f));
  CHECK(s.find("width=\"640\" height=\"400\"") != std::string::npos);
  CHECK(s.find("points=\"70.00,40.00 345.00,143.33 620.00,246.67\"") != std::string::npos);
  SECTION("empty and ragged series") {
    CHECK_THROWS_AS(render_svg(Figure{"t", "x", "y", false, {}}), PlotError);
    CHECK_THROWS_AS(render_svg(Figure{"t", "x", "y", false, {{"a", {}, {}}}}), PlotError);
    CHECK_THROWS_AS(render_svg(Figure{"t", "x", "y", false, {{"a", {1, 2}, {1}}}}), PlotError);
    CHECK_THROWS_AS(render_svg(Figure{"t", "x", "y", true, {{"a", {0, 1}, {1, 1}}}}), PlotError);
  }
  SECTION("labels are escaped") {
    Figure g{"a<b", "x", "y", false, {{"s&t", {1}, {1}}}};
    const auto out = render_svg(g);
    CHECK(out.find("a&lt;b") != std::string::npos);
    CHECK(out.find("s&amp;t") != std::string::npos);
  }
}

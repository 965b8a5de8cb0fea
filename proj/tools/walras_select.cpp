// walras-select: runs one scenario file and writes its report.
//
// Exit codes: 0 all asserted invariants hold, 1 an invariant or precondition
// failed (report still written), 2 malformed input (path printed), 3
// internal error.

#include "wsel/scenario.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using wsel::json;

namespace {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

int schema_error(const std::string& path, const std::string& what) {
  std::cerr << "schema error at " << (path.empty() ? "/" : path) << ": " << what << "\n";
  return 2;
}

// SchemaError messages already start with the path
int schema_error(const wsel::SchemaError& e) {
  std::cerr << "schema error at " << e.what() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-valued analysis and equilibrium scenarios"};
  std::string scenario_path, out_dir;
  wsel::cli::Overrides ov;
  std::uint64_t seed = 0;
  double mesh = 0, delta = 0, eps = 0;
  app.add_option("--scenario", scenario_path, "scenario JSON file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized suites");
  auto* mesh_opt = app.add_option("--mesh", mesh, "grid mesh h");
  auto* delta_opt = app.add_option("--delta", delta, "ball radius delta (>= 2h)");
  auto* eps_opt = app.add_option("--eps", eps, "tolerance eps");
  app.add_option("--out", out_dir, "output directory; report goes to stdout when omitted");
  app.add_flag("--trace", ov.trace, "record solver traces");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*seed_opt) ov.seed = seed;
  if (*mesh_opt) ov.h = mesh;
  if (*delta_opt) ov.delta = delta;
  if (*eps_opt) ov.eps = eps;

  std::string bytes;
  {
    std::ifstream f(scenario_path, std::ios::binary);
    if (!f) return schema_error("", "cannot read " + scenario_path);
    std::ostringstream ss;
    ss << f.rdbuf();
    bytes = ss.str();
  }
  json scenario;
  try {
    scenario = json::parse(bytes);
  } catch (const json::parse_error& e) {
    return schema_error("", std::string("invalid JSON: ") + e.what());
  }

  wsel::cli::Prepared prep;
  try {
    prep = wsel::cli::prepare(scenario, ov);
  } catch (const wsel::SchemaError& e) {
    return schema_error(e);
  } catch (const wsel::ParameterError& e) {
    return schema_error("/payload", e.what());
  }

  wsel::cli::RunResult res;
  try {
    res = prep.job();
  } catch (const wsel::PreconditionError& e) {
    res = {};
    res.outcome["error"] = e.what();
    res.pass = false;
  } catch (const wsel::SchemaError& e) {
    return schema_error(e);
  } catch (const wsel::ParameterError& e) {
    return schema_error("/payload", e.what());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }

  const std::string report_name = wsel::cli::output_name(scenario, "report", "report.json");
  const std::string csv_name = wsel::cli::output_name(scenario, "csv", prep.verb + ".csv");
  const std::string svg_name = wsel::cli::output_name(scenario, "svg", prep.verb + ".svg");
  json artifacts = json::object();
  std::string svg;
  if (!out_dir.empty()) {
    artifacts["report"] = report_name;
    if (!res.csv.empty()) artifacts["csv"] = csv_name;
    if (res.figure) {
      try {
        svg = wsel::plot::render_svg(*res.figure);
      } catch (const wsel::plot::PlotError& e) {
        return schema_error("/payload", std::string("plot: ") + e.what());
      }
      artifacts["svg"] = svg_name;
    }
    if (!res.trace.empty()) artifacts["trace"] = "trace.txt";
  }
  const json report = wsel::cli::make_report(prep, res, "sha256:" + sha256_hex(bytes), artifacts);
  const std::string text = report.dump(2) + "\n";
  try {
    if (out_dir.empty()) {
      std::cout << text;
      if (!res.trace.empty()) std::cerr << res.trace;
    } else {
      fs::create_directories(out_dir);
      write_file(fs::path(out_dir) / report_name, text);
      if (!res.csv.empty()) write_file(fs::path(out_dir) / csv_name, res.csv);
      if (res.figure) write_file(fs::path(out_dir) / svg_name, svg);
      if (!res.trace.empty()) write_file(fs::path(out_dir) / "trace.txt", res.trace);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  if (res.outcome.contains("error")) std::cerr << "precondition failed: " << res.outcome["error"].get<std::string>() << "\n";
  return res.pass ? 0 : 1;
}

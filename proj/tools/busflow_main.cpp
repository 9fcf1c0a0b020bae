#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "busflow/busflow.hpp"

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("BUSFLOW_OUT");
  return env ? env : "out";
}

void write_timing(const std::string& out_dir, double seconds) {
  std::ofstream(out_dir + "/timing.txt") << "wall_seconds = " << seconds << "\n";
}

int run_command(const std::string& config_path, const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  busflow::RunConfig cfg = busflow::parse_config(config_path);
  busflow::ResultBundle bundle = busflow::run_config(cfg);
  auto paths = busflow::write_outputs(bundle, out_dir);
  write_timing(out_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::cout << "wrote " << paths.size() << " files to " << out_dir << "\n";
  for (const busflow::RunOutput& r : bundle.runs)
    for (const busflow::DiagnosticsReport& rep : r.diagnostics)
      std::cout << "  [" << (rep.status == busflow::CheckStatus::Fail ? "FAIL" : "ok") << "] "
                << rep.name << (rep.note.empty() ? "" : " (" + rep.note + ")") << "\n";
  return 0;
}

int preset_command(const std::string& name, const busflow::PresetOverrides& ov,
                   const std::string& out_dir) {
  auto t0 = std::chrono::steady_clock::now();
  busflow::ResultBundle bundle = busflow::run_preset(name, ov);
  auto paths = busflow::write_outputs(bundle, out_dir);
  write_timing(out_dir, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::cout << bundle.results.dump(2) << "\n";
  std::cout << "wrote " << paths.size() << " files to " << out_dir << "\n";
  return 0;
}

struct CheckLine {
  std::string name;
  bool ok;
  std::string detail;
};

/// Model/grid/weight invariant suite for a config, no time marching.
std::vector<CheckLine> invariant_suite(const busflow::RunConfig& cfg) {
  using namespace busflow;
  std::vector<CheckLine> lines;
  const FluxModel& m = cfg.model;
  const double R = m.max_density();
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  {
    bool ok = std::abs(m.f(0.0)) <= 1e-14 && std::abs(m.f(R)) <= 1e-14;
    lines.push_back({"flux endpoints f(0)=f(R)=0", ok, ""});
  }
  {
    bool ok = true;
    for (int i = 0; i < 1000 && ok; ++i) {
      double s = u01(rng) * m.sigma, rho = u01(rng) * R;
      double direct = m.f(rho) - s * rho;
      ok = std::abs(m.flux(s, rho) - direct) <= 1e-15;
    }
    lines.push_back({"flux evaluation exact on samples", ok, ""});
  }
  {
    bool ok = true;
    double prev = m.omega(0.0);
    for (int i = 1; i <= 200; ++i) {
      double v = m.omega(R * i / 200.0);
      if (v > prev + 1e-12) ok = false;
      prev = v;
    }
    lines.push_back({"omega nonincreasing", ok, ""});
  }
  {
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      double s = u01(rng) * m.sigma;
      double q = u01(rng) * m.max_flux(s);
      auto [lo, hi] = m.constraint_roots(s, q);
      worst = std::max({worst, std::abs(m.flux(s, lo) - q), std::abs(m.flux(s, hi) - q)});
      if (lo > hi) ok = false;
    }
    ok = ok && worst <= 1e-10;
    lines.push_back({"constraint roots residual <= 1e-10", ok, "worst " + std::to_string(worst)});
  }
  {
    GapResult gap = m.constraint_gap();
    lines.push_back({"constraint gap positive", gap.satisfied,
                     "gap = " + std::to_string(gap.value)});
  }
  if (cfg.has_weight) {
    auto avg = discretize_weight(cfg.weight, cfg.grid);
    double mass = 0.0;
    for (double a : avg) mass += a * cfg.grid.dx;
    bool ok = std::abs(mass - cfg.weight.mass()) <= 1e-14;
    lines.push_back({"weight discretization conserves mass", ok, "mass = " + std::to_string(mass)});
  }
  {
    double L = cfl_constant(m, cfg.bulk_flux);
    double dt = cfg.cfl_target * cfg.grid.dx / L;
    lines.push_back({"CFL", dt * L <= cfg.grid.dx * (1 + 1e-12),
                     "dt = " + std::to_string(dt) + ", L = " + std::to_string(L)});
  }
  {
    double edge = cfg.grid.edge(cfg.grid.interface_edge);
    lines.push_back({"interface on a cell edge", std::abs(edge) <= 1e-9 * cfg.grid.dx, ""});
  }
  return lines;
}

int check_command(const std::string& config_path) {
  busflow::RunConfig cfg = busflow::parse_config(config_path);
  auto lines = invariant_suite(cfg);
  bool all_ok = true;
  for (const CheckLine& l : lines) {
    std::cout << "[" << (l.ok ? "ok" : "FAIL") << "] " << l.name
              << (l.detail.empty() ? "" : " (" + l.detail + ")") << "\n";
    all_ok = all_ok && l.ok;
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-volume solver for traffic flow with a nonlocally driven slow vehicle"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_out_dir(), preset_name, weight_name;
  int cells = 0, jobs = 1;

  CLI::App* run = app.add_subcommand("run", "execute a run described by a config file");
  run->add_option("--config", config_path, "config file path")->required();
  run->add_option("--out", out_dir, "output directory");

  CLI::App* preset = app.add_subcommand("preset", "execute a named experiment");
  preset->add_option("name", preset_name, "one of: validation convergence case1 case2 case3 "
                                          "compare_local weight_sweep artifact_probe")
      ->required();
  preset->add_option("--cells", cells, "cell count override (base count for convergence)");
  preset->add_option("--weight", weight_name, "weight override, e.g. mu4");
  preset->add_option("--jobs", jobs, "run independent configs concurrently");
  preset->add_option("--out", out_dir, "output directory");

  CLI::App* check = app.add_subcommand("check", "validate a config and its model invariants");
  check->add_option("--config", config_path, "config file path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, out_dir);
    if (check->parsed()) return check_command(config_path);
    busflow::PresetOverrides ov;
    if (cells > 0) ov.cells = cells;
    if (!weight_name.empty()) {
      if (weight_name.rfind("mu", 0) != 0)
        throw busflow::ConfigError("--weight: expected muK, got '" + weight_name + "'");
      ov.weight_k = std::stoi(weight_name.substr(2));
    }
    ov.jobs = jobs;
    return preset_command(preset_name, ov, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

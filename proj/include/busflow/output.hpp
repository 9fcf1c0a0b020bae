#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "busflow/config.hpp"
#include "busflow/diagnostics.hpp"
#include "busflow/experiments.hpp"

namespace busflow {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Columns: t,y,s,xi,q,interface_flux,constraint_active. Floats get 17
/// significant digits so a re-parse reproduces the doubles exactly.
inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,y,s,xi,q,interface_flux,constraint_active\n";
  std::string line;
  for (std::size_t n = 0; n < tr.t.size(); ++n) {
    line = detail::fmt17(tr.t[n]);
    line += ',';
    line += detail::fmt17(tr.y[n]);
    line += ',';
    line += detail::fmt17(tr.s[n]);
    line += ',';
    line += detail::fmt17(tr.xi[n]);
    line += ',';
    line += detail::fmt17(tr.q[n]);
    line += ',';
    line += detail::fmt17(tr.interface_flux[n]);
    line += ',';
    line += tr.constraint_active[n] ? '1' : '0';
    line += '\n';
    out << line;
  }
}

struct TrajectoryTable {
  std::vector<double> t, y, s, xi, q, interface_flux;
  std::vector<std::uint8_t> constraint_active;
};

inline TrajectoryTable read_trajectory_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  TrajectoryTable tb;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(detail::parse_double(cell, path));
    if (row.size() != 7) throw std::runtime_error(path + ": expected 7 columns");
    tb.t.push_back(row[0]);
    tb.y.push_back(row[1]);
    tb.s.push_back(row[2]);
    tb.xi.push_back(row[3]);
    tb.q.push_back(row[4]);
    tb.interface_flux.push_back(row[5]);
    tb.constraint_active.push_back(row[6] != 0.0 ? 1 : 0);
  }
  return tb;
}

/// Columns: x_center,rho,x_road (vehicle-frame center, density, road position).
inline void write_snapshot_csv(const std::string& path, const Grid& g,
                               const std::vector<double>& rho, double y_at_time) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "x_center,rho,x_road\n";
  for (int j = 0; j < g.cells; ++j) {
    double xc = g.center(j);
    out << detail::fmt17(xc) << ',' << detail::fmt17(rho[j]) << ','
        << detail::fmt17(xc + y_at_time) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Bundles
// ---------------------------------------------------------------------------

struct RunOutput {
  std::string name;
  RunConfig cfg;
  Trajectory traj;
  std::vector<DiagnosticsReport> diagnostics;
};

struct ResultBundle {
  std::string preset;  // empty for plain config runs
  json results;        // experiment-specific numbers
  std::vector<RunOutput> runs;
};

inline json report_to_json(const DiagnosticsReport& rep) {
  json j;
  j["name"] = rep.name;
  j["status"] = rep.status == CheckStatus::Pass
                    ? "pass"
                    : (rep.status == CheckStatus::Fail ? "fail" : "inapplicable");
  if (std::isfinite(rep.worst_margin)) j["worst_margin"] = rep.worst_margin;
  else j["worst_margin"] = nullptr;
  j["location"] = {{"step", rep.where.step}, {"cell", rep.where.cell}};
  if (std::isfinite(rep.where.k)) j["location"]["k"] = rep.where.k;
  if (!rep.note.empty()) j["note"] = rep.note;
  return j;
}

/// Deterministic summary (stable key order, no wall time, relative paths).
inline json summarize(const ResultBundle& b) {
  json top;
  top["schema"] = "busflow-summary-v1";
  top["preset"] = b.preset;
  top["results"] = b.results;
  top["runs"] = json::array();
  for (const RunOutput& r : b.runs) {
    json jr;
    jr["name"] = r.name;
    jr["cells"] = r.cfg.grid.cells;
    jr["dt"] = r.traj.dt;
    jr["steps"] = r.traj.steps;
    jr["final"] = {{"t", r.traj.final_state.t}, {"y", r.traj.final_state.y},
                   {"s", r.traj.final_state.s}, {"xi", r.traj.final_state.xi},
                   {"q", r.traj.final_state.q}};
    jr["mass"] = {{"initial", r.traj.initial_mass},
                  {"final", r.traj.final_mass},
                  {"boundary_inflow", r.traj.boundary_inflow},
                  {"boundary_outflow", r.traj.boundary_outflow},
                  {"drift", r.traj.mass_drift()}};
    json files;
    files["resolved_config"] = r.name + "/resolved_config.ini";
    files["trajectory"] = r.name + "/trajectory.csv";
    json snaps = json::array();
    for (std::size_t i = 0; i < r.traj.snapshots.size(); ++i) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03zu", i);
      json s;
      s["file"] = r.name + "/snapshot_" + idx + ".csv";
      s["actual_t"] = r.traj.snapshots[i].first;
      s["requested_t"] = i < r.cfg.snapshot_times.size() ? json(r.cfg.snapshot_times[i]) : json();
      snaps.push_back(s);
    }
    files["snapshots"] = snaps;
    jr["files"] = files;
    json diags = json::array();
    for (const DiagnosticsReport& rep : r.diagnostics) diags.push_back(report_to_json(rep));
    jr["diagnostics"] = diags;
    top["runs"].push_back(jr);
  }
  return top;
}

/// Writes trajectory/snapshot CSVs, per-run resolved configs and summary.json.
inline std::vector<std::string> write_outputs(const ResultBundle& b, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  fs::create_directories(out_dir);
  for (const RunOutput& r : b.runs) {
    fs::path dir = fs::path(out_dir) / r.name;
    fs::create_directories(dir);
    std::string cfg_path = (dir / "resolved_config.ini").string();
    std::ofstream(cfg_path, std::ios::binary) << emit_config(r.cfg);
    written.push_back(cfg_path);
    std::string traj_path = (dir / "trajectory.csv").string();
    write_trajectory_csv(traj_path, r.traj);
    written.push_back(traj_path);
    // y at the snapshot's actual time, from the recorded series
    for (std::size_t i = 0; i < r.traj.snapshots.size(); ++i) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03zu", i);
      double ts = r.traj.snapshots[i].first;
      double y_at = r.cfg.y0;
      for (std::size_t n = 0; n < r.traj.t.size(); ++n)
        if (r.traj.t[n] <= ts + 1e-15) y_at = r.traj.y[n];
      std::string p = (dir / (std::string("snapshot_") + idx + ".csv")).string();
      write_snapshot_csv(p, r.cfg.grid, r.traj.snapshots[i].second, y_at);
      written.push_back(p);
    }
  }
  std::string sum_path = (fs::path(out_dir) / "summary.json").string();
  std::ofstream(sum_path, std::ios::binary) << summarize(b).dump(2) << "\n";
  written.push_back(sum_path);
  return written;
}

// ---------------------------------------------------------------------------
// Preset driver
// ---------------------------------------------------------------------------

struct PresetOverrides {
  std::optional<int> cells;
  std::optional<int> weight_k;
  int jobs = 1;
};

namespace detail {

template <class Fn>
void parallel_for_index(int n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

inline std::vector<DiagnosticsReport> standard_diagnostics(const RunConfig& cfg,
                                                           const Trajectory& tr) {
  std::vector<DiagnosticsReport> reps;
  if (!tr.states.empty()) {
    reps.push_back(discrete_entropy_check(cfg, tr));
    double alpha = cfg.model.f.kind == CurveKind::Quadratic ? 2.0 * cfg.model.f.scale : 0.0;
    if (alpha > 0.0) reps.push_back(oslc_check(cfg, tr, alpha));
  }
  if (!tr.tv_series.empty()) {
    GapResult gap = cfg.model.constraint_gap();
    if (gap.satisfied)
      reps.push_back(bv_bound_check(cfg, tr, bv_bound_constant(cfg.model, gap.value)));
  }
  if (cfg.has_weight && cfg.mode != CouplingMode::Local)
    reps.push_back(xi_regularity_check(cfg, tr));
  return reps;
}

}  // namespace detail

/// Expands and executes one of the named experiments, returning everything
/// needed to write a result bundle.
inline ResultBundle run_preset(const std::string& name, const PresetOverrides& ov = {}) {
  ResultBundle b;
  b.preset = name;
  try {
    if (name == "validation") {
      RunConfig cfg = validation_config(ov.cells.value_or(1100), ov.weight_k.value_or(4));
      cfg.record_tv = true;
      Trajectory tr = run_coupled(cfg);
      double min_s = tr.s.empty() ? 0.0 : *std::min_element(tr.s.begin(), tr.s.end());
      double max_xi = tr.xi.empty() ? 0.0 : *std::max_element(tr.xi.begin(), tr.xi.end());
      b.results = {{"min_s", min_s}, {"max_xi", max_xi}};
      b.runs.push_back({"validation", cfg, std::move(tr), {}});
      b.runs.back().diagnostics = detail::standard_diagnostics(cfg, b.runs.back().traj);
    } else if (name == "convergence") {
      int base = ov.cells.value_or(160);
      const int levels = 7;
      RefinementStudy study;
      study.cells.resize(levels);
      study.e_rho.resize(levels);
      study.e_y.resize(levels);
      detail::parallel_for_index(levels, ov.jobs, [&](int l) {
        int cells = base << l;
        PairErrors e = paired_refinement_errors(validation_config(cells, ov.weight_k.value_or(4)));
        study.cells[l] = cells;
        study.e_rho[l] = e.e_rho;
        study.e_y[l] = e.e_y;
      });
      auto [orho, oy] = convergence_order(study);
      b.results = {{"cells", study.cells}, {"e_rho", study.e_rho}, {"e_y", study.e_y},
                   {"order_rho", orho},    {"order_y", oy}};
    } else if (name == "case1" || name == "case2" || name == "case3") {
      int which = name.back() - '0';
      RunConfig cfg = case_config(which, ov.cells.value_or(1000), ov.weight_k.value_or(3));
      cfg.record_tv = true;
      cfg.store_states = true;
      Trajectory tr = run_coupled(cfg);
      long active = 0;
      for (auto a : tr.constraint_active) active += a;
      b.results = {{"constraint_active_steps", active}, {"steps", tr.steps}};
      b.runs.push_back({name, cfg, std::move(tr), {}});
      b.runs.back().diagnostics = detail::standard_diagnostics(cfg, b.runs.back().traj);
    } else if (name == "compare_local") {
      RunConfig cfg = case_config(3, ov.cells.value_or(40960), ov.weight_k.value_or(3));
      Trajectory nl, loc;
      PairErrors e = paired_model_gap(cfg, &nl, &loc);
      b.results = {{"e1", e.e_rho}, {"einf", e.e_y}};
      RunConfig loc_cfg = cfg;
      loc_cfg.mode = CouplingMode::Local;
      b.runs.push_back({"nonlocal", cfg, std::move(nl), {}});
      b.runs.push_back({"local", loc_cfg, std::move(loc), {}});
    } else if (name == "weight_sweep") {
      std::vector<int> ks = {1, 2, 3, 4, 5};
      if (ov.weight_k) ks = {*ov.weight_k};
      int cells = ov.cells.value_or(40960);
      std::vector<Trajectory> nls(ks.size());
      std::vector<Trajectory> locs(ks.size());
      std::vector<WeightSweepRow> rows(ks.size());
      detail::parallel_for_index(static_cast<int>(ks.size()), ov.jobs, [&](int i) {
        RunConfig cfg = case_config(3, cells, ks[i]);
        PairErrors e = paired_model_gap(cfg, &nls[i], i == 0 ? &locs[i] : nullptr);
        rows[i] = {ks[i], e.e_rho, e.e_y};
      });
      json rows_json = json::array();
      for (const auto& r : rows)
        rows_json.push_back({{"k", r.k}, {"e1", r.e1}, {"einf", r.einf}});
      b.results = {{"rows", rows_json}};
      for (std::size_t i = 0; i < ks.size(); ++i) {
        RunConfig cfg = case_config(3, cells, ks[i]);
        b.runs.push_back({"mu" + std::to_string(ks[i]), cfg, std::move(nls[i]), {}});
      }
      RunConfig loc_cfg = case_config(3, cells, ks[0]);
      loc_cfg.mode = CouplingMode::Local;
      b.runs.push_back({"local", loc_cfg, std::move(locs[0]), {}});
    } else if (name == "artifact_probe") {
      std::vector<int> ks = {3, 4, 5};
      int cells = ov.cells.value_or(2048);
      std::vector<Trajectory> trs;
      auto rows = run_artifact_probe(ks, cells, 1.0 / 64, 0.3, &trs);
      json rows_json = json::array();
      for (const auto& r : rows) rows_json.push_back({{"k", r.k}, {"duration", r.duration}});
      b.results = {{"rows", rows_json}};
      for (std::size_t i = 0; i < ks.size(); ++i)
        b.runs.push_back({"mu" + std::to_string(ks[i]), artifact_config(ks[i], cells, 1.0 / 64, 0.3),
                          std::move(trs[i]),
                          {}});
    } else {
      throw ConfigError("preset: unknown preset '" + name + "'");
    }
  } catch (const std::exception& e) {
    throw std::runtime_error("preset '" + name + "': " + e.what());
  }
  return b;
}

/// Executes the run described by a parsed config (any coupling mode) together
/// with whatever diagnostics its recording flags allow.
inline ResultBundle run_config(const RunConfig& cfg) {
  ResultBundle b;
  Trajectory tr;
  switch (cfg.mode) {
    case CouplingMode::Nonlocal:
      tr = run_coupled(cfg);
      break;
    case CouplingMode::Local:
      tr = run_local(cfg);
      break;
    case CouplingMode::Splitting:
      tr = run_splitting(cfg, cfg.splitting_delta);
      break;
    case CouplingMode::Frozen: {
      if (cfg.frozen_series_file.empty())
        throw ConfigError("coupling.series_file: required for frozen mode");
      TrajectoryTable tb = read_trajectory_csv(cfg.frozen_series_file);
      tr = run_frozen(cfg, tb.s, tb.q);
      break;
    }
  }
  b.results = {{"final_y", tr.final_state.y}, {"final_s", tr.final_state.s}};
  b.runs.push_back({"run", cfg, std::move(tr), {}});
  b.runs.back().diagnostics = detail::standard_diagnostics(cfg, b.runs.back().traj);
  return b;
}

}  // namespace busflow

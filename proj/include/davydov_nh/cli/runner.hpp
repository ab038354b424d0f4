#pragma once

// Runs a sweep: one task per sweep value on a small thread pool, one CSV per
// value, then resolved_config.yaml, manifest.json and the optional comparison
// against the exact solvers.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "davydov_nh/cli/config.hpp"
#include "davydov_nh/cli/csv.hpp"
#include "davydov_nh/exact.hpp"
#include "davydov_nh/tdvp.hpp"
#include "davydov_nh/version.hpp"

namespace davydov_nh::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitTolerance = 4 };

struct ComparisonRow {
  double value = 0.0;
  std::string quantity;  // log10_norm | p_e
  double max_abs = 0.0;
  double rms = 0.0;
  double wall_time = 0.0;  // seconds, both solvers and I/O
  bool pass = false;
};

struct TaskResult {
  double value = 0.0;
  std::string output;  // file name inside the output directory
  double wall_time = 0.0;
  std::optional<ErrorKind> error;
  std::string message;
  std::optional<ComparisonRow> comparison;
  double max_imag = 0.0;  // spectrum runs
};

struct RunSummary {
  int exit_code = kExitOk;
  std::vector<TaskResult> tasks;
  double wall_time = 0.0;
};

/// Shortest round-trip spelling, used in file names.
inline std::string value_label(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool comparison_supported(const ExperimentConfig& c) {
  if (c.preset == Preset::NlzSpectrum) return false;
  if (c.kind == ModelKind::Jc) return true;
  return c.kind == ModelKind::Nlz && c.nlz.bath == "single";
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void deviation(ComparisonRow& row, const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  double worst = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(a[i] - b[i]);
    worst = std::max(worst, std::isnan(d) ? std::numeric_limits<double>::infinity() : d);
    sq += d * d;
  }
  row.max_abs = worst;
  row.rms = n ? std::sqrt(sq / static_cast<double>(n)) : 0.0;
}

inline void spectrum_task(const ExperimentConfig& c, const std::filesystem::path& dir, TaskResult& res) {
  const auto model = std::get<NlzModel>(build_model(c, res.value));
  const std::vector<double> times = c.spectrum.times();
  const SpectrumGrid grid = spectrum_scan(model, times, {model.non_hermiticity}, c.integrator.n_max);
  std::vector<std::string> header{"t", "max_imag"};
  const Index dim = grid.at(0, 0).size();
  for (Index i = 0; i < dim; ++i) {
    header.push_back("re_" + std::to_string(i + 1));
    header.push_back("im_" + std::to_string(i + 1));
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::vector<double> row{times[i], grid.max_imag(static_cast<Index>(i), 0)};
    for (const Complex& z : grid.at(i, 0)) {
      row.push_back(z.real());
      row.push_back(z.imag());
    }
    rows.push_back(std::move(row));
  }
  res.max_imag = grid.max_imag.maxCoeff();
  if (grid.failed.any()) {
    res.error = ErrorKind::NumericalInconsistency;
    res.message = "eigenvalue solver failed at some grid points";
  }
  write_csv(dir / res.output, header, rows);
}

inline void trajectory_task(const ExperimentConfig& c, const std::filesystem::path& dir, TaskResult& res) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec model = build_model(c, res.value);
  const IntegratorConfig cfg = c.integrator.to_config();
  const AnsatzState init =
      initial_state_for(model, c.integrator.multiplicity, c.integrator.seed, c.integrator.noise_radius);

  // Records are collected outside propagate so a throw keeps the partial run.
  Trajectory traj;
  try {
    const EvolutionResult ev = evolve(init, model, cfg, [&](const AnsatzState& st, double t) {
      traj.records.push_back(record_observables(st, t));
    });
    traj.error = ev.error;
    traj.error_message = ev.error_message;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Shape) throw;
    traj.error = e.kind();
    traj.error_message = e.what();
  }
  if (!traj.empty()) emit_csv(traj, dir / res.output);
  if (!traj.complete()) {
    res.error = traj.error;
    res.message = traj.error_message;
    return;
  }
  if (!c.output.compare) return;

  ComparisonRow row;
  row.value = res.value;
  std::vector<double> mine;
  std::vector<double> exact;
  std::vector<std::vector<double>> ref_rows;
  std::vector<std::string> ref_header;
  if (const auto* jc = std::get_if<JcModel>(&model)) {
    row.quantity = "p_e";
    mine = traj.normalized_population(0);
    const double span = cfg.t_end - cfg.t_start;
    const double dt_req = cfg.dt > 0.0 ? cfg.dt : default_time_step(model, cfg.t_start, cfg.t_end);
    const JcSolution sol = jc_single_excitation_solve(*jc, span, dt_req, cfg.sample_stride);
    const Eigen::VectorXd pe = jc_population(sol);
    exact.assign(pe.data(), pe.data() + pe.size());
    ref_header = {"t", "p_e"};
    for (std::size_t i = 0; i < exact.size(); ++i) ref_rows.push_back({cfg.t_start + sol.times[i], exact[i]});
  } else {
    row.quantity = "log10_norm";
    for (double n : traj.norms()) mine.push_back(std::log10(n));
    const FockTrajectory ft =
        fock_propagate(model, nlz_initial_fock(std::get<NlzModel>(model), c.integrator.n_max), cfg);
    if (!ft.trajectory.complete()) throw StepRejected("reference: " + ft.trajectory.error_message);
    ref_header = {"t", "norm"};
    for (const auto& r : ft.trajectory.records) {
      exact.push_back(std::log10(r.norm));
      ref_rows.push_back({r.time, r.norm});
    }
  }
  if (mine.size() != exact.size()) {
    throw NumericalInconsistency("comparison: sample grids differ (" + std::to_string(mine.size()) + " vs " +
                                 std::to_string(exact.size()) + ")");
  }
  deviation(row, mine, exact);
  row.wall_time = seconds_since(t0);
  row.pass = row.max_abs <= c.output.tolerance;
  const std::string stem = std::filesystem::path(res.output).stem().string();
  write_csv(dir / (stem + ".reference.csv"), ref_header, ref_rows);
  res.comparison = row;
}

inline nlohmann::ordered_json config_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["preset"] = to_string(c.preset);
  j["model_kind"] = to_string(c.kind);
  j["multiplicity"] = c.integrator.multiplicity;
  j["seed"] = c.integrator.seed;
  j["sweep"] = {{"parameter", c.sweep.parameter}, {"values", c.sweep.values}};
  return j;
}

}  // namespace detail

/// Runs every sweep value and writes the artifacts. Problems found before any
/// computation throw ConfigError; failures during the runs only set the exit code.
inline RunSummary run_experiment(const ExperimentConfig& c, unsigned jobs) {
  validate(c);
  if (c.output.compare && !comparison_supported(c)) {
    throw ConfigError("output.compare: no exact reference for this model (single-mode NLZ and JC only)");
  }
  const std::filesystem::path dir(c.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("output.directory: cannot create " + dir.string());
  }

  const auto t0 = std::chrono::steady_clock::now();
  const bool spectrum = c.preset == Preset::NlzSpectrum;
  RunSummary summary;
  summary.tasks.resize(c.sweep.values.size());
  for (std::size_t i = 0; i < summary.tasks.size(); ++i) {
    TaskResult& t = summary.tasks[i];
    t.value = c.sweep.values[i];
    t.output = (spectrum ? "spectrum_" : "") + c.sweep.parameter + "_" + value_label(t.value) + ".csv";
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < summary.tasks.size(); i = next++) {
      TaskResult& t = summary.tasks[i];
      spdlog::info("{} = {}: start", c.sweep.parameter, t.value);
      const auto start = std::chrono::steady_clock::now();
      try {
        if (spectrum) {
          detail::spectrum_task(c, dir, t);
        } else {
          detail::trajectory_task(c, dir, t);
        }
      } catch (const Error& e) {
        t.error = e.kind();
        t.message = e.what();
      } catch (const std::exception& e) {
        t.error = ErrorKind::NumericalInconsistency;
        t.message = e.what();
      }
      t.wall_time = detail::seconds_since(start);
      if (t.error) {
        spdlog::error("{} = {}: {} ({})", c.sweep.parameter, t.value, to_string(*t.error), t.message);
      } else {
        spdlog::info("{} = {}: done in {:.2f} s", c.sweep.parameter, t.value, t.wall_time);
      }
    }
  };
  const unsigned workers =
      std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(summary.tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  summary.wall_time = detail::seconds_since(t0);

  bool numerical = false;
  bool config = false;
  bool tolerance = false;
  for (const auto& t : summary.tasks) {
    if (t.error) {
      (t.error == ErrorKind::Config || t.error == ErrorKind::Io ? config : numerical) = true;
    }
    if (t.comparison && !t.comparison->pass) tolerance = true;
  }

  if (spectrum) {
    std::vector<std::vector<double>> rows;
    for (const auto& t : summary.tasks) rows.push_back({t.value, t.max_imag});
    write_csv(dir / "spectrum_summary.csv", {c.sweep.parameter, "max_imag"}, rows);
  }
  if (c.output.compare) {
    std::vector<std::vector<double>> rows;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& t : summary.tasks) {
      if (!t.comparison) continue;
      const ComparisonRow& r = *t.comparison;
      rows.push_back({r.value, r.max_abs, r.rms, r.wall_time, r.pass ? 1.0 : 0.0});
      arr.push_back({{c.sweep.parameter, r.value},
                     {"quantity", r.quantity},
                     {"max_abs_deviation", r.max_abs},
                     {"rms_deviation", r.rms},
                     {"wall_time_s", r.wall_time},
                     {"pass", r.pass}});
    }
    write_csv(dir / "comparison.csv", {c.sweep.parameter, "max_abs_deviation", "rms_deviation", "wall_time_s", "pass"},
              rows);
    nlohmann::ordered_json cj;
    cj["tolerance"] = c.output.tolerance;
    cj["rows"] = arr;
    write_text(dir / "comparison.json", cj.dump(2) + "\n");
  }

  write_text(dir / "resolved_config.yaml", emit_config(c));

  nlohmann::ordered_json m;
  m["program"] = "davydov-nh";
  m["version"] = std::string(kVersion);
  m["parameter_set"] = preset_description(c.preset);
  m["config"] = detail::config_json(c);
  m["jobs"] = workers;
  m["wall_time_s"] = summary.wall_time;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  nlohmann::ordered_json failures = nlohmann::ordered_json::array();
  for (const auto& t : summary.tasks) {
    outputs.push_back({{c.sweep.parameter, t.value}, {"file", t.output}, {"wall_time_s", t.wall_time}});
    if (t.error) {
      failures.push_back({{c.sweep.parameter, t.value}, {"error", std::string(to_string(*t.error))}, {"message", t.message}});
    }
  }
  m["outputs"] = outputs;
  m["failures"] = failures;
  if (spectrum && c.sweep.parameter == "g") {
    std::optional<double> first;
    for (const auto& t : summary.tasks) {
      if (t.max_imag > 1e-6 && (!first || t.value < *first)) first = t.value;
    }
    m["exceptional_threshold"] = first ? nlohmann::ordered_json(*first) : nlohmann::ordered_json(nullptr);
  }
  write_text(dir / "manifest.json", m.dump(2) + "\n");

  summary.exit_code = config ? kExitConfig : numerical ? kExitNumerical : tolerance ? kExitTolerance : kExitOk;
  return summary;
}

}  // namespace davydov_nh::cli

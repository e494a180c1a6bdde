#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rto/config.hpp"
#include "rto/gp.hpp"
#include "rto/plant.hpp"
#include "rto/safe_rto.hpp"
#include "rto/scenario.hpp"

namespace rto::harness {

/// One simulated second. Setpoints are the commands in force after any RTO
/// instance at this tick; the audit fields (true_total_power) come from the
/// plant, never from the optimizer.
struct TraceRecord {
  double t = 0.0;
  double demand = 0.0;
  std::vector<double> setpoints;
  std::vector<double> actual_loads;
  std::vector<double> measured_power;
  double true_total_power = 0.0;
  double ucb_total = 0.0;
  double z_used = 0.0;
  double total_uncertainty = 0.0;
  SolverStatus solver_status = SolverStatus::optimal;
  bool steady = false;
};

struct RunMetrics {
  double demand_rmse = 0.0;          // kW, demand vs achieved load
  int cap_violation_seconds = 0;
  double cap_violation_peak = 0.0;   // kW above the cap
  std::vector<double> curve_rmse;    // kW, per compressor
  double final_total_uncertainty = 0.0;
  double oracle_power_gap = 0.0;     // |E - E_oracle| / E_oracle after burn-in
  double total_energy_kwh = 0.0;
  // Steady-state admissions where |true power - mu| > sqrt(beta) sigma.
  int containment_checks = 0;
  int containment_violations = 0;
  int last_violation_t = -1;
  int rto_instances = 0;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  RunMetrics metrics;
  std::vector<gp::GpModel> initial_models;
  std::vector<gp::GpModel> final_models;
  // Total uncertainty after each instance's observation push (index = instance).
  std::vector<double> uncertainty_series;
  bool oracle = false;
};

std::vector<LoadRange> load_ranges(const plant::Plant& plant);

/// Integral over each capacity box of the posterior std (trapezoid rule,
/// `points` per compressor), summed over compressors. kW^2.
double total_uncertainty(const ModelSet& models, std::span<const LoadRange> ranges, int points = 100);

/// Closed loop: 1 s ticks, an RTO instance every rto_period_s, steady-state
/// gated GP updates, safe seeds at t = 0.
RunResult run(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo,
              std::uint64_t seed);

/// Same loop with the true power curves handed to the optimizer (sigma = 0,
/// z = 0, no learning).
RunResult run_oracle(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo,
                     std::uint64_t seed);

/// Rebuilds the metrics from a trace: replays the gated observations to get
/// the GP posteriors. `oracle_trace`, when given, fills oracle_power_gap.
RunMetrics compute_metrics(std::span<const TraceRecord> trace, const plant::Plant& plant, const AlgoConfig& algo,
                           bool oracle = false, std::span<const TraceRecord> oracle_trace = {},
                           double burn_in_s = 10000.0);

/// Energy (kWh) of the true total power over records with t >= from_s.
double total_energy_kwh(std::span<const TraceRecord> trace, double dt_s, double from_s = 0.0);

struct AblationSeries {
  double z = 0.0;
  std::vector<double> uncertainty;  // per RTO instance
  std::optional<int> instances_to_half;
  double final_uncertainty = 0.0;
};

/// One fixed-demand run per z with z forced constant.
std::vector<AblationSeries> z_ablation(const plant::Plant& plant, const AlgoConfig& algo,
                                       std::span<const double> z_values, std::uint64_t seed,
                                       const scenario::Scenario& scenario = scenario::builtin("fixed_z_ablation"));

std::string trace_csv(std::span<const TraceRecord> trace, std::size_t compressors);
std::vector<TraceRecord> parse_trace_csv(const std::string& text);
std::string metrics_json(const RunMetrics& m);
/// Per-compressor grid (101 points) of true curve vs posterior, for the
/// initial and the final models.
std::string curves_csv(const RunResult& result, const plant::Plant& plant);
std::string ablation_csv(std::span<const AblationSeries> series);

/// Writes trace.csv, metrics.json and curves.csv into `out_dir` (created if
/// missing). Throws IoError naming the failing path.
void emit(const RunResult& result, const plant::Plant& plant, const std::filesystem::path& out_dir);

}  // namespace rto::harness

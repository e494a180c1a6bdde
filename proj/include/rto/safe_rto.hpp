#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rto/gp.hpp"

namespace rto {

/// Capacity interval of one compressor, kW.
struct LoadRange {
  double min = 0.0;
  double max = 0.0;
};

/// Power-cap safety constraint: sum_i (mu_i + sqrt(beta) sigma_i) <= power_cap.
struct SafetyConfig {
  double power_cap = 1580.0;  // kW
  double delta = 0.05;
  int grid_size = 100;
  std::optional<double> beta_override;

  void validate() const;
};

struct ExploreConfig {
  double z_active = 1000.0;
  double demand_tolerance = 10.0;     // alpha, kW
  std::optional<double> trust_region;  // per-compressor step limit, kW

  void validate() const;
};

struct RtoConfig {
  SafetyConfig safety;
  ExploreConfig explore;
  // Power terms of the objective (mean and std) are expressed in multiples
  // of this unit; loads stay in kW. 1000 means MW.
  double power_unit_kw = 1000.0;
  int multistart_count = 8;
  std::uint64_t rng_seed = 0;
  // Feasibility tolerance of the solver, relative to power_cap.
  double constraint_tolerance = 1e-6;

  void validate() const;
};

/// Surrogate of one compressor's power curve as seen by the optimizer.
class PowerModel {
 public:
  virtual ~PowerModel() = default;
  virtual gp::PredictionWithGradient predict(double load) const = 0;
};

class GpPowerModel final : public PowerModel {
 public:
  explicit GpPowerModel(gp::GpModel model) : model_(std::move(model)) {}
  gp::PredictionWithGradient predict(double load) const override { return model_.predict_with_gradient(load); }
  const gp::GpModel& model() const { return model_; }

 private:
  gp::GpModel model_;
};

using ModelSet = std::vector<std::shared_ptr<const PowerModel>>;

ModelSet as_model_set(std::span<const gp::GpModel> models);

enum class SolverStatus { optimal, feasible_suboptimal, infeasible_relaxed };

std::string to_string(SolverStatus s);
SolverStatus solver_status_from_string(const std::string& s);

struct RtoDecision {
  std::vector<double> setpoints;   // kW
  std::vector<double> power_mean;  // kW, per compressor at the setpoints
  std::vector<double> power_std;   // kW
  double total_ucb = 0.0;          // kW
  double z_used = 0.0;
  double demand_gap = 0.0;         // |demand - sum(setpoints)|, kW
  double beta = 0.0;
  double objective = 0.0;
  SolverStatus solver_status = SolverStatus::optimal;
};

/// 2 ln(grid_size t^2 pi^2 / (6 delta)), or the override when set. t >= 1.
double beta_schedule(const SafetyConfig& cfg, int t);

/// Sum over compressors of the posterior std at each setpoint.
double uncertainty_term(const ModelSet& models, std::span<const double> setpoints);

/// [sum mu]^2 + [demand - sum x]^2 - z sum sigma, with mu and sigma divided
/// by `power_unit_kw` first.
double utility(const ModelSet& models, std::span<const double> setpoints, double demand, double z,
               double power_unit_kw = 1.0);

/// sum_i mu_i(x_i) + sqrt(beta) sigma_i(x_i), kW.
double safety_ucb(const ModelSet& models, std::span<const double> setpoints, double beta);

/// Per-compressor lattice shared by every compressor: step =
/// (widest range) / (grid_size - 1), points min_i + k*step <= max_i.
struct FeasibilityGrid {
  double step = 0.0;
  std::vector<std::vector<double>> loads;
};

FeasibilityGrid feasibility_grid(std::span<const LoadRange> ranges, int grid_size);

/// Lattice point with |sum x - demand| <= tolerance and safety_ucb <= cap
/// minimizing safety_ucb, if one exists. Exact over the lattice (dynamic
/// programming over the sum index).
std::optional<std::vector<double>> find_feasible_demand_point(const ModelSet& models, std::span<const LoadRange> ranges,
                                                              double demand, double tolerance, double beta,
                                                              const SafetyConfig& safety);

bool feasible_demand_point_exists(const ModelSet& models, std::span<const LoadRange> ranges, double demand,
                                  double tolerance, double beta, const SafetyConfig& safety);

/// z_active iff the demand equals each of the two previous instance demands
/// and a feasible demand point exists; 0 otherwise (also with < 2 history).
double adapt_z(std::span<const double> history, const ModelSet& models, std::span<const LoadRange> ranges, double demand,
               const ExploreConfig& explore, const SafetyConfig& safety, double beta);

/// One solution instance: minimize utility over the capacity boxes (and the
/// trust region around prev_setpoints when configured) subject to the UCB
/// cap. Falls back to prev_setpoints with infeasible_relaxed when no start
/// yields a UCB-feasible point. Deterministic in (inputs, cfg.rng_seed, t).
RtoDecision solve_instance(const ModelSet& models, std::span<const LoadRange> ranges, double demand,
                           std::span<const double> prev_setpoints, int t, double z, const RtoConfig& cfg);

/// Seed loads per compressor.
struct SeedPlan {
  std::vector<std::vector<double>> loads;

  /// {min, min + range/2, min + range/4} for each compressor.
  static SeedPlan standard(std::span<const LoadRange> ranges);
};

struct SeedSet {
  std::vector<std::vector<gp::Observation>> observations;
  std::vector<gp::KernelParams> params;
  std::vector<gp::GpModel> models;
};

/// Returns the true power of compressor `i` at `load`; only consulted for
/// the safe seed set.
using TruthProbe = std::function<double(std::size_t i, double load)>;

/// Builds the noise-free seed observations, fits each compressor's kernel
/// hyperparameters on them (lengthscale starting at half the range,
/// signal_std at the seed-power standard deviation) and returns the models.
/// Throws ParameterError if a seed lies outside its capacity box.
SeedSet initialize_safe_seeds(std::span<const LoadRange> ranges, const SeedPlan& plan, const TruthProbe& truth,
                              double noise_std);

}  // namespace rto

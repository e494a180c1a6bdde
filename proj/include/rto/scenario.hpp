#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rto::scenario {

/// Demand held constant from t_start until the next step.
struct ScenarioStep {
  double t_start = 0.0;  // s
  double demand = 0.0;   // kW
};

struct Scenario {
  std::string name;
  std::vector<ScenarioStep> steps;
  double horizon = 42000.0;  // s

  /// Throws ParameterError unless steps are non-empty, start at 0, have
  /// non-decreasing t_start and non-negative demand, and horizon >= last t_start.
  void validate() const;
};

/// Demand of the last step with t_start <= t (left-closed). Throws RangeError
/// outside [0, horizon].
double demand_at(const Scenario& s, double t);

/// "weekend", "step_jump" or "fixed_z_ablation"; LookupError otherwise.
Scenario builtin(const std::string& name);

/// CSV with header `t_start_s,demand_kw`, one row per step. The horizon is
/// not part of the format and defaults to 42000 s (or the last t_start if later).
Scenario parse_csv(const std::string& text, const std::string& name = "csv");
std::string to_csv(const Scenario& s);
Scenario load_csv(const std::filesystem::path& path);
void save_csv(const Scenario& s, const std::filesystem::path& path);

}  // namespace rto::scenario

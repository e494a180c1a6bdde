#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "rto/safe_rto.hpp"
#include "rto/ssd.hpp"

namespace rto {

/// Everything the closed loop needs besides the plant and the scenario.
struct AlgoConfig {
  RtoConfig rto;
  ssd::SsdConfig ssd;
  double noise_std_kw = 5.0;     // measurement noise and GP noise_std
  double rto_period_s = 250.0;
  double dt_s = 1.0;
  // Forces z to a constant (z-ablation); adapt_z is bypassed when set.
  std::optional<double> forced_z;

  void validate() const;
};

/// JSON keys (all optional): power_cap_kw, delta, grid_size, beta_override,
/// z_active, alpha_kw, trust_region_kw, multistart_count, rng_seed,
/// power_unit_kw, noise_std_kw, ssd_window, ssd_alpha, ssd_std_floor_kw,
/// rto_period_s. Unknown keys are rejected. Throws ConfigError with the
/// offending line.
AlgoConfig parse_algo_config(const std::string& text);
AlgoConfig load_algo_config(const std::filesystem::path& path);
std::string algo_config_json(const AlgoConfig& cfg);

}  // namespace rto

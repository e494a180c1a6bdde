#include "rto/config.hpp"

#include <set>

#include "json_util.hpp"
#include "rto/errors.hpp"

namespace rto {

void AlgoConfig::validate() const {
  rto.validate();
  ssd.validate();
  if (!(noise_std_kw >= 0.0)) throw ParameterError("noise_std_kw must be non-negative");
  if (!(dt_s > 0.0)) throw ParameterError("dt_s must be positive");
  if (!(rto_period_s >= dt_s)) throw ParameterError("rto_period_s must be at least one simulation tick");
  if (forced_z && !(*forced_z >= 0.0)) throw ParameterError("forced z must be non-negative");
}

AlgoConfig parse_algo_config(const std::string& text) {
  const auto doc = detail::parse_json(text);
  if (!doc.is_object()) throw ConfigError("algorithm config must be a JSON object", 1);

  static const std::set<std::string> known = {
      "power_cap_kw", "delta",         "grid_size",   "beta_override", "z_active",    "alpha_kw",
      "trust_region_kw", "multistart_count", "rng_seed", "power_unit_kw", "noise_std_kw", "ssd_window",
      "ssd_alpha",    "ssd_std_floor_kw", "rto_period_s"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "'", detail::line_of_key(text, key));
  }

  AlgoConfig cfg;
  std::string current;
  try {
    auto get = [&](const char* key, auto& target) {
      current = key;
      if (doc.contains(key)) target = doc.at(key).get<std::decay_t<decltype(target)>>();
    };
    get("power_cap_kw", cfg.rto.safety.power_cap);
    get("delta", cfg.rto.safety.delta);
    get("grid_size", cfg.rto.safety.grid_size);
    get("z_active", cfg.rto.explore.z_active);
    get("alpha_kw", cfg.rto.explore.demand_tolerance);
    get("multistart_count", cfg.rto.multistart_count);
    get("rng_seed", cfg.rto.rng_seed);
    get("power_unit_kw", cfg.rto.power_unit_kw);
    get("noise_std_kw", cfg.noise_std_kw);
    get("ssd_window", cfg.ssd.window);
    get("ssd_alpha", cfg.ssd.slope_alpha);
    get("ssd_std_floor_kw", cfg.ssd.min_std_floor);
    get("rto_period_s", cfg.rto_period_s);
    current = "beta_override";
    if (doc.contains("beta_override") && !doc.at("beta_override").is_null())
      cfg.rto.safety.beta_override = doc.at("beta_override").get<double>();
    current = "trust_region_kw";
    if (doc.contains("trust_region_kw") && !doc.at("trust_region_kw").is_null())
      cfg.rto.explore.trust_region = doc.at("trust_region_kw").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + current + "': " + e.what(), detail::line_of_key(text, current));
  }
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

AlgoConfig load_algo_config(const std::filesystem::path& path) { return parse_algo_config(detail::read_text(path)); }

std::string algo_config_json(const AlgoConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["power_cap_kw"] = cfg.rto.safety.power_cap;
  doc["delta"] = cfg.rto.safety.delta;
  doc["grid_size"] = cfg.rto.safety.grid_size;
  doc["beta_override"] = cfg.rto.safety.beta_override ? nlohmann::ordered_json(*cfg.rto.safety.beta_override) : nullptr;
  doc["z_active"] = cfg.rto.explore.z_active;
  doc["alpha_kw"] = cfg.rto.explore.demand_tolerance;
  doc["trust_region_kw"] =
      cfg.rto.explore.trust_region ? nlohmann::ordered_json(*cfg.rto.explore.trust_region) : nullptr;
  doc["multistart_count"] = cfg.rto.multistart_count;
  doc["rng_seed"] = cfg.rto.rng_seed;
  doc["power_unit_kw"] = cfg.rto.power_unit_kw;
  doc["noise_std_kw"] = cfg.noise_std_kw;
  doc["ssd_window"] = cfg.ssd.window;
  doc["ssd_alpha"] = cfg.ssd.slope_alpha;
  doc["ssd_std_floor_kw"] = cfg.ssd.min_std_floor;
  doc["rto_period_s"] = cfg.rto_period_s;
  return doc.dump(2) + "\n";
}

}  // namespace rto

#include "rto/plant.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "rto/errors.hpp"

namespace rto::plant {

std::string to_string(SizeClass c) {
  switch (c) {
    case SizeClass::small: return "small";
    case SizeClass::medium: return "medium";
    case SizeClass::large: return "large";
  }
  return "large";
}

SizeClass size_class_from_string(const std::string& s) {
  if (s == "small") return SizeClass::small;
  if (s == "medium") return SizeClass::medium;
  if (s == "large") return SizeClass::large;
  throw ParameterError("unknown compressor size class '" + s + "'");
}

void CompressorSpec::validate() const {
  if (!(min_load < max_load) || !std::isfinite(min_load) || !std::isfinite(max_load))
    throw ParameterError("compressor capacity box must satisfy min_load < max_load");
  if (!(tau > 0.0)) throw ParameterError("compressor tau must be positive");
  // Quadratic slope is linear in load, so checking both ends suffices.
  if (!(power_slope(min_load) > 0.0) || !(power_slope(max_load) > 0.0))
    throw ParameterError("compressor power curve must be strictly increasing on its capacity box");
}

Plant default_plant() {
  // Part-load COP 1.70-1.80 falling to about 1.6 at full load.
  return {
      {SizeClass::small, 56.0, 220.0, {-1.060393, 0.598211, 1.6e-4}, 50.0},
      {SizeClass::medium, 237.0, 537.0, {-4.746871, 0.572984, 1.2e-4}, 50.0},
      {SizeClass::large, 194.0, 795.0, {-1.721075, 0.546967, 0.9e-4}, 50.0},
      {SizeClass::large, 194.0, 795.0, {0.666642, 0.548592, 1.0e-4}, 50.0},
      {SizeClass::large, 194.0, 795.0, {3.565116, 0.548518, 1.1e-4}, 50.0},
  };
}

double total_min_load(const Plant& plant) {
  double s = 0.0;
  for (const auto& c : plant) s += c.min_load;
  return s;
}

double total_max_load(const Plant& plant) {
  double s = 0.0;
  for (const auto& c : plant) s += c.max_load;
  return s;
}

PlantState initial_state(const Plant& plant, std::uint64_t seed) {
  PlantState s;
  for (const auto& c : plant) s.actual_loads.push_back(c.min_load);
  s.commanded_loads = s.actual_loads;
  s.rng.seed(seed);
  return s;
}

PlantState step(PlantState state, const Plant& plant, double dt) {
  if (!(dt > 0.0)) throw ParameterError("plant step needs dt > 0");
  for (std::size_t i = 0; i < plant.size(); ++i) {
    const double gain = 1.0 - std::exp(-dt / plant[i].tau);
    state.actual_loads[i] += (state.commanded_loads[i] - state.actual_loads[i]) * gain;
  }
  state.clock += dt;
  return state;
}

std::vector<double> measure_power(PlantState& state, const Plant& plant, double noise_std) {
  if (!(noise_std >= 0.0)) throw ParameterError("noise_std must be non-negative");
  std::vector<double> out(plant.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < plant.size(); ++i) {
    out[i] = plant[i].power(state.actual_loads[i]);
    if (noise_std > 0.0) out[i] += noise_std * noise(state.rng);
  }
  return out;
}

double true_total_power(const PlantState& state, const Plant& plant) {
  double s = 0.0;
  for (std::size_t i = 0; i < plant.size(); ++i) s += plant[i].power(state.actual_loads[i]);
  return s;
}

Plant parse_plant_config(const std::string& text) {
  const auto doc = detail::parse_json(text);
  static const std::set<std::string> known = {"size_class", "min_kw", "max_kw", "a", "b", "c", "tau_s"};
  Plant plant;
  try {
    const auto& list = doc.at("compressors");
    if (!list.is_array() || list.empty()) throw ConfigError("'compressors' must be a non-empty array", detail::line_of_key(text, "compressors"));
    for (const auto& item : list) {
      if (!item.is_object()) throw ConfigError("compressor entries must be objects", detail::line_of_key(text, "compressors"));
      for (const auto& [key, value] : item.items()) {
        if (!known.contains(key)) throw ConfigError("unknown compressor key '" + key + "'", detail::line_of_key(text, key));
      }
      CompressorSpec c;
      c.size_class = size_class_from_string(item.at("size_class").get<std::string>());
      c.min_load = item.at("min_kw").get<double>();
      c.max_load = item.at("max_kw").get<double>();
      c.power_poly = {item.at("a").get<double>(), item.at("b").get<double>(), item.at("c").get<double>()};
      c.tau = item.value("tau_s", 50.0);
      c.validate();
      plant.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plant config: ") + e.what(), detail::line_of_error(text, e));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("plant config: ") + e.what(), detail::line_of_key(text, "compressors"));
  }
  return plant;
}

Plant load_plant_config(const std::filesystem::path& path) {
  return parse_plant_config(detail::read_text(path));
}

std::string plant_config_json(const Plant& plant) {
  nlohmann::ordered_json doc;
  doc["compressors"] = nlohmann::ordered_json::array();
  for (const auto& c : plant) {
    doc["compressors"].push_back({{"size_class", to_string(c.size_class)},
                                  {"min_kw", c.min_load},
                                  {"max_kw", c.max_load},
                                  {"a", c.power_poly[0]},
                                  {"b", c.power_poly[1]},
                                  {"c", c.power_poly[2]},
                                  {"tau_s", c.tau}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace rto::plant

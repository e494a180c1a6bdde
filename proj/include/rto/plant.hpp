#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace rto::plant {

enum class SizeClass { small, medium, large };

std::string to_string(SizeClass c);
SizeClass size_class_from_string(const std::string& s);

/// One screw compressor. The power polynomial is the hidden ground truth:
/// P(x) = a + b x + c x^2 with x the cooling load, both in kW.
struct CompressorSpec {
  SizeClass size_class = SizeClass::large;
  double min_load = 0.0;
  double max_load = 0.0;
  std::array<double, 3> power_poly{};  // a, b, c
  double tau = 50.0;                   // s

  double power(double load) const { return power_poly[0] + load * (power_poly[1] + load * power_poly[2]); }
  double power_slope(double load) const { return power_poly[1] + 2.0 * power_poly[2] * load; }
  double range() const { return max_load - min_load; }

  /// Throws ParameterError on an empty box, tau <= 0, or a power curve that
  /// is not strictly increasing on the box.
  void validate() const;
};

using Plant = std::vector<CompressorSpec>;

struct PlantState {
  double clock = 0.0;
  std::vector<double> actual_loads;
  std::vector<double> commanded_loads;
  std::mt19937_64 rng;
};

/// 1 small + 1 medium + 3 large compressors with Table-1 capacity boxes.
/// Quadratic curves are calibrated so that the sum of full-load powers is
/// 1975 kW (80% of it is the 1580 kW power cap), tau = 50 s.
Plant default_plant();

double total_min_load(const Plant& plant);
double total_max_load(const Plant& plant);

/// All compressors resting at their minimum load, commands equal to actuals.
PlantState initial_state(const Plant& plant, std::uint64_t seed);

/// Exact discretization of first-order lag towards the commanded loads.
PlantState step(PlantState state, const Plant& plant, double dt);

/// True power per compressor plus N(0, noise_std^2) noise; advances the
/// state's generator.
std::vector<double> measure_power(PlantState& state, const Plant& plant, double noise_std);

/// Ground-truth total power at the actual loads. Audit-only.
double true_total_power(const PlantState& state, const Plant& plant);

/// Plant config (JSON): {"compressors": [{"size_class", "min_kw", "max_kw",
/// "a", "b", "c", "tau_s"}, ...]}. Throws ConfigError with a line number on
/// malformed input and IoError when the file cannot be read.
Plant parse_plant_config(const std::string& text);
Plant load_plant_config(const std::filesystem::path& path);
std::string plant_config_json(const Plant& plant);

}  // namespace rto::plant

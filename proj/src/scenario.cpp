#include "rto/scenario.hpp"

#include <cmath>
#include <sstream>

#include "json_util.hpp"
#include "rto/errors.hpp"

namespace rto::scenario {

void Scenario::validate() const {
  if (steps.empty()) throw ParameterError("scenario '" + name + "' has no steps");
  if (steps.front().t_start != 0.0) throw ParameterError("scenario '" + name + "' must start at t = 0");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!std::isfinite(steps[i].t_start) || !std::isfinite(steps[i].demand))
      throw ParameterError("scenario step " + std::to_string(i) + " is not finite");
    if (steps[i].demand < 0.0) throw ParameterError("scenario step " + std::to_string(i) + " has negative demand");
    if (i > 0 && steps[i].t_start < steps[i - 1].t_start)
      throw ParameterError("scenario step " + std::to_string(i) + " starts before its predecessor");
  }
  if (!(horizon >= steps.back().t_start)) throw ParameterError("scenario horizon precedes its last step");
}

double demand_at(const Scenario& s, double t) {
  if (!(t >= 0.0 && t <= s.horizon))
    throw RangeError("time " + std::to_string(t) + " s outside scenario horizon [0, " + std::to_string(s.horizon) + "]");
  double demand = s.steps.front().demand;
  for (const auto& step : s.steps) {
    if (step.t_start > t) break;
    demand = step.demand;
  }
  return demand;
}

Scenario builtin(const std::string& name) {
  Scenario s;
  s.name = name;
  s.horizon = 42000.0;
  if (name == "weekend") {
    // Synthesized three-day profile compressed to the horizon: a gradual
    // climb, near-capacity plateaus, a mid-run dip and late fluctuations.
    s.steps = {{0, 1400},     {1500, 1500},  {3000, 1650},  {4500, 1800},  {6000, 1950},  {7500, 2100},
               {9000, 2000},  {10000, 2250}, {11500, 2400}, {13000, 2550}, {14500, 2700}, {17500, 2650},
               {19000, 2800}, {21000, 2450}, {22500, 2000}, {24000, 1850}, {25500, 2150}, {27000, 2500},
               {28500, 2750}, {30500, 2600}, {32000, 2300}, {33250, 2550}, {34750, 2850}, {36500, 2400},
               {38000, 2100}, {39500, 1900}, {41000, 1750}};
  } else if (name == "step_jump") {
    s.steps = {{0, 1200}, {2500, 2600}};
  } else if (name == "fixed_z_ablation") {
    s.steps = {{0, 1600}};
  } else {
    throw LookupError("unknown builtin scenario '" + name + "' (expected weekend, step_jump or fixed_z_ablation)");
  }
  s.validate();
  return s;
}

Scenario parse_csv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  Scenario s;
  s.name = name;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line != "t_start_s,demand_kw") throw ConfigError("expected header 't_start_s,demand_kw'", line_no);
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ConfigError("expected two comma-separated fields", line_no);
    try {
      s.steps.push_back({detail::parse_double(std::string_view(line).substr(0, comma)),
                         detail::parse_double(std::string_view(line).substr(comma + 1))});
    } catch (const ParameterError& e) {
      throw ConfigError(e.what(), line_no);
    }
  }
  if (!header) throw ConfigError("empty scenario file", 1);
  if (!s.steps.empty()) s.horizon = std::max(42000.0, s.steps.back().t_start);
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

std::string to_csv(const Scenario& s) {
  std::string out = "t_start_s,demand_kw\n";
  for (const auto& step : s.steps) {
    out += detail::format_double(step.t_start) + "," + detail::format_double(step.demand) + "\n";
  }
  return out;
}

Scenario load_csv(const std::filesystem::path& path) {
  return parse_csv(detail::read_text(path), path.stem().string());
}

void save_csv(const Scenario& s, const std::filesystem::path& path) { detail::write_text(path, to_csv(s)); }

}  // namespace rto::scenario

#include "rto/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_util.hpp"
#include "rto/errors.hpp"
#include "rto/ssd.hpp"

namespace rto::harness {

namespace {

// The oracle's view of a compressor: the true curve with zero uncertainty.
class ExactPowerModel final : public PowerModel {
 public:
  explicit ExactPowerModel(plant::CompressorSpec spec) : spec_(spec) {}
  gp::PredictionWithGradient predict(double load) const override {
    return {spec_.power(load), 0.0, spec_.power_slope(load), 0.0};
  }

 private:
  plant::CompressorSpec spec_;
};

ModelSet exact_models(const plant::Plant& plant) {
  ModelSet out;
  for (const auto& c : plant) out.push_back(std::make_shared<ExactPowerModel>(c));
  return out;
}

SeedSet seed_models(const plant::Plant& plant, const std::vector<LoadRange>& ranges, double noise_std) {
  const auto truth = [&plant](std::size_t i, double load) { return plant[i].power(load); };
  return initialize_safe_seeds(ranges, SeedPlan::standard(ranges), truth, noise_std);
}

long long ticks_of(double seconds, double dt) { return std::llround(seconds / dt); }

// Window of the last `window` measured powers of compressor i ending at record `end`.
std::vector<double> window_of(std::span<const TraceRecord> trace, std::size_t end, std::size_t i, int window) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(window));
  for (std::size_t k = end + 1 - static_cast<std::size_t>(window); k <= end; ++k) w.push_back(trace[k].measured_power[i]);
  return w;
}

bool all_steady(std::span<const TraceRecord> trace, std::size_t end, const ssd::SsdConfig& cfg) {
  if (end + 1 < static_cast<std::size_t>(cfg.window)) return false;
  for (std::size_t i = 0; i < trace[end].measured_power.size(); ++i) {
    if (!ssd::is_steady(window_of(trace, end, i, cfg.window), cfg)) return false;
  }
  return true;
}

// Observations admitted at record `end`: current actual load, window-mean power.
std::vector<gp::Observation> gated_observations(std::span<const TraceRecord> trace, std::size_t end, int window) {
  std::vector<gp::Observation> obs;
  for (std::size_t i = 0; i < trace[end].measured_power.size(); ++i) {
    const auto w = window_of(trace, end, i, window);
    double sum = 0.0;
    for (double v : w) sum += v;
    obs.push_back({trace[end].actual_loads[i], sum / static_cast<double>(window), false});
  }
  return obs;
}

void validate_inputs(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo) {
  scenario.validate();
  algo.validate();
  if (plant.empty()) throw ParameterError("plant has no compressors");
  for (const auto& c : plant) c.validate();
}

RunResult simulate(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo,
                   std::uint64_t seed, bool oracle) {
  validate_inputs(scenario, plant, algo);
  const auto ranges = load_ranges(plant);
  const std::size_t n = plant.size();

  RunResult result;
  result.oracle = oracle;
  const auto seeds = seed_models(plant, ranges, algo.noise_std_kw);
  std::vector<gp::GpModel> models = seeds.models;
  result.initial_models = models;
  ModelSet view = oracle ? exact_models(plant) : as_model_set(models);

  auto state = plant::initial_state(plant, seed);
  const long long total_ticks = ticks_of(scenario.horizon, algo.dt_s);
  const long long period = ticks_of(algo.rto_period_s, algo.dt_s);
  std::vector<double> demand_history;
  RtoDecision decision;
  double uncertainty = 0.0;

  result.trace.reserve(static_cast<std::size_t>(total_ticks));
  for (long long tick = 0; tick < total_ticks; ++tick) {
    const double t = static_cast<double>(tick) * algo.dt_s;
    TraceRecord& rec = result.trace.emplace_back();
    rec.t = t;
    rec.demand = scenario::demand_at(scenario, t);
    rec.actual_loads = state.actual_loads;
    rec.measured_power = plant::measure_power(state, plant, algo.noise_std_kw);
    rec.true_total_power = plant::true_total_power(state, plant);
    const auto idx = static_cast<std::size_t>(tick);
    rec.steady = all_steady(result.trace, idx, algo.ssd);

    if (tick % period == 0) {
      const long long k = tick / period;
      if (!oracle && k > 0 && rec.steady) {
        const auto obs = gated_observations(result.trace, idx, algo.ssd.window);
        for (std::size_t i = 0; i < n; ++i) models[i] = models[i].updated(std::span(&obs[i], 1));
        view = as_model_set(models);
      }
      const int instance = static_cast<int>(k) + 1;
      const double beta = beta_schedule(algo.rto.safety, instance);
      double z = 0.0;
      if (algo.forced_z)
        z = *algo.forced_z;
      else if (!oracle)
        z = adapt_z(demand_history, view, ranges, rec.demand, algo.rto.explore, algo.rto.safety, beta);
      if (oracle) z = 0.0;
      decision = solve_instance(view, ranges, rec.demand, state.commanded_loads, instance, z, algo.rto);
      state.commanded_loads = decision.setpoints;
      demand_history.push_back(rec.demand);
      uncertainty = oracle ? 0.0 : total_uncertainty(view, ranges);
      result.uncertainty_series.push_back(uncertainty);
    }

    rec.setpoints = state.commanded_loads;
    rec.ucb_total = decision.total_ucb;
    rec.z_used = decision.z_used;
    rec.total_uncertainty = uncertainty;
    rec.solver_status = decision.solver_status;
    state = plant::step(std::move(state), plant, algo.dt_s);
  }

  result.final_models = models;
  result.metrics = compute_metrics(result.trace, plant, algo, oracle);
  return result;
}

double curve_rmse(const gp::GpModel& model, const plant::CompressorSpec& spec) {
  double lo = spec.max_load;
  double hi = spec.min_load;
  for (const auto& o : model.data()) {
    lo = std::min(lo, o.load);
    hi = std::max(hi, o.load);
  }
  const double ell = model.params().lengthscale;
  lo = std::max(spec.min_load, lo - ell);
  hi = std::min(spec.max_load, hi + ell);
  constexpr int points = 101;
  double sq = 0.0;
  for (int k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * k / (points - 1);
    const double err = model.predict(x).mean - spec.power(x);
    sq += err * err;
  }
  return std::sqrt(sq / points);
}

}  // namespace

std::vector<LoadRange> load_ranges(const plant::Plant& plant) {
  std::vector<LoadRange> out;
  for (const auto& c : plant) out.push_back({c.min_load, c.max_load});
  return out;
}

double total_uncertainty(const ModelSet& models, std::span<const LoadRange> ranges, int points) {
  if (points < 2) throw ParameterError("total_uncertainty needs at least 2 grid points");
  double total = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double h = (ranges[i].max - ranges[i].min) / (points - 1);
    double prev = models[i]->predict(ranges[i].min).std;
    for (int k = 1; k < points; ++k) {
      const double cur = models[i]->predict(ranges[i].min + k * h).std;
      total += 0.5 * h * (prev + cur);
      prev = cur;
    }
  }
  return total;
}

RunResult run(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo,
              std::uint64_t seed) {
  return simulate(scenario, plant, algo, seed, false);
}

RunResult run_oracle(const scenario::Scenario& scenario, const plant::Plant& plant, const AlgoConfig& algo,
                     std::uint64_t seed) {
  return simulate(scenario, plant, algo, seed, true);
}

double total_energy_kwh(std::span<const TraceRecord> trace, double dt_s, double from_s) {
  double e = 0.0;
  for (const auto& r : trace) {
    if (r.t >= from_s) e += r.true_total_power * dt_s;
  }
  return e / 3600.0;
}

RunMetrics compute_metrics(std::span<const TraceRecord> trace, const plant::Plant& plant, const AlgoConfig& algo,
                           bool oracle, std::span<const TraceRecord> oracle_trace, double burn_in_s) {
  RunMetrics m;
  const std::size_t n = plant.size();
  const double cap = algo.rto.safety.power_cap;
  double sq = 0.0;
  for (const auto& r : trace) {
    double load = 0.0;
    for (double x : r.actual_loads) load += x;
    sq += (r.demand - load) * (r.demand - load);
    if (r.true_total_power > cap) {
      ++m.cap_violation_seconds;
      m.cap_violation_peak = std::max(m.cap_violation_peak, r.true_total_power - cap);
      m.last_violation_t = static_cast<int>(r.t);
    }
  }
  if (!trace.empty()) m.demand_rmse = std::sqrt(sq / static_cast<double>(trace.size()));
  m.total_energy_kwh = total_energy_kwh(trace, algo.dt_s);

  const long long period = ticks_of(algo.rto_period_s, algo.dt_s);
  const auto ranges = load_ranges(plant);
  m.curve_rmse.assign(n, 0.0);
  if (oracle) {
    for (std::size_t idx = 0; idx < trace.size(); idx += static_cast<std::size_t>(period)) ++m.rto_instances;
  } else {
    std::vector<gp::GpModel> models = seed_models(plant, ranges, algo.noise_std_kw).models;
    for (std::size_t idx = 0; idx < trace.size(); idx += static_cast<std::size_t>(period)) {
      ++m.rto_instances;
      if (idx == 0 || !trace[idx].steady) continue;
      const auto obs = gated_observations(trace, idx, algo.ssd.window);
      const double root = std::sqrt(beta_schedule(algo.rto.safety, static_cast<int>(idx / static_cast<std::size_t>(period)) + 1));
      for (std::size_t i = 0; i < n; ++i) {
        const auto p = models[i].predict(obs[i].load);
        ++m.containment_checks;
        if (std::abs(plant[i].power(obs[i].load) - p.mean) > root * p.std) ++m.containment_violations;
        models[i] = models[i].updated(std::span(&obs[i], 1));
      }
    }
    for (std::size_t i = 0; i < n; ++i) m.curve_rmse[i] = curve_rmse(models[i], plant[i]);
    m.final_total_uncertainty = total_uncertainty(as_model_set(models), ranges);
  }

  if (!oracle_trace.empty()) {
    const double mine = total_energy_kwh(trace, algo.dt_s, burn_in_s);
    const double theirs = total_energy_kwh(oracle_trace, algo.dt_s, burn_in_s);
    m.oracle_power_gap = theirs > 0.0 ? std::abs(mine - theirs) / theirs : 0.0;
  }
  return m;
}

std::vector<AblationSeries> z_ablation(const plant::Plant& plant, const AlgoConfig& algo,
                                       std::span<const double> z_values, std::uint64_t seed,
                                       const scenario::Scenario& scenario) {
  if (z_values.size() < 2) throw ParameterError("z ablation needs at least two z values");
  std::vector<AblationSeries> out;
  for (double z : z_values) {
    AlgoConfig cfg = algo;
    cfg.forced_z = z;
    const auto result = run(scenario, plant, cfg, seed);
    AblationSeries s;
    s.z = z;
    s.uncertainty = result.uncertainty_series;
    s.final_uncertainty = s.uncertainty.empty() ? 0.0 : s.uncertainty.back();
    for (std::size_t k = 0; k < s.uncertainty.size(); ++k) {
      if (s.uncertainty[k] <= 0.5 * s.uncertainty.front()) {
        s.instances_to_half = static_cast<int>(k);
        break;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string trace_csv(std::span<const TraceRecord> trace, std::size_t compressors) {
  std::string out = "t_s,demand_kw";
  for (const char* prefix : {"setpoint_kw_", "actual_load_kw_", "measured_power_kw_"}) {
    for (std::size_t i = 0; i < compressors; ++i) out += "," + std::string(prefix) + std::to_string(i);
  }
  out += ",true_total_power_kw,ucb_total_kw,z_used,total_uncertainty,solver_status,steady\n";
  using detail::format_double;
  for (const auto& r : trace) {
    out += format_double(r.t) + "," + format_double(r.demand);
    for (const auto* v : {&r.setpoints, &r.actual_loads, &r.measured_power}) {
      for (double x : *v) out += "," + format_double(x);
    }
    out += "," + format_double(r.true_total_power) + "," + format_double(r.ucb_total) + "," + format_double(r.z_used) +
           "," + format_double(r.total_uncertainty) + "," + to_string(r.solver_status) + "," + (r.steady ? "1" : "0") +
           "\n";
  }
  return out;
}

std::vector<TraceRecord> parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty trace file", 1);
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = line.find("setpoint_kw_", pos)) != std::string::npos; ++pos) ++n;
  const std::size_t fields = 2 + 3 * n + 6;

  std::vector<TraceRecord> trace;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != fields) throw ConfigError("expected " + std::to_string(fields) + " fields", line_no);
    try {
      TraceRecord r;
      std::size_t c = 0;
      r.t = detail::parse_double(cells[c++]);
      r.demand = detail::parse_double(cells[c++]);
      for (auto* v : {&r.setpoints, &r.actual_loads, &r.measured_power}) {
        for (std::size_t i = 0; i < n; ++i) v->push_back(detail::parse_double(cells[c++]));
      }
      r.true_total_power = detail::parse_double(cells[c++]);
      r.ucb_total = detail::parse_double(cells[c++]);
      r.z_used = detail::parse_double(cells[c++]);
      r.total_uncertainty = detail::parse_double(cells[c++]);
      r.solver_status = solver_status_from_string(cells[c++]);
      r.steady = cells[c++] == "1";
      trace.push_back(std::move(r));
    } catch (const ParameterError& e) {
      throw ConfigError(e.what(), line_no);
    }
  }
  return trace;
}

std::string metrics_json(const RunMetrics& m) {
  nlohmann::ordered_json doc;
  doc["demand_rmse_kw"] = m.demand_rmse;
  doc["cap_violation_seconds"] = m.cap_violation_seconds;
  doc["cap_violation_peak_kw"] = m.cap_violation_peak;
  doc["last_violation_t_s"] = m.last_violation_t;
  doc["curve_rmse_kw"] = m.curve_rmse;
  doc["final_total_uncertainty"] = m.final_total_uncertainty;
  doc["oracle_power_gap"] = m.oracle_power_gap;
  doc["total_energy_kwh"] = m.total_energy_kwh;
  doc["containment_checks"] = m.containment_checks;
  doc["containment_violations"] = m.containment_violations;
  doc["rto_instances"] = m.rto_instances;
  return doc.dump(2) + "\n";
}

std::string curves_csv(const RunResult& result, const plant::Plant& plant) {
  std::string out = "stage,compressor,load_kw,true_power_kw,posterior_mean_kw,posterior_std_kw\n";
  using detail::format_double;
  const auto write = [&](const char* stage, const std::vector<gp::GpModel>& models) {
    for (std::size_t i = 0; i < models.size() && i < plant.size(); ++i) {
      constexpr int points = 101;
      for (int k = 0; k < points; ++k) {
        const double x = plant[i].min_load + plant[i].range() * k / (points - 1);
        const auto p = models[i].predict(x);
        out += std::string(stage) + "," + std::to_string(i) + "," + format_double(x) + "," +
               format_double(plant[i].power(x)) + "," + format_double(p.mean) + "," + format_double(p.std) + "\n";
      }
    }
  };
  write("initial", result.initial_models);
  if (!result.oracle) write("final", result.final_models);
  return out;
}

std::string ablation_csv(std::span<const AblationSeries> series) {
  std::string out = "instance";
  for (const auto& s : series) out += ",z_" + detail::format_double(s.z);
  out += "\n";
  std::size_t rows = 0;
  for (const auto& s : series) rows = std::max(rows, s.uncertainty.size());
  for (std::size_t k = 0; k < rows; ++k) {
    out += std::to_string(k);
    for (const auto& s : series) out += "," + (k < s.uncertainty.size() ? detail::format_double(s.uncertainty[k]) : "");
    out += "\n";
  }
  return out;
}

void emit(const RunResult& result, const plant::Plant& plant, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  detail::write_text(out_dir / "trace.csv", trace_csv(result.trace, plant.size()));
  detail::write_text(out_dir / "metrics.json", metrics_json(result.metrics));
  detail::write_text(out_dir / "curves.csv", curves_csv(result, plant));
}

}  // namespace rto::harness

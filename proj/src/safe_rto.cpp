#include "rto/safe_rto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rto/errors.hpp"
#include "rto/nlp.hpp"

namespace rto {

void SafetyConfig::validate() const {
  if (!(power_cap > 0.0)) throw ParameterError("power_cap must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (grid_size < 2) throw ParameterError("grid_size must be at least 2");
  if (beta_override && !(*beta_override > 0.0)) throw ParameterError("beta_override must be positive");
}

void ExploreConfig::validate() const {
  if (!(z_active >= 0.0)) throw ParameterError("z_active must be non-negative");
  if (!(demand_tolerance >= 0.0)) throw ParameterError("demand tolerance must be non-negative");
  if (trust_region && !(*trust_region > 0.0)) throw ParameterError("trust_region must be positive when set");
}

void RtoConfig::validate() const {
  safety.validate();
  explore.validate();
  if (!(power_unit_kw > 0.0)) throw ParameterError("power_unit_kw must be positive");
  if (multistart_count < 1) throw ParameterError("multistart_count must be at least 1");
  if (!(constraint_tolerance > 0.0)) throw ParameterError("constraint_tolerance must be positive");
}

ModelSet as_model_set(std::span<const gp::GpModel> models) {
  ModelSet out;
  out.reserve(models.size());
  for (const auto& m : models) out.push_back(std::make_shared<GpPowerModel>(m));
  return out;
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::feasible_suboptimal: return "feasible_suboptimal";
    case SolverStatus::infeasible_relaxed: return "infeasible_relaxed";
  }
  return "optimal";
}

SolverStatus solver_status_from_string(const std::string& s) {
  if (s == "optimal") return SolverStatus::optimal;
  if (s == "feasible_suboptimal") return SolverStatus::feasible_suboptimal;
  if (s == "infeasible_relaxed") return SolverStatus::infeasible_relaxed;
  throw ParameterError("unknown solver status '" + s + "'");
}

double beta_schedule(const SafetyConfig& cfg, int t) {
  if (t < 1) throw ParameterError("beta schedule is defined for t >= 1");
  if (cfg.beta_override) return *cfg.beta_override;
  const double td = static_cast<double>(t);
  return 2.0 * std::log(cfg.grid_size * td * td * std::numbers::pi * std::numbers::pi / (6.0 * cfg.delta));
}

namespace {

void check_sizes(const ModelSet& models, std::span<const double> x) {
  if (models.size() != x.size()) throw ParameterError("setpoint count does not match the number of models");
}

}  // namespace

double uncertainty_term(const ModelSet& models, std::span<const double> setpoints) {
  check_sizes(models, setpoints);
  double s = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) s += models[i]->predict(setpoints[i]).std;
  return s;
}

double utility(const ModelSet& models, std::span<const double> setpoints, double demand, double z,
               double power_unit_kw) {
  check_sizes(models, setpoints);
  double mean_sum = 0.0;
  double std_sum = 0.0;
  double load_sum = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto p = models[i]->predict(setpoints[i]);
    mean_sum += p.mean;
    std_sum += p.std;
    load_sum += setpoints[i];
  }
  mean_sum /= power_unit_kw;
  std_sum /= power_unit_kw;
  const double gap = demand - load_sum;
  return mean_sum * mean_sum + gap * gap - z * std_sum;
}

double safety_ucb(const ModelSet& models, std::span<const double> setpoints, double beta) {
  check_sizes(models, setpoints);
  if (!(beta >= 0.0)) throw ParameterError("beta must be non-negative");
  const double root = std::sqrt(beta);
  double s = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto p = models[i]->predict(setpoints[i]);
    s += p.mean + root * p.std;
  }
  return s;
}

FeasibilityGrid feasibility_grid(std::span<const LoadRange> ranges, int grid_size) {
  if (grid_size < 2) throw ParameterError("grid_size must be at least 2");
  FeasibilityGrid g;
  double widest = 0.0;
  for (const auto& r : ranges) widest = std::max(widest, r.max - r.min);
  g.step = widest > 0.0 ? widest / (grid_size - 1) : 1.0;
  for (const auto& r : ranges) {
    std::vector<double> pts;
    for (int k = 0;; ++k) {
      const double x = r.min + k * g.step;
      if (x > r.max + 1e-9 * std::max(1.0, widest)) break;
      pts.push_back(std::min(x, r.max));
    }
    g.loads.push_back(std::move(pts));
  }
  return g;
}

std::optional<std::vector<double>> find_feasible_demand_point(const ModelSet& models, std::span<const LoadRange> ranges,
                                                              double demand, double tolerance, double beta,
                                                              const SafetyConfig& safety) {
  safety.validate();
  if (models.size() != ranges.size()) throw ParameterError("model count does not match the number of ranges");
  const auto grid = feasibility_grid(ranges, safety.grid_size);
  const double root = std::sqrt(beta);
  constexpr double inf = std::numeric_limits<double>::infinity();

  // best[k]: least total UCB over the compressors so far with lattice-index sum k.
  std::vector<double> best{0.0};
  std::vector<std::vector<int>> choice;  // choice[i][k]: index chosen for compressor i
  double base = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& pts = grid.loads[i];
    std::vector<double> ucb(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto p = models[i]->predict(pts[j]);
      ucb[j] = p.mean + root * p.std;
    }
    std::vector<double> next(best.size() + pts.size() - 1, inf);
    std::vector<int> pick(next.size(), -1);
    for (std::size_t k = 0; k < best.size(); ++k) {
      if (best[k] == inf) continue;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const double v = best[k] + ucb[j];
        if (v < next[k + j]) {
          next[k + j] = v;
          pick[k + j] = static_cast<int>(j);
        }
      }
    }
    best = std::move(next);
    choice.push_back(std::move(pick));
    base += ranges[i].min;
  }

  std::optional<std::size_t> winner;
  for (std::size_t k = 0; k < best.size(); ++k) {
    const double total_load = base + static_cast<double>(k) * grid.step;
    if (std::abs(total_load - demand) > tolerance || best[k] > safety.power_cap) continue;
    if (!winner || best[k] < best[*winner]) winner = k;
  }
  if (!winner) return std::nullopt;

  std::vector<double> point(models.size());
  std::size_t k = *winner;
  for (std::size_t i = models.size(); i-- > 0;) {
    const int j = choice[i][k];
    point[i] = grid.loads[i][static_cast<std::size_t>(j)];
    k -= static_cast<std::size_t>(j);
  }
  return point;
}

bool feasible_demand_point_exists(const ModelSet& models, std::span<const LoadRange> ranges, double demand,
                                  double tolerance, double beta, const SafetyConfig& safety) {
  return find_feasible_demand_point(models, ranges, demand, tolerance, beta, safety).has_value();
}

double adapt_z(std::span<const double> history, const ModelSet& models, std::span<const LoadRange> ranges, double demand,
               const ExploreConfig& explore, const SafetyConfig& safety, double beta) {
  if (history.size() < 2) return 0.0;
  const double prev1 = history[history.size() - 1];
  const double prev2 = history[history.size() - 2];
  if (demand != prev1 || demand != prev2) return 0.0;
  return feasible_demand_point_exists(models, ranges, demand, explore.demand_tolerance, beta, safety) ? explore.z_active
                                                                                                     : 0.0;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, int t) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(t) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

RtoDecision describe(const ModelSet& models, std::vector<double> x, double demand, double z, double beta,
                     const RtoConfig& cfg, SolverStatus status) {
  RtoDecision d;
  const double root = std::sqrt(beta);
  double load_sum = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto p = models[i]->predict(x[i]);
    d.power_mean.push_back(p.mean);
    d.power_std.push_back(p.std);
    d.total_ucb += p.mean + root * p.std;
    load_sum += x[i];
  }
  d.objective = utility(models, x, demand, z, cfg.power_unit_kw);
  d.setpoints = std::move(x);
  d.z_used = z;
  d.beta = beta;
  d.demand_gap = std::abs(demand - load_sum);
  d.solver_status = status;
  return d;
}

}  // namespace

RtoDecision solve_instance(const ModelSet& models, std::span<const LoadRange> ranges, double demand,
                           std::span<const double> prev_setpoints, int t, double z, const RtoConfig& cfg) {
  cfg.validate();
  const std::size_t n = models.size();
  if (ranges.size() != n || prev_setpoints.size() != n)
    throw ParameterError("solve_instance: models, ranges and previous setpoints differ in size");
  const double beta = beta_schedule(cfg.safety, t);
  const double root = std::sqrt(beta);
  const double unit = cfg.power_unit_kw;
  const double cap = cfg.safety.power_cap;

  nlp::Box box;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = ranges[i].min;
    double hi = ranges[i].max;
    if (cfg.explore.trust_region) {
      lo = std::max(lo, prev_setpoints[i] - *cfg.explore.trust_region);
      hi = std::min(hi, prev_setpoints[i] + *cfg.explore.trust_region);
      if (lo > hi) lo = hi = std::clamp(prev_setpoints[i], ranges[i].min, ranges[i].max);
    }
    box.lower.push_back(lo);
    box.upper.push_back(hi);
  }

  std::vector<gp::PredictionWithGradient> pred(n);
  const auto predict_all = [&](std::span<const double> x) {
    for (std::size_t i = 0; i < n; ++i) pred[i] = models[i]->predict(x[i]);
  };

  const nlp::Function objective = [&](std::span<const double> x, std::span<double> grad) {
    predict_all(x);
    double mean_sum = 0.0;
    double std_sum = 0.0;
    double load_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_sum += pred[i].mean;
      std_sum += pred[i].std;
      load_sum += x[i];
    }
    const double m = mean_sum / unit;
    const double gap = demand - load_sum;
    if (!grad.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        grad[i] = 2.0 * m * pred[i].d_mean / unit - 2.0 * gap - z * pred[i].d_std / unit;
    }
    return m * m + gap * gap - z * std_sum / unit;
  };
  const nlp::Function ucb_constraint = [&](std::span<const double> x, std::span<double> grad) {
    predict_all(x);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += pred[i].mean + root * pred[i].std;
      if (!grad.empty()) grad[i] = pred[i].d_mean + root * pred[i].d_std;
    }
    return s - cap;
  };

  // Starts: hold position, the three seed levels, demand-proportional split;
  // the rest uniform in the box.
  std::vector<std::vector<double>> starts;
  starts.push_back(box.clamp(prev_setpoints));
  for (double frac : {0.0, 0.25, 0.5}) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = ranges[i].min + frac * (ranges[i].max - ranges[i].min);
    starts.push_back(box.clamp(s));
  }
  {
    double lo = 0.0;
    double span = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lo += ranges[i].min;
      span += ranges[i].max - ranges[i].min;
    }
    const double theta = span > 0.0 ? std::clamp((demand - lo) / span, 0.0, 1.0) : 0.0;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = ranges[i].min + theta * (ranges[i].max - ranges[i].min);
    starts.push_back(box.clamp(s));
  }
  if (static_cast<int>(starts.size()) > cfg.multistart_count) starts.resize(static_cast<std::size_t>(cfg.multistart_count));

  nlp::SolveOptions opts;
  opts.constraint_scale = cap;
  opts.constraint_tolerance = cfg.constraint_tolerance;
  opts.random_starts = cfg.multistart_count - static_cast<int>(starts.size());
  opts.seed = mix_seed(cfg.rng_seed, t);

  const nlp::Function cons[] = {ucb_constraint};
  const auto report = nlp::minimize(objective, cons, box, starts, opts);

  std::vector<double> hold(prev_setpoints.begin(), prev_setpoints.end());
  if (report.max_constraint_violation > 0.0) {
    // Outside the strict cap: nothing to return but the previous point.
    return describe(models, std::move(hold), demand, z, beta, cfg, SolverStatus::infeasible_relaxed);
  }
  return describe(models, report.point, demand, z, beta, cfg,
                  report.converged ? SolverStatus::optimal : SolverStatus::feasible_suboptimal);
}

SeedPlan SeedPlan::standard(std::span<const LoadRange> ranges) {
  SeedPlan plan;
  for (const auto& r : ranges) {
    const double span = r.max - r.min;
    plan.loads.push_back({r.min, r.min + 0.5 * span, r.min + 0.25 * span});
  }
  return plan;
}

SeedSet initialize_safe_seeds(std::span<const LoadRange> ranges, const SeedPlan& plan, const TruthProbe& truth,
                              double noise_std) {
  if (plan.loads.size() != ranges.size()) throw ParameterError("seed plan does not cover every compressor");
  SeedSet out;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (plan.loads[i].empty()) throw ParameterError("compressor " + std::to_string(i) + " has no safe seed");
    std::vector<gp::Observation> obs;
    for (double x : plan.loads[i]) {
      if (!(x >= ranges[i].min && x <= ranges[i].max))
        throw ParameterError("seed load " + std::to_string(x) + " kW outside capacity box of compressor " +
                             std::to_string(i));
      obs.push_back({x, truth(i, x), true});
    }

    double mean = 0.0;
    for (const auto& o : obs) mean += o.power;
    mean /= static_cast<double>(obs.size());
    double var = 0.0;
    for (const auto& o : obs) var += (o.power - mean) * (o.power - mean);
    const double seed_std = obs.size() > 1 ? std::sqrt(var / static_cast<double>(obs.size() - 1)) : 0.0;

    gp::KernelParams init;
    init.lengthscale = 0.5 * (ranges[i].max - ranges[i].min);
    init.signal_std = seed_std > 0.0 ? seed_std : std::max(1.0, std::abs(mean));
    init.noise_std = noise_std;
    const auto params = obs.size() >= 3 ? gp::fit_hyperparams(obs, init) : init;

    out.models.push_back(gp::fit(params, obs));
    out.params.push_back(params);
    out.observations.push_back(std::move(obs));
  }
  return out;
}

}  // namespace rto

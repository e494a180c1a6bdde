// rto_cli: closed-loop runs and z ablation for the refrigeration plant.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rto/config.hpp"
#include "rto/errors.hpp"
#include "rto/harness.hpp"
#include "rto/plant.hpp"
#include "rto/scenario.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kIoError = 3;

rto::scenario::Scenario resolve_scenario(const std::string& arg) {
  for (const char* name : {"weekend", "step_jump", "fixed_z_ablation"}) {
    if (arg == name) return rto::scenario::builtin(arg);
  }
  return rto::scenario::load_csv(arg);
}

rto::plant::Plant resolve_plant(const std::string& arg) {
  return arg == "default" ? rto::plant::default_plant() : rto::plant::load_plant_config(arg);
}

rto::AlgoConfig resolve_algo(const std::string& arg) {
  return arg == "default" ? rto::AlgoConfig{} : rto::load_algo_config(arg);
}

std::vector<double> parse_z_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw rto::ConfigError("bad z value '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void summarize(const rto::harness::RunMetrics& m) {
  std::printf("demand_rmse_kw        %.3f\n", m.demand_rmse);
  std::printf("cap_violation_seconds %d\n", m.cap_violation_seconds);
  std::printf("cap_violation_peak_kw %.3f\n", m.cap_violation_peak);
  std::printf("final_uncertainty     %.3f\n", m.final_total_uncertainty);
  std::printf("oracle_power_gap      %.4f\n", m.oracle_power_gap);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe real-time optimization of a compressor plant"};
  app.require_subcommand(1);

  std::string scenario_arg = "weekend";
  std::string plant_arg = "default";
  std::string algo_arg = "default";
  std::uint64_t seed = 0;
  std::string out_dir;
  bool oracle = false;
  std::optional<double> trust_region;

  auto* run = app.add_subcommand("run", "simulate one scenario");
  run->add_option("--scenario", scenario_arg, "builtin name or CSV path")->capture_default_str();
  run->add_option("--plant", plant_arg, "plant JSON or 'default'")->capture_default_str();
  run->add_option("--algo", algo_arg, "algorithm JSON or 'default'")->capture_default_str();
  run->add_option("--seed", seed)->capture_default_str();
  run->add_option("--out", out_dir)->required();
  run->add_flag("--oracle", oracle, "optimize on the true curves");
  run->add_option("--trust-region", trust_region, "per-instance setpoint step limit, kW");

  std::string z_arg = "0,100,1000";
  auto* ablate = app.add_subcommand("ablate-z", "uncertainty decay at fixed demand per z");
  ablate->add_option("--z", z_arg)->capture_default_str();
  ablate->add_option("--plant", plant_arg)->capture_default_str();
  ablate->add_option("--algo", algo_arg)->capture_default_str();
  ablate->add_option("--seed", seed)->capture_default_str();
  ablate->add_option("--out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw rto::IoError("cannot create output directory " + out_dir + ": " + ec.message());
    const auto plant = resolve_plant(plant_arg);
    auto algo = resolve_algo(algo_arg);
    if (run->parsed()) {
      if (trust_region) algo.rto.explore.trust_region = *trust_region;
      const auto scenario = resolve_scenario(scenario_arg);
      try {
        algo.validate();
      } catch (const rto::ParameterError& e) {
        throw rto::ConfigError(e.what());
      }
      auto result = oracle ? rto::harness::run_oracle(scenario, plant, algo, seed)
                           : rto::harness::run(scenario, plant, algo, seed);
      if (!oracle) {
        const auto bench = rto::harness::run_oracle(scenario, plant, algo, seed);
        result.metrics = rto::harness::compute_metrics(result.trace, plant, algo, false, bench.trace);
      }
      rto::harness::emit(result, plant, out_dir);
      summarize(result.metrics);
    } else {
      const auto z_values = parse_z_list(z_arg);
      const auto series = rto::harness::z_ablation(plant, algo, z_values, seed);
      const auto path = std::filesystem::path(out_dir) / "ablation.csv";
      std::FILE* f = std::fopen(path.c_str(), "w");
      if (!f) throw rto::IoError("cannot write " + path.string());
      const auto text = rto::harness::ablation_csv(series);
      std::fwrite(text.data(), 1, text.size(), f);
      std::fclose(f);
      for (const auto& s : series) {
        std::printf("z=%-8g final_uncertainty=%.3f half_at=%s\n", s.z, s.final_uncertainty,
                    s.instances_to_half ? std::to_string(*s.instances_to_half).c_str() : "never");
      }
    }
  } catch (const rto::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const rto::LookupError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const rto::ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const rto::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

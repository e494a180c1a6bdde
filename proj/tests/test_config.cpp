#include <doctest.h>

#include "rto/config.hpp"
#include "rto/errors.hpp"

TEST_CASE("defaults") {
  const rto::AlgoConfig cfg;
  CHECK(cfg.rto.safety.power_cap == 1580.0);
  CHECK(cfg.rto.safety.delta == 0.05);
  CHECK(cfg.rto.safety.grid_size == 100);
  CHECK(cfg.rto.explore.z_active == 1000.0);
  CHECK_FALSE(cfg.rto.explore.trust_region.has_value());
  CHECK(cfg.rto.multistart_count == 8);
  CHECK(cfg.noise_std_kw == 5.0);
  CHECK(cfg.rto_period_s == 250.0);
  CHECK(cfg.ssd.window == 30);
}

TEST_CASE("parse and round trip") {
  const auto cfg = rto::parse_algo_config(R"({
    "power_cap_kw": 1500,
    "trust_region_kw": 100,
    "beta_override": 4,
    "multistart_count": 3,
    "rng_seed": 77,
    "ssd_window": 20
  })");
  CHECK(cfg.rto.safety.power_cap == 1500.0);
  CHECK(cfg.rto.explore.trust_region == 100.0);
  CHECK(cfg.rto.safety.beta_override == 4.0);
  CHECK(cfg.rto.multistart_count == 3);
  CHECK(cfg.rto.rng_seed == 77);
  CHECK(cfg.ssd.window == 20);
  const auto again = rto::parse_algo_config(rto::algo_config_json(cfg));
  CHECK(rto::algo_config_json(again) == rto::algo_config_json(cfg));
  CHECK(rto::algo_config_json(rto::parse_algo_config("{}")) == rto::algo_config_json(rto::AlgoConfig{}));
}

TEST_CASE("diagnostics carry line numbers") {
  auto line_of = [](const std::string& text) {
    try {
      rto::parse_algo_config(text);
    } catch (const rto::ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("{\n  \"delta\": 0.05,\n  \"z_actve\": 10\n}") == 3);
  CHECK(line_of("{\n  \"delta\": 0.05,\n\n  \"grid_size\": \"many\"\n}") == 4);
  CHECK(line_of("{\n  \"delta\": 0.05,\n  \"alpha_kw\": 10,,\n}") == 3);
  CHECK(line_of("{\"delta\": 2}") >= 0);
  CHECK_THROWS_AS(rto::parse_algo_config("[1, 2]"), rto::ConfigError);
  CHECK_THROWS_AS(rto::load_algo_config("/nonexistent/algo.json"), rto::IoError);
}

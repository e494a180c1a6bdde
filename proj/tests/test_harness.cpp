#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rto/errors.hpp"
#include "rto/harness.hpp"

using namespace rto;

namespace {

scenario::Scenario short_run() { return {"short", {{0, 1200}, {1000, 1600}, {2000, 2000}}, 3000}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const harness::RunResult& cached_run() {
  static const auto r = harness::run(short_run(), plant::default_plant(), AlgoConfig{}, 3);
  return r;
}

}  // namespace

TEST_CASE("trace shape") {
  const auto& r = cached_run();
  REQUIRE(r.trace.size() == 3000);
  CHECK(r.metrics.rto_instances == 12);
  CHECK(r.uncertainty_series.size() == 12);
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    CHECK(r.trace[k].t == static_cast<double>(k));
    CHECK(r.trace[k].setpoints.size() == 5);
  }
  CHECK(r.trace[0].steady == false);
  CHECK(r.trace[999].demand == 1200);
  CHECK(r.trace[1000].demand == 1600);
}

TEST_CASE("setpoints change only at RTO boundaries") {
  const auto& r = cached_run();
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    if (k % 250 != 0) CHECK(r.trace[k].setpoints == r.trace[k - 1].setpoints);
  }
}

TEST_CASE("audit fields come from the plant") {
  const auto& r = cached_run();
  const auto p = plant::default_plant();
  for (const auto& rec : r.trace) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += p[i].power(rec.actual_loads[i]);
    CHECK(rec.true_total_power == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("total uncertainty is non-increasing at fixed demand") {
  AlgoConfig cfg;
  const auto r = harness::run({"flat", {{0, 1600}}, 5000}, plant::default_plant(), cfg, 1);
  for (std::size_t k = 1; k < r.uncertainty_series.size(); ++k)
    CHECK(r.uncertainty_series[k] <= r.uncertainty_series[k - 1] + 1e-9);
}

TEST_CASE("total uncertainty integrates the std") {
  const auto& r = cached_run();
  const auto ranges = harness::load_ranges(plant::default_plant());
  const auto models = as_model_set(r.initial_models);
  double want = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    const double h = (ranges[i].max - ranges[i].min) / 99.0;
    for (int k = 0; k < 99; ++k) {
      want += 0.5 * h *
              (r.initial_models[i].predict(ranges[i].min + k * h).std +
               r.initial_models[i].predict(ranges[i].min + (k + 1) * h).std);
    }
  }
  CHECK(harness::total_uncertainty(models, ranges) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(harness::total_uncertainty(models, ranges, 1), ParameterError);
}

TEST_CASE("metrics are recomputable from trace.csv") {
  const auto& r = cached_run();
  const auto p = plant::default_plant();
  const auto text = harness::trace_csv(r.trace, 5);
  const auto back = harness::parse_trace_csv(text);
  CHECK(harness::trace_csv(back, 5) == text);
  const auto m = harness::compute_metrics(back, p, AlgoConfig{});
  CHECK(harness::metrics_json(m) == harness::metrics_json(r.metrics));
}

TEST_CASE("oracle run") {
  const auto p = plant::default_plant();
  const auto o = harness::run_oracle(short_run(), p, AlgoConfig{}, 3);
  CHECK(o.metrics.cap_violation_seconds == 0);
  CHECK(o.metrics.containment_checks == 0);
  for (const auto& rec : o.trace) {
    CHECK(rec.z_used == 0.0);
    CHECK(rec.total_uncertainty == 0.0);
  }
  const auto m = harness::compute_metrics(cached_run().trace, p, AlgoConfig{}, false, o.trace, 1000.0);
  const double e = harness::total_energy_kwh(cached_run().trace, 1.0, 1000.0);
  const double eo = harness::total_energy_kwh(o.trace, 1.0, 1000.0);
  CHECK(m.oracle_power_gap == doctest::Approx(std::abs(e - eo) / eo));
}

TEST_CASE("energy") {
  std::vector<harness::TraceRecord> t(3);
  for (int k = 0; k < 3; ++k) {
    t[k].t = k;
    t[k].true_total_power = 3600.0;
  }
  CHECK(harness::total_energy_kwh(t, 1.0) == 3.0);
  CHECK(harness::total_energy_kwh(t, 1.0, 1.0) == 2.0);
}

TEST_CASE("emit") {
  const auto dir = std::filesystem::temp_directory_path() / "rto_emit_test";
  std::filesystem::remove_all(dir);
  const auto p = plant::default_plant();

  SUBCASE("empty trace gives a header-only trace.csv") {
    harness::RunResult empty;
    harness::emit(empty, p, dir / "empty");
    const auto text = slurp(dir / "empty" / "trace.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(text.rfind("t_s,demand_kw,setpoint_kw_0", 0) == 0);
  }
  SUBCASE("same seed gives byte-identical files") {
    const auto a = harness::run(short_run(), p, AlgoConfig{}, 3);
    harness::emit(a, p, dir / "a");
    harness::emit(cached_run(), p, dir / "b");
    for (const char* f : {"trace.csv", "metrics.json", "curves.csv"})
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  SUBCASE("initial posterior std vanishes at the seed loads") {
    harness::emit(cached_run(), p, dir / "c");
    std::istringstream in(slurp(dir / "c" / "curves.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "stage,compressor,load_kw,true_power_kw,posterior_mean_kw,posterior_std_kw");
    int hits = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      if (cells[0] != "initial") continue;
      const auto i = std::stoul(cells[1]);
      const double x = std::stod(cells[2]);
      for (const auto& o : cached_run().initial_models[i].data()) {
        if (x == o.load) {
          CHECK(std::stod(cells[5]) <= 1e-8);
          ++hits;
        }
      }
    }
    CHECK(hits == 15);
  }
  SUBCASE("unwritable directory names the path") {
    try {
      harness::emit(cached_run(), p, "/proc/rto_nope");
      FAIL("expected an I/O error");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("/proc/rto_nope") != std::string::npos);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("z ablation needs two values") {
  CHECK_THROWS_AS(harness::z_ablation(plant::default_plant(), AlgoConfig{}, std::vector{0.0}, 1), ParameterError);
}

TEST_CASE("ablation csv layout") {
  std::vector<harness::AblationSeries> s(2);
  s[0].z = 0;
  s[0].uncertainty = {10, 9};
  s[1].z = 1000;
  s[1].uncertainty = {10, 4};
  CHECK(harness::ablation_csv(s) == "instance,z_0,z_1000\n0,10,10\n1,9,4\n");
}

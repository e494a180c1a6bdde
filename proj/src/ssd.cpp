#include "rto/ssd.hpp"

#include <cmath>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "rto/errors.hpp"

namespace rto::ssd {

void SsdConfig::validate() const {
  if (window < 5) throw ParameterError("ssd window must be at least 5 samples");
  if (!(slope_alpha > 0.0 && slope_alpha < 1.0)) throw ParameterError("ssd slope_alpha must lie in (0, 1)");
  if (!(min_std_floor >= 0.0)) throw ParameterError("ssd min_std_floor must be non-negative");
}

namespace {

// Two-sided Student-t critical value for n - 2 degrees of freedom; the last
// lookup is cached since the loop asks for the same one every tick.
double critical_value(int window, double alpha) {
  thread_local int cached_window = 0;
  thread_local double cached_alpha = 0.0;
  thread_local double cached_value = 0.0;
  if (window != cached_window || alpha != cached_alpha) {
    const boost::math::students_t dist(static_cast<double>(window) - 2.0);
    cached_value = boost::math::quantile(boost::math::complement(dist, 0.5 * alpha));
    cached_window = window;
    cached_alpha = alpha;
  }
  return cached_value;
}

}  // namespace

SlopeTest slope_test(std::span<const double> series, const SsdConfig& cfg) {
  cfg.validate();
  const auto n = series.size();
  if (n != static_cast<std::size_t>(cfg.window))
    throw ParameterError("ssd series length " + std::to_string(n) + " differs from window " + std::to_string(cfg.window));

  const double nd = static_cast<double>(n);
  const double t_mean = 0.5 * (nd - 1.0);
  double y_mean = 0.0;
  for (double v : series) {
    if (!std::isfinite(v)) throw ParameterError("ssd series contains a non-finite sample");
    y_mean += v;
  }
  y_mean /= nd;

  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxx += dt * dt;
    sxy += dt * (series[i] - y_mean);
  }
  SlopeTest out;
  out.slope = sxy / sxx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = series[i] - y_mean - out.slope * (static_cast<double>(i) - t_mean);
    ssr += r * r;
  }
  out.residual_std = std::max(std::sqrt(ssr / (nd - 2.0)), cfg.min_std_floor);
  const double se = out.residual_std / std::sqrt(sxx);
  out.t_statistic = se > 0.0 ? out.slope / se : (out.slope == 0.0 ? 0.0 : INFINITY);

  out.critical_value = critical_value(cfg.window, cfg.slope_alpha);
  return out;
}

bool is_steady(std::span<const double> series, const SsdConfig& cfg) {
  const auto t = slope_test(series, cfg);
  return std::abs(t.t_statistic) <= t.critical_value;
}

}  // namespace rto::ssd

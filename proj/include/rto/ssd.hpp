#pragma once

#include <span>

namespace rto::ssd {

struct SsdConfig {
  int window = 30;             // samples (1 s apart)
  double slope_alpha = 0.05;   // two-sided significance level
  double min_std_floor = 0.5;  // kW

  void validate() const;
};

struct SlopeTest {
  double slope = 0.0;        // signal units per sample
  double residual_std = 0.0; // after flooring
  double t_statistic = 0.0;
  double critical_value = 0.0;
};

/// Least-squares slope of series-vs-index and its t statistic with n - 2
/// degrees of freedom. The residual std is floored at cfg.min_std_floor.
SlopeTest slope_test(std::span<const double> series, const SsdConfig& cfg);

/// True iff the two-sided slope t-test does not reject a zero slope.
/// `series` must hold exactly cfg.window finite samples.
bool is_steady(std::span<const double> series, const SsdConfig& cfg);

}  // namespace rto::ssd

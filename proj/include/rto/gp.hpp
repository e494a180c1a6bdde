#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace rto::gp {

/// Squared-exponential kernel hyperparameters. All quantities in kW.
struct KernelParams {
  double lengthscale = 1.0;
  double signal_std = 1.0;
  double noise_std = 0.0;

  /// Throws ParameterError unless lengthscale > 0, signal_std > 0, noise_std >= 0.
  void validate() const;
};

/// One (load, power) pair. `exact` observations carry no measurement noise
/// (safe seeds evaluated on the true curve); the rest use params.noise_std.
struct Observation {
  double load = 0.0;
  double power = 0.0;
  bool exact = false;
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

struct PredictionWithGradient {
  double mean = 0.0;
  double std = 0.0;
  double d_mean = 0.0;  // d mean / d load
  double d_std = 0.0;   // d std / d load, 0 where std vanishes
};

/// k(a, b) = signal_std^2 * exp(-(a - b)^2 / (2 lengthscale^2)).
double kernel_eval(const KernelParams& params, double a, double b);

/// Exact zero-mean GP regression model with a cached Cholesky factor of
/// (K_NN + diag(noise^2)). Immutable once built; every data change goes
/// through fit() or updated() and refactorizes.
class GpModel {
 public:
  /// Throws ParameterError on empty data or non-finite values and
  /// NumericalError if the covariance stays indefinite after jitter escalation.
  static GpModel fit(const KernelParams& params, std::vector<Observation> data);

  Prediction predict(double query) const;
  PredictionWithGradient predict_with_gradient(double query) const;

  /// Model over data() followed by `extra`; equivalent to a fresh fit.
  GpModel updated(std::span<const Observation> extra) const;

  const KernelParams& params() const { return params_; }
  const std::vector<Observation>& data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  /// Diagonal jitter (absolute, kW^2) that was needed for the factorization.
  double jitter() const { return jitter_; }
  /// Lower-triangular Cholesky factor.
  const Eigen::MatrixXd& factor() const { return chol_; }

 private:
  GpModel() = default;

  KernelParams params_;
  std::vector<Observation> data_;
  Eigen::VectorXd inputs_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd chol_inv_;
  double jitter_ = 0.0;
};

inline GpModel fit(const KernelParams& params, std::vector<Observation> data) {
  return GpModel::fit(params, std::move(data));
}
inline Prediction predict(const GpModel& model, double query) { return model.predict(query); }
inline GpModel update(const GpModel& model, std::span<const Observation> extra) {
  return model.updated(extra);
}

/// Log marginal likelihood of the zero-mean SE-kernel GP.
double log_marginal_likelihood(const KernelParams& params, std::span<const Observation> data);

/// Maximizes the log marginal likelihood over (lengthscale, signal_std),
/// starting from `init`; noise_std is held at init.noise_std. The search
/// runs in log space within [init/100, init*100] for lengthscale and
/// [init/10, init*100] for signal_std. Deterministic.
///
/// Requires at least three observations. Throws ParameterError if the
/// likelihood is not finite at the optimum.
KernelParams fit_hyperparams(std::span<const Observation> data, const KernelParams& init);

}  // namespace rto::gp

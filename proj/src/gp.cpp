#include "rto/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Cholesky>

#include "rto/errors.hpp"
#include "rto/nlp.hpp"

namespace rto::gp {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
// Relative floor on squared Cholesky pivots; below it the factor is treated
// as failed even if LLT reported success.
constexpr double kPivotFloor = 1e-13;

double se(const KernelParams& p, double a, double b) {
  const double r = (a - b) / p.lengthscale;
  return p.signal_std * p.signal_std * std::exp(-0.5 * r * r);
}

Eigen::MatrixXd covariance(const KernelParams& p, const Eigen::VectorXd& x,
                           std::span<const Observation> data) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = p.signal_std * p.signal_std;
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = k(j, i) = se(p, x(i), x(j));
    }
  }
  const double noise_var = p.noise_std * p.noise_std;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!data[i].exact) k(i, i) += noise_var;
  }
  return k;
}

bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt, double scale) {
  if (llt.info() != Eigen::Success) return false;
  const Eigen::MatrixXd& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i);
    if (!std::isfinite(d) || d * d < kPivotFloor * scale) return false;
  }
  return true;
}

// Factorizes `k` in place, escalating diagonal jitter as needed. Returns the
// jitter that was applied.
double factorize(Eigen::MatrixXd& k, double signal_var, Eigen::MatrixXd& chol) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (factor_ok(llt, signal_var)) {
    chol = llt.matrixL();
    return 0.0;
  }
  for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-9); rel *= 10.0) {
    const double jitter = rel * signal_var;
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    llt.compute(kj);
    if (factor_ok(llt, signal_var)) {
      chol = llt.matrixL();
      k = std::move(kj);
      return jitter;
    }
  }
  throw NumericalError("covariance matrix is not positive definite after jitter up to 1e-4 * signal_std^2 (n = " +
                       std::to_string(k.rows()) + ")");
}

void check_data(std::span<const Observation> data) {
  if (data.empty()) throw ParameterError("GP needs at least one observation");
  for (const auto& o : data) {
    if (!std::isfinite(o.load) || !std::isfinite(o.power))
      throw ParameterError("observation has a non-finite load or power");
  }
}

Eigen::VectorXd inputs_of(std::span<const Observation> data) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) x(static_cast<Eigen::Index>(i)) = data[i].load;
  return x;
}

Eigen::VectorXd outputs_of(std::span<const Observation> data) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data[i].power;
  return y;
}

}  // namespace

void KernelParams::validate() const {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
    throw ParameterError("kernel lengthscale must be positive and finite");
  if (!(signal_std > 0.0) || !std::isfinite(signal_std))
    throw ParameterError("kernel signal_std must be positive and finite");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ParameterError("kernel noise_std must be non-negative and finite");
}

double kernel_eval(const KernelParams& params, double a, double b) {
  params.validate();
  return se(params, a, b);
}

GpModel GpModel::fit(const KernelParams& params, std::vector<Observation> data) {
  params.validate();
  check_data(data);
  GpModel m;
  m.params_ = params;
  m.data_ = std::move(data);
  m.inputs_ = inputs_of(m.data_);
  Eigen::MatrixXd k = covariance(params, m.inputs_, m.data_);
  m.jitter_ = factorize(k, params.signal_std * params.signal_std, m.chol_);
  m.alpha_ = outputs_of(m.data_);
  const auto l = std::as_const(m.chol_).triangularView<Eigen::Lower>();
  l.solveInPlace(m.alpha_);
  l.transpose().solveInPlace(m.alpha_);
  m.chol_inv_ = Eigen::MatrixXd::Identity(m.chol_.rows(), m.chol_.cols());
  l.solveInPlace(m.chol_inv_);
  return m;
}

Prediction GpModel::predict(double query) const {
  const auto full = predict_with_gradient(query);
  return {full.mean, full.std};
}

PredictionWithGradient GpModel::predict_with_gradient(double query) const {
  thread_local Eigen::VectorXd kstar;
  thread_local Eigen::VectorXd dk;
  const Eigen::Index n = inputs_.size();
  kstar.resize(n);
  dk.resize(n);
  const double ell2 = params_.lengthscale * params_.lengthscale;
  const double sf2 = params_.signal_std * params_.signal_std;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = query - inputs_(i);
    kstar(i) = sf2 * std::exp(-0.5 * d * d / ell2);
    dk(i) = -d / ell2 * kstar(i);
  }

  PredictionWithGradient out;
  out.mean = kstar.dot(alpha_);
  out.d_mean = dk.dot(alpha_);

  // v = L^-1 k*, var = k** - v.v ; d var = -2 (K^-1 k*) . dk
  thread_local Eigen::VectorXd v;
  v.noalias() = chol_inv_.triangularView<Eigen::Lower>() * kstar;
  const double var = sf2 - v.squaredNorm();
  kstar.noalias() = chol_inv_.transpose().triangularView<Eigen::Upper>() * v;
  const double d_var = -2.0 * kstar.dot(dk);

  // Variance below the cancellation noise of sf2 - |v|^2 is reported as 0
  // (noise-free training inputs); the std is a cone tip there, so its
  // derivative is reported as 0 too.
  if (var > 1e-12 * sf2) {
    out.std = std::sqrt(var);
    out.d_std = 0.5 * d_var / out.std;
  }
  return out;
}

GpModel GpModel::updated(std::span<const Observation> extra) const {
  if (extra.empty()) return *this;
  std::vector<Observation> all = data_;
  all.insert(all.end(), extra.begin(), extra.end());
  return fit(params_, std::move(all));
}

double log_marginal_likelihood(const KernelParams& params, std::span<const Observation> data) {
  params.validate();
  check_data(data);
  const Eigen::VectorXd x = inputs_of(data);
  Eigen::MatrixXd k = covariance(params, x, data);
  Eigen::MatrixXd chol;
  factorize(k, params.signal_std * params.signal_std, chol);
  Eigen::VectorXd a = outputs_of(data);
  chol.triangularView<Eigen::Lower>().solveInPlace(a);
  const double n = static_cast<double>(data.size());
  return -0.5 * a.squaredNorm() - chol.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

namespace {

// Gradient of the log marginal likelihood w.r.t. (log lengthscale, log signal_std).
double lml_with_gradient(const KernelParams& p, std::span<const Observation> data, double grad[2]) {
  const Eigen::VectorXd x = inputs_of(data);
  Eigen::MatrixXd k = covariance(p, x, data);
  Eigen::MatrixXd chol;
  factorize(k, p.signal_std * p.signal_std, chol);
  const Eigen::Index n = x.size();
  const auto l = std::as_const(chol).triangularView<Eigen::Lower>();

  Eigen::VectorXd alpha = outputs_of(data);
  l.solveInPlace(alpha);
  const double quad = alpha.squaredNorm();
  l.transpose().solveInPlace(alpha);

  Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
  l.solveInPlace(kinv);
  l.transpose().solveInPlace(kinv);
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

  // dK/dlog(ell) = K_se .* r^2 ; dK/dlog(sf) = 2 K_se
  double g_ell = 0.0;
  double g_sf = 0.0;
  const double ell2 = p.lengthscale * p.lengthscale;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = x(i) - x(j);
      const double kse = se(p, x(i), x(j));
      g_ell += w(i, j) * kse * d * d / ell2;
      g_sf += w(i, j) * 2.0 * kse;
    }
  }
  grad[0] = 0.5 * g_ell;
  grad[1] = 0.5 * g_sf;
  return -0.5 * quad - chol.diagonal().array().log().sum() -
         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

}  // namespace

KernelParams fit_hyperparams(std::span<const Observation> data, const KernelParams& init) {
  init.validate();
  check_data(data);
  if (data.size() < 3) throw ParameterError("hyperparameter fit needs at least 3 observations");

  const double log_ell0 = std::log(init.lengthscale);
  const double log_sf0 = std::log(init.signal_std);
  nlp::Box box{{log_ell0 - std::log(100.0), log_sf0 - std::log(10.0)},
               {log_ell0 + std::log(100.0), log_sf0 + std::log(100.0)}};

  auto params_at = [&](std::span<const double> theta) {
    KernelParams p = init;
    p.lengthscale = std::exp(theta[0]);
    p.signal_std = std::exp(theta[1]);
    return p;
  };
  const nlp::Function negative_lml = [&](std::span<const double> theta, std::span<double> grad) {
    double g[2];
    const double v = lml_with_gradient(params_at(theta), data, g);
    if (!grad.empty()) {
      grad[0] = -g[0];
      grad[1] = -g[1];
    }
    return -v;
  };

  std::vector<std::vector<double>> starts;
  for (double f : {1.0, 0.3, 3.0}) starts.push_back(box.clamp(std::vector{log_ell0 + std::log(f), log_sf0}));

  nlp::SolveOptions opts;
  opts.stall_tolerance = 1e-12;
  const auto report = nlp::minimize(negative_lml, {}, box, starts, opts);
  const KernelParams best = params_at(report.point);
  if (!std::isfinite(report.objective))
    throw ParameterError("log marginal likelihood is not finite at the fitted hyperparameters");
  return best;
}

}  // namespace rto::gp

#include "rto/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Core>

#include "rto/errors.hpp"

namespace rto::nlp {

void Box::validate() const {
  if (lower.size() != upper.size()) throw ParameterError("box bounds have different dimensions");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!(lower[i] <= upper[i])) throw ParameterError("box lower bound exceeds upper bound in dimension " + std::to_string(i));
  }
}

std::vector<double> Box::clamp(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lower[i], upper[i]);
  return out;
}

bool Box::contains(std::span<const double> x, double tol) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  }
  return true;
}

Function with_numeric_gradient(ValueFunction f, double rel_step) {
  return [f = std::move(f), rel_step](std::span<const double> x, std::span<double> grad) {
    const double value = f(x);
    if (!grad.empty()) {
      std::vector<double> probe(x.begin(), x.end());
      for (std::size_t i = 0; i < probe.size(); ++i) {
        const double h = rel_step * std::max(1.0, std::abs(x[i]));
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
      }
    }
    return value;
  };
}

namespace {

using Vec = Eigen::VectorXd;

std::span<const double> view(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> view(Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Vec project(const Vec& x, const Box& box) {
  Vec out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out(i) = std::clamp(x(i), box.lower[static_cast<std::size_t>(i)], box.upper[static_cast<std::size_t>(i)]);
  }
  return out;
}

struct InnerResult {
  int iterations = 0;
  bool stalled_or_converged = false;
};

// Projected BFGS on a box. `fun` returns value and fills the gradient.
template <typename Fun>
InnerResult projected_bfgs(const Fun& fun, const Box& box, Vec& x, int max_iterations, double stall_tolerance) {
  const Eigen::Index n = x.size();
  Vec g(n);
  double value = fun(x, g);

  double width = 0.0;
  for (std::size_t i = 0; i < box.dim(); ++i) width = std::max(width, box.upper[i] - box.lower[i]);
  const double gnorm0 = g.lpNorm<Eigen::Infinity>();
  const double h0 = gnorm0 > 0.0 && width > 0.0 ? 0.1 * width / gnorm0 : 1.0;

  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) * h0;
  bool fresh = true;
  int stall_count = 0;
  InnerResult result;

  Vec xn(n), gn(n), d(n);
  for (int it = 0; it < max_iterations; ++it) {
    result.iterations = it + 1;
    const double tiny = 1e-12 * std::max(1.0, std::abs(value));

    // Variables pinned at a bound with the gradient pushing outward.
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    double pg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const double eps = 1e-12 * std::max(1.0, std::abs(x(i)));
      if ((x(i) <= box.lower[ui] + eps && g(i) > 0.0) || (x(i) >= box.upper[ui] - eps && g(i) < 0.0)) {
        fixed[ui] = true;
      } else {
        pg = std::max(pg, std::abs(g(i)));
      }
    }
    if (pg <= 1e-14 * std::max(1.0, gnorm0)) {
      result.stalled_or_converged = true;
      break;
    }

    d.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fixed[static_cast<std::size_t>(i)]) continue;
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!fixed[static_cast<std::size_t>(j)]) s += h(i, j) * g(j);
      }
      d(i) = -s;
    }
    if (g.dot(d) >= -tiny * 1e-6) {
      h = Eigen::MatrixXd::Identity(n, n) * h0;
      fresh = true;
      for (Eigen::Index i = 0; i < n; ++i) d(i) = fixed[static_cast<std::size_t>(i)] ? 0.0 : -h0 * g(i);
    }

    double step = 1.0;
    double vn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = project(x + step * d, box);
      vn = fun(xn, gn);
      if (std::isfinite(vn) && vn <= value + 1e-4 * g.dot(xn - x)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || (xn - x).lpNorm<Eigen::Infinity>() == 0.0) {
      if (fresh) {
        result.stalled_or_converged = true;
        break;
      }
      h = Eigen::MatrixXd::Identity(n, n) * h0;
      fresh = true;
      continue;
    }

    const Vec s = xn - x;
    const Vec y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) h = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
      const Vec hy = h * y;
      const double rho = 1.0 / sy;
      h += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }

    const double decrease = value - vn;
    x = xn;
    g = gn;
    value = vn;
    if (decrease <= stall_tolerance * std::max(1.0, std::abs(value))) {
      if (++stall_count >= 3) {
        result.stalled_or_converged = true;
        break;
      }
    } else {
      stall_count = 0;
    }
  }
  return result;
}

struct Leg {
  Vec point;
  double objective = 0.0;
  double violation = 0.0;  // scaled
  int iterations = 0;
  bool converged = false;
  std::vector<double> multipliers;
};

double scaled_violation(std::span<const Function> cons, const Vec& x, double scale) {
  double v = 0.0;
  for (const auto& c : cons) v = std::max(v, c(view(x), {}) / scale);
  return v;
}

// Moves an infeasible point onto the feasible side of the boundary by
// bisection on the segment towards a feasible anchor.
Vec restore_on_segment(std::span<const Function> cons, const Vec& infeasible, const Vec& feasible, double scale) {
  double lo = 0.0;  // fraction towards `infeasible`, feasible end
  double hi = 1.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const Vec p = feasible + mid * (infeasible - feasible);
    if (scaled_violation(cons, p, scale) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return feasible + lo * (infeasible - feasible);
}

Leg solve_leg(const Function& objective, std::span<const Function> cons, const Box& box, const Vec& start,
              const SolveOptions& opt) {
  const Eigen::Index n = start.size();
  const std::size_t m = cons.size();
  const double cscale = opt.constraint_scale;
  Vec x = project(start, box);

  Vec grad(n);
  const double f0 = objective(view(x), view(grad));
  const double fscale = std::max(1.0, std::abs(f0));

  // Best feasible iterate seen so far; anchors restoration at the end.
  Vec anchor;
  double anchor_value = std::numeric_limits<double>::infinity();
  auto consider_anchor = [&](const Vec& p) {
    if (m == 0 || scaled_violation(cons, p, cscale) > 0.0) return;
    const double v = objective(view(p), {});
    if (v < anchor_value) {
      anchor_value = v;
      anchor = p;
    }
  };
  consider_anchor(x);

  std::vector<double> lambda(m, 0.0);
  double rho = 10.0;
  double prev_violation = std::numeric_limits<double>::infinity();
  Leg leg;
  bool inner_ok = false;

  Vec cgrad(n);
  const auto augmented = [&](const Vec& p, Vec& g) {
    double v = objective(view(p), view(g)) / fscale;
    g /= fscale;
    for (std::size_t j = 0; j < m; ++j) {
      const double c = cons[j](view(p), view(cgrad)) / cscale;
      const double shifted = lambda[j] + rho * c;
      if (shifted > 0.0) {
        v += (shifted * shifted - lambda[j] * lambda[j]) / (2.0 * rho);
        g += shifted * cgrad / cscale;
      } else {
        v -= lambda[j] * lambda[j] / (2.0 * rho);
      }
    }
    return v;
  };

  const int outer_limit = m == 0 ? 1 : opt.max_outer_iterations;
  for (int outer = 0; outer < outer_limit; ++outer) {
    const auto inner = projected_bfgs(augmented, box, x, opt.max_inner_iterations, opt.stall_tolerance);
    leg.iterations += inner.iterations;
    inner_ok = inner.stalled_or_converged;
    if (m == 0) break;

    consider_anchor(x);
    double violation = 0.0;
    double complementarity = 0.0;
    std::vector<double> c(m);
    for (std::size_t j = 0; j < m; ++j) {
      c[j] = cons[j](view(x), {}) / cscale;
      violation = std::max(violation, c[j]);
      complementarity = std::max(complementarity, std::abs(std::min(-c[j], lambda[j])));
    }
    const double strict = 1e-3 * opt.constraint_tolerance;
    if (violation <= strict && complementarity <= opt.constraint_tolerance) break;
    for (std::size_t j = 0; j < m; ++j) lambda[j] = std::max(0.0, lambda[j] + rho * c[j]);
    if (violation > 0.25 * prev_violation) rho = std::min(rho * 10.0, 1e14);
    prev_violation = violation;
  }

  if (m > 0 && scaled_violation(cons, x, cscale) > 0.0 && anchor.size() == n) {
    const Vec restored = restore_on_segment(cons, x, anchor, cscale);
    if (scaled_violation(cons, restored, cscale) <= 0.0) x = restored;
  }

  leg.point = x;
  leg.objective = objective(view(x), {});
  leg.violation = m == 0 ? 0.0 : std::max(0.0, scaled_violation(cons, x, cscale));
  leg.converged = inner_ok && leg.violation <= opt.constraint_tolerance;
  leg.multipliers.resize(m);
  for (std::size_t j = 0; j < m; ++j) leg.multipliers[j] = lambda[j] * fscale / cscale;
  return leg;
}

}  // namespace

SolveReport minimize(const Function& objective, std::span<const Function> inequalities, const Box& box,
                     std::span<const std::vector<double>> starts, const SolveOptions& options) {
  box.validate();
  if (!(options.constraint_scale > 0.0)) throw ParameterError("constraint_scale must be positive");
  std::vector<Vec> all;
  for (const auto& s : starts) {
    if (s.size() != box.dim()) throw ParameterError("start point dimension does not match the box");
    all.push_back(Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size())));
  }
  if (options.random_starts > 0) {
    std::mt19937_64 rng(options.seed);
    for (int k = 0; k < options.random_starts; ++k) {
      Vec s(static_cast<Eigen::Index>(box.dim()));
      for (std::size_t i = 0; i < box.dim(); ++i) {
        std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
        s(static_cast<Eigen::Index>(i)) = box.lower[i] == box.upper[i] ? box.lower[i] : u(rng);
      }
      all.push_back(std::move(s));
    }
  }
  if (all.empty()) throw ParameterError("minimize needs at least one start point");

  std::optional<Leg> best;
  std::size_t best_index = 0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    Leg leg = solve_leg(objective, inequalities, box, all[k], options);
    const bool feasible = leg.violation <= options.constraint_tolerance;
    bool take = false;
    if (!best) {
      take = true;
    } else {
      const bool best_feasible = best->violation <= options.constraint_tolerance;
      if (feasible != best_feasible)
        take = feasible;
      else if (feasible)
        take = leg.objective < best->objective ||
               (leg.objective == best->objective && leg.violation < best->violation);
      else
        take = leg.violation < best->violation;
    }
    if (take) {
      best = std::move(leg);
      best_index = k;
    }
  }

  SolveReport report;
  report.point.assign(best->point.data(), best->point.data() + best->point.size());
  report.point = box.clamp(report.point);
  report.objective = objective(report.point, {});
  for (const auto& c : inequalities) report.max_constraint_violation = std::max(report.max_constraint_violation, c(report.point, {}));
  report.iterations = best->iterations;
  report.converged = best->converged;
  report.multipliers = best->multipliers;
  report.start_index = best_index;
  return report;
}

SolveReport grid_oracle(const Function& objective, std::span<const Function> inequalities, const Box& box,
                        int resolution) {
  box.validate();
  const std::size_t dim = box.dim();
  if (resolution < 2 || resolution > 9) throw ParameterError("grid_oracle resolution must lie in [2, 9]");
  if (dim == 0 || dim > 5) throw ParameterError("grid_oracle supports 1 to 5 dimensions");

  std::size_t total = 1;
  for (std::size_t i = 0; i < dim; ++i) total *= static_cast<std::size_t>(resolution);

  SolveReport report;
  report.converged = false;
  report.objective = std::numeric_limits<double>::infinity();
  std::vector<double> x(dim);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (std::size_t i = 0; i < dim; ++i) {
      const auto k = static_cast<double>(rest % static_cast<std::size_t>(resolution));
      rest /= static_cast<std::size_t>(resolution);
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * k / (resolution - 1);
    }
    bool feasible = true;
    for (const auto& c : inequalities) {
      if (c(x, {}) > 0.0) {
        feasible = false;
        break;
      }
    }
    if (!feasible) continue;
    const double v = objective(x, {});
    if (v < report.objective) {
      report.objective = v;
      report.point = x;
      report.converged = true;
    }
  }
  report.iterations = static_cast<int>(total);
  if (!report.converged) report.objective = std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace rto::nlp

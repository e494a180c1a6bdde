#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rto::nlp {

/// Axis-aligned bounds; lower[i] <= upper[i].
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  void validate() const;
  std::vector<double> clamp(std::span<const double> x) const;
  bool contains(std::span<const double> x, double tol = 0.0) const;
};

/// Scalar function of a vector. When `grad` is non-empty the callee fills it
/// with the gradient at `x`.
using Function = std::function<double(std::span<const double> x, std::span<double> grad)>;
using ValueFunction = std::function<double(std::span<const double> x)>;

/// Wraps a value-only function with central finite differences.
Function with_numeric_gradient(ValueFunction f, double rel_step = 1e-6);

struct SolveOptions {
  // Feasibility is judged on c(x) / constraint_scale.
  double constraint_tolerance = 1e-6;
  double constraint_scale = 1.0;
  double stall_tolerance = 1e-8;
  int max_inner_iterations = 500;
  int max_outer_iterations = 40;
  // Extra uniform-in-box starts appended after the caller's starts.
  int random_starts = 0;
  std::uint64_t seed = 0;
};

struct SolveReport {
  std::vector<double> point;
  double objective = 0.0;
  // max_j max(0, c_j(point)), in the constraint's own units.
  double max_constraint_violation = 0.0;
  int iterations = 0;
  bool converged = false;
  // Lagrange multipliers in the caller's units: grad f + sum_j m_j grad c_j
  // is normal to the active box faces at a KKT point.
  std::vector<double> multipliers;
  std::size_t start_index = 0;
};

/// Minimizes `objective` subject to inequality(x) <= 0 for each inequality
/// and the box, from each start (clamped into the box). Augmented Lagrangian
/// outer loop over projected BFGS inner solves; the returned point always
/// lies in the box and `objective` is re-evaluated there.
///
/// Across starts the best feasible result wins: lowest objective, then lowest
/// violation, then lowest start index. With no feasible result the least
/// infeasible point is returned with converged = false.
SolveReport minimize(const Function& objective, std::span<const Function> inequalities, const Box& box,
                     std::span<const std::vector<double>> starts, const SolveOptions& options = {});

/// Exhaustive search over a `resolution`^dim grid (endpoints included).
/// Intended as a test oracle: dim <= 5 and resolution <= 9.
SolveReport grid_oracle(const Function& objective, std::span<const Function> inequalities, const Box& box,
                        int resolution);

}  // namespace rto::nlp

#pragma once

#include <optional>
#include <vector>

#include "vlc/network.hpp"

namespace vlc {

/// Cached quantities behind the closed-form rate derivatives, evaluated at
/// one power vector:
///   S(l, k) = sum_n a_{l,n} h_{k,n} p_n
///   T_k     = N0 B / r^2 + sum_l S(l, k)^2
/// so that SINR(k) = S(k,k)^2 / (T_k - S(k,k)^2).
struct RateDerivativeContext {
  GainMatrix gains;
  Assignment assignment;
  PowerVector p;
  LinkBudget budget;
  Eigen::MatrixXd s;
  Eigen::VectorXd t;
  Eigen::VectorXd sinr;
  Eigen::VectorXd rate;

  static RateDerivativeContext make(const GainMatrix& gains, const Assignment& assignment,
                                    const PowerVector& p, const LinkBudget& budget);

  int users() const { return assignment.users(); }
  int leds() const { return assignment.leds(); }
  /// User served by LED m, or -1.
  int served_by(int m) const { return assignment.owners()[m]; }
};

/// d R~_k / d p_m, where R~_k is R_k (sum objective) or ln R_k (log objective).
double rate_gradient(const RateDerivativeContext& ctx, Objective objective, int k, int m);

/// d^2 R~_k / (d p_m d p_n).
double rate_hessian(const RateDerivativeContext& ctx, Objective objective, int k, int m, int n);

/// Row k holds the gradient of R~_k.
Eigen::MatrixXd rate_gradients(const RateDerivativeContext& ctx, Objective objective);
/// Hessian of R~_k alone.
Eigen::MatrixXd rate_hessian_matrix(const RateDerivativeContext& ctx, Objective objective, int k);

/// Gradient and Hessian of sum_k R~_k.
Eigen::VectorXd objective_gradient(const RateDerivativeContext& ctx, Objective objective);
Eigen::MatrixXd objective_hessian(const RateDerivativeContext& ctx, Objective objective);

/// Point of the Lagrangian
///   L(p, lambda) = sum_k R~_k + sum_n lambda_n (p_n - p_max) - sum_n lambda_{n+N} p_n.
/// lambda stacks the upper-bound multipliers first, then the lower-bound ones.
struct LagrangeState {
  PowerVector p;
  Eigen::VectorXd lambda;
};

/// Length-3N gradient of L with respect to (p, lambda). `ctx` must have been
/// built at state.p.
Eigen::VectorXd lagrangian_jacobian(const LagrangeState& state, const RateDerivativeContext& ctx,
                                    Objective objective);

/// 3N x 3N second-derivative matrix of L:
///   [ H   I  -I ]
///   [ I   0   0 ]
///   [-I   0   0 ]
Eigen::MatrixXd lagrangian_hessian(const LagrangeState& state, const RateDerivativeContext& ctx,
                                   Objective objective);

enum class PowerMethod {
  kProjectedNewton,  // active-set Newton on the box, monotone ascent
  kInteriorPoint,    // log-barrier path with Newton inner iterations
};

struct PowerOptions {
  PowerMethod method = PowerMethod::kProjectedNewton;
  int max_iterations = 500;
  /// Bound on the scaled projected-gradient KKT residual.
  double tolerance = 1e-8;
  /// Defaults to p_max for projected Newton and p_max / 2 for the barrier.
  std::optional<PowerVector> initial;
};

struct PowerTraceEntry {
  int iteration;
  double objective;
  double kkt_residual;
  bool box_feasible;
};

struct PowerSolution {
  PowerVector p;
  double objective = 0.0;
  double initial_objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Multipliers in the sign convention of L above (nonpositive at a maximum).
  Eigen::VectorXd lambda;
  std::vector<PowerTraceEntry> trace;
};

class PowerConvergenceError : public NonConvergenceError {
 public:
  PowerConvergenceError(const std::string& what, PowerSolution best)
      : NonConvergenceError(what), best_(std::move(best)) {}
  const PowerSolution& best() const { return best_; }

 private:
  PowerSolution best_;
};

/// Maximizes sum_k R~_k over 0 <= p <= p_max for a fixed assignment. LEDs
/// that serve nobody keep their initial value. The returned point is never
/// worse than the starting point.
PowerSolution optimize_power(const GainMatrix& gains, const Assignment& assignment,
                             const LinkBudget& budget, Objective objective,
                             const PowerOptions& options = {});

/// Scaled projected-gradient residual ||p - P(p + s g)||_inf / p_max, with
/// s = p_max / gradient_scale. Zero exactly at KKT points of the box problem.
double kkt_residual(const PowerVector& p, const Eigen::VectorXd& gradient, const Assignment& assignment,
                    double p_max, double gradient_scale);

struct FiniteDifferenceReport {
  double gradient_error = 0.0;  // max relative deviation over users and entries
  double hessian_error = 0.0;
};

/// Compares the closed-form per-user derivatives with central differences of
/// per-user rates evaluated in quad precision straight from the SINR formula.
/// Step is step_fraction * p_max. Entry errors are relative to
/// max(|analytic|, |numeric|, 1e-6 * largest entry of that user).
FiniteDifferenceReport finite_difference_check(const GainMatrix& gains,
                                               const Assignment& assignment, const PowerVector& p,
                                               const LinkBudget& budget, Objective objective,
                                               double step_fraction = 1e-6);

}  // namespace vlc

#include "vlc/power.hpp"

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vlc {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

void require_rates_positive(const RateDerivativeContext& ctx, Objective objective, int k) {
  if (objective == Objective::kMaxLogSumRate && !(ctx.rate(k) > 0.0)) {
    throw InfeasibleAssignmentError("user " + std::to_string(k) +
                                    " has zero rate; logarithmic objective undefined");
  }
}

double plain_gradient(const RateDerivativeContext& ctx, int k, int m) {
  const int l = ctx.served_by(m);
  if (l < 0) return 0.0;
  const double c = (l == k) ? 1.0 : -ctx.sinr(k);
  return ctx.budget.bandwidth / kLn2 * 2.0 * ctx.s(l, k) * ctx.gains(k, m) / ctx.t(k) * c;
}

double plain_hessian(const RateDerivativeContext& ctx, int k, int m, int n) {
  const int l = ctx.served_by(m);
  const int lp = ctx.served_by(n);
  if (l < 0 || lp < 0) return 0.0;
  const double t = ctx.t(k);
  const double hm = ctx.gains(k, m);
  const double hn = ctx.gains(k, n);
  const double base = 4.0 * ctx.s(l, k) * hm * ctx.s(lp, k) * hn / (t * t);
  const double same = (l == lp) ? 2.0 * hm * hn / t : 0.0;
  double value;
  if (k == l) {
    value = -base + same;
  } else if (k == lp) {
    value = -base;
  } else {
    const double q = ctx.sinr(k);
    value = q * (2.0 + q) * base - q * same;
  }
  return ctx.budget.bandwidth / kLn2 * value;
}

}  // namespace

RateDerivativeContext RateDerivativeContext::make(const GainMatrix& gains,
                                                  const Assignment& assignment,
                                                  const PowerVector& p, const LinkBudget& budget) {
  budget.validate();
  RateDerivativeContext ctx{gains, assignment, p, budget, group_amplitudes(gains, assignment, p),
                            {}, {}, {}};
  const int users = assignment.users();
  const double r2 = budget.responsivity * budget.responsivity;
  const double floor = budget.noise_power() / r2;
  ctx.t.resize(users);
  ctx.sinr.resize(users);
  ctx.rate.resize(users);
  for (int k = 0; k < users; ++k) {
    double interference = 0.0;
    for (int l = 0; l < users; ++l)
      if (l != k) interference += ctx.s(l, k) * ctx.s(l, k);
    const double own = ctx.s(k, k) * ctx.s(k, k);
    ctx.t(k) = floor + interference + own;
    ctx.sinr(k) = own / (floor + interference);
    ctx.rate(k) = budget.bandwidth * std::log2(1.0 + ctx.sinr(k));
  }
  return ctx;
}

double rate_gradient(const RateDerivativeContext& ctx, Objective objective, int k, int m) {
  require_rates_positive(ctx, objective, k);
  const double g = plain_gradient(ctx, k, m);
  return objective == Objective::kMaxLogSumRate ? g / ctx.rate(k) : g;
}

double rate_hessian(const RateDerivativeContext& ctx, Objective objective, int k, int m, int n) {
  require_rates_positive(ctx, objective, k);
  const double h = plain_hessian(ctx, k, m, n);
  if (objective != Objective::kMaxLogSumRate) return h;
  const double r = ctx.rate(k);
  return h / r - plain_gradient(ctx, k, m) * plain_gradient(ctx, k, n) / (r * r);
}

Eigen::MatrixXd rate_gradients(const RateDerivativeContext& ctx, Objective objective) {
  Eigen::MatrixXd g(ctx.users(), ctx.leds());
  for (int k = 0; k < ctx.users(); ++k)
    for (int m = 0; m < ctx.leds(); ++m) g(k, m) = rate_gradient(ctx, objective, k, m);
  return g;
}

Eigen::MatrixXd rate_hessian_matrix(const RateDerivativeContext& ctx, Objective objective, int k) {
  const int n_leds = ctx.leds();
  Eigen::MatrixXd h(n_leds, n_leds);
  for (int m = 0; m < n_leds; ++m) {
    for (int n = m; n < n_leds; ++n) {
      h(m, n) = rate_hessian(ctx, objective, k, m, n);
      h(n, m) = h(m, n);
    }
  }
  return h;
}

Eigen::VectorXd objective_gradient(const RateDerivativeContext& ctx, Objective objective) {
  return rate_gradients(ctx, objective).colwise().sum().transpose();
}

Eigen::MatrixXd objective_hessian(const RateDerivativeContext& ctx, Objective objective) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ctx.leds(), ctx.leds());
  for (int k = 0; k < ctx.users(); ++k) h += rate_hessian_matrix(ctx, objective, k);
  return h;
}

Eigen::VectorXd lagrangian_jacobian(const LagrangeState& state, const RateDerivativeContext& ctx,
                                    Objective objective) {
  const int n = ctx.leds();
  if (state.p.size() != n || state.lambda.size() != 2 * n) {
    throw DimensionError("Lagrange state does not match the LED count");
  }
  Eigen::VectorXd j(3 * n);
  j.head(n) = objective_gradient(ctx, objective) + state.lambda.head(n) - state.lambda.tail(n);
  j.segment(n, n) = state.p.array() - ctx.budget.p_max;
  j.tail(n) = -state.p;
  return j;
}

Eigen::MatrixXd lagrangian_hessian(const LagrangeState& state, const RateDerivativeContext& ctx,
                                   Objective objective) {
  const int n = ctx.leds();
  if (state.p.size() != n || state.lambda.size() != 2 * n) {
    throw DimensionError("Lagrange state does not match the LED count");
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  g.topLeftCorner(n, n) = objective_hessian(ctx, objective);
  g.block(0, n, n, n) = id;
  g.block(0, 2 * n, n, n) = -id;
  g.block(n, 0, n, n) = id;
  g.block(2 * n, 0, n, n) = -id;
  return g;
}

double kkt_residual(const PowerVector& p, const Eigen::VectorXd& gradient,
                    const Assignment& assignment, double p_max, double gradient_scale) {
  const double step = gradient_scale > 0.0 ? p_max / gradient_scale : 1.0;
  double worst = 0.0;
  for (int n = 0; n < assignment.leds(); ++n) {
    if (assignment.owners()[n] < 0) continue;
    const double moved = std::clamp(p(n) + step * gradient(n), 0.0, p_max);
    worst = std::max(worst, std::abs(p(n) - moved));
  }
  return worst / p_max;
}

namespace {

class PowerProblem {
 public:
  PowerProblem(const GainMatrix& gains, const Assignment& assignment, const LinkBudget& budget,
               Objective objective)
      : gains_(gains), assignment_(assignment), budget_(budget), objective_(objective) {
    for (int n = 0; n < assignment.leds(); ++n) {
      if (assignment.owners()[n] >= 0 && gains.col(n).cwiseAbs().maxCoeff() > 0.0) {
        vars_.push_back(n);
      }
    }
  }

  const std::vector<int>& vars() const { return vars_; }
  double p_max() const { return budget_.p_max; }

  /// Objective value; -inf where the log objective is undefined.
  double value(const PowerVector& p) const {
    const RateDerivativeContext ctx = RateDerivativeContext::make(gains_, assignment_, p, budget_);
    double total = 0.0;
    for (int k = 0; k < ctx.users(); ++k) {
      if (objective_ == Objective::kMaxLogSumRate) {
        if (!(ctx.rate(k) > 0.0)) return -std::numeric_limits<double>::infinity();
        total += std::log(ctx.rate(k));
      } else {
        total += ctx.rate(k);
      }
    }
    return total;
  }

  RateDerivativeContext context(const PowerVector& p) const {
    return RateDerivativeContext::make(gains_, assignment_, p, budget_);
  }

  Eigen::VectorXd gradient(const RateDerivativeContext& ctx) const {
    return objective_gradient(ctx, objective_);
  }
  Eigen::MatrixXd hessian(const RateDerivativeContext& ctx) const {
    return objective_hessian(ctx, objective_);
  }

  /// Residual restricted to the optimization variables.
  double residual(const PowerVector& p, const Eigen::VectorXd& g, double scale) const {
    const double step = scale > 0.0 ? p_max() / scale : 1.0;
    double worst = 0.0;
    for (int n : vars_) {
      const double moved = std::clamp(p(n) + step * g(n), 0.0, p_max());
      worst = std::max(worst, std::abs(p(n) - moved));
    }
    return worst / p_max();
  }

  double gradient_scale(const Eigen::VectorXd& g) const {
    double s = 0.0;
    for (int n : vars_) s = std::max(s, std::abs(g(n)));
    return s;
  }

  bool in_box(const PowerVector& p) const {
    return (p.array() >= 0.0).all() && (p.array() <= p_max()).all();
  }

 private:
  const GainMatrix& gains_;
  const Assignment& assignment_;
  LinkBudget budget_;
  Objective objective_;
  std::vector<int> vars_;
};

/// Inverse of the sign-flipped Hessian block with eigenvalues replaced by
/// their magnitudes, applied to g. Returns false when the block is zero.
bool modified_newton(const Eigen::MatrixXd& hessian_block, const Eigen::VectorXd& g,
                     Eigen::VectorXd& direction) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-hessian_block);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseAbs();
  const double top = lam.size() ? lam.maxCoeff() : 0.0;
  if (!(top > 0.0) || !std::isfinite(top)) return false;
  const Eigen::VectorXd clipped = lam.cwiseMax(1e-10 * top);
  direction = es.eigenvectors() * (es.eigenvectors().transpose() * g).cwiseQuotient(clipped);
  return direction.allFinite();
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kCrossover = 1e-3;

/// `fixed_scale` > 0 replaces the gradient scale taken at the start point.
PowerSolution projected_newton(const PowerProblem& prob, PowerVector p, const PowerOptions& opt,
                               double fixed_scale = 0.0) {
  const auto& vars = prob.vars();
  const int nv = static_cast<int>(vars.size());
  const double p_max = prob.p_max();

  PowerSolution sol;
  RateDerivativeContext ctx = prob.context(p);
  Eigen::VectorXd g = prob.gradient(ctx);
  double f = prob.value(p);
  const double scale = fixed_scale > 0.0 ? fixed_scale : prob.gradient_scale(g);
  const double step = scale > 0.0 ? p_max / scale : 1.0;
  sol.initial_objective = f;
  double res = prob.residual(p, g, scale);
  sol.trace.push_back({0, f, res, prob.in_box(p)});

  int it = 0;
  bool stalled = false;
  while (res > opt.tolerance && it < opt.max_iterations) {
    ++it;
    const double eps = std::min(1e-3 * p_max, res * p_max);
    std::vector<int> free_idx, active_idx;
    for (int i = 0; i < nv; ++i) {
      const int n = vars[i];
      const bool lower = p(n) <= eps && g(n) < 0.0;
      const bool upper = p(n) >= p_max - eps && g(n) > 0.0;
      (lower || upper ? active_idx : free_idx).push_back(n);
    }

    Eigen::VectorXd d = Eigen::VectorXd::Zero(p.size());
    for (int n : active_idx) d(n) = step * g(n);
    bool have_newton = false;
    if (!free_idx.empty()) {
      const Eigen::MatrixXd h = prob.hessian(ctx);
      const int nf = static_cast<int>(free_idx.size());
      Eigen::MatrixXd hf(nf, nf);
      Eigen::VectorXd gf(nf);
      for (int a = 0; a < nf; ++a) {
        gf(a) = g(free_idx[a]);
        for (int b = 0; b < nf; ++b) hf(a, b) = h(free_idx[a], free_idx[b]);
      }
      Eigen::VectorXd df;
      if (modified_newton(hf, gf, df)) {
        for (int a = 0; a < nf; ++a) d(free_idx[a]) = df(a);
        have_newton = true;
      }
    }

    auto try_direction = [&](const Eigen::VectorXd& dir, bool bertsekas,
                             PowerVector& out, double& fout) {
      double alpha = 1.0;
      for (int h = 0; h < kMaxHalvings; ++h, alpha *= 0.5) {
        PowerVector q = p;
        for (int n : vars) q(n) = std::clamp(p(n) + alpha * dir(n), 0.0, p_max);
        if (q == p) return false;
        double predicted = 0.0;
        if (bertsekas) {
          for (int n : free_idx) predicted += alpha * g(n) * dir(n);
          for (int n : active_idx) predicted += g(n) * (q(n) - p(n));
        } else {
          predicted = g.dot(q - p);
        }
        const double fq = prob.value(q);
        if (fq >= f + kArmijo * predicted) {
          out = std::move(q);
          fout = fq;
          return true;
        }
        // Full Newton steps that lose only rounding noise are kept when they
        // reduce the residual; this lets the last digits settle.
        if (bertsekas && h == 0 && std::isfinite(fq) &&
            fq >= f - 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f)) {
          const RateDerivativeContext cq = prob.context(q);
          if (prob.residual(q, prob.gradient(cq), scale) < res) {
            out = std::move(q);
            fout = fq;
            return true;
          }
        }
      }
      return false;
    };

    PowerVector next;
    double f_next = f;
    bool moved = have_newton && try_direction(d, true, next, f_next);
    if (!moved) {
      Eigen::VectorXd dg = Eigen::VectorXd::Zero(p.size());
      for (int n : vars) dg(n) = step * g(n);
      moved = try_direction(dg, false, next, f_next);
    }
    if (!moved) {
      stalled = true;
      break;
    }
    p = std::move(next);
    f = f_next;
    ctx = prob.context(p);
    g = prob.gradient(ctx);
    res = prob.residual(p, g, scale);
    sol.trace.push_back({it, f, res, prob.in_box(p)});
  }

  sol.p = p;
  sol.objective = f;
  sol.kkt_residual = res;
  sol.iterations = it;
  sol.converged = res <= opt.tolerance;
  const int n_leds = static_cast<int>(p.size());
  sol.lambda = Eigen::VectorXd::Zero(2 * n_leds);
  const double eps = std::max(res, opt.tolerance) * p_max;
  for (int n : vars) {
    if (p(n) >= p_max - eps && g(n) > 0.0) sol.lambda(n) = -g(n);
    if (p(n) <= eps && g(n) < 0.0) sol.lambda(n_leds + n) = g(n);
  }
  if (!sol.converged) {
    throw PowerConvergenceError(stalled ? "power optimizer stalled before reaching the KKT tolerance"
                                        : "power optimizer hit the iteration limit",
                                std::move(sol));
  }
  return sol;
}

PowerSolution interior_point(const PowerProblem& prob, PowerVector p, const PowerOptions& opt) {
  const auto& vars = prob.vars();
  const double p_max = prob.p_max();
  for (int n : vars) {
    if (!(p(n) > 0.0 && p(n) < p_max)) {
      throw DomainError("interior-point start must lie strictly inside the box");
    }
  }

  PowerSolution sol;
  RateDerivativeContext ctx = prob.context(p);
  Eigen::VectorXd g = prob.gradient(ctx);
  double f = prob.value(p);
  const double scale = prob.gradient_scale(g);
  sol.initial_objective = f;
  const PowerVector start = p;
  double res = prob.residual(p, g, scale);
  sol.trace.push_back({0, f, res, prob.in_box(p)});

  double mu = 0.1 * std::max(scale, 1e-300) * p_max;
  auto barrier = [&](const PowerVector& q) {
    double v = prob.value(q);
    for (int n : vars) v += mu * (std::log(q(n)) + std::log(p_max - q(n)));
    return v;
  };

  std::optional<Eigen::VectorXd> crossover_lambda;
  int it = 0;
  while (res > opt.tolerance && it < opt.max_iterations) {
    // Newton iterations on the barrier problem for the current mu.
    while (it < opt.max_iterations) {
      ++it;
      const Eigen::MatrixXd h = prob.hessian(ctx);
      const int nv = static_cast<int>(vars.size());
      Eigen::MatrixXd hb(nv, nv);
      Eigen::VectorXd gb(nv);
      for (int a = 0; a < nv; ++a) {
        const int n = vars[a];
        const double lo = p(n), hi = p_max - p(n);
        gb(a) = g(n) + mu * (1.0 / lo - 1.0 / hi);
        for (int b = 0; b < nv; ++b) hb(a, b) = h(n, vars[b]);
        hb(a, a) -= mu * (1.0 / (lo * lo) + 1.0 / (hi * hi));
      }
      Eigen::VectorXd d;
      if (!modified_newton(hb, gb, d)) break;
      double alpha = 1.0;
      for (int a = 0; a < nv; ++a) {
        const int n = vars[a];
        if (d(a) < 0.0) alpha = std::min(alpha, 0.995 * p(n) / -d(a));
        if (d(a) > 0.0) alpha = std::min(alpha, 0.995 * (p_max - p(n)) / d(a));
      }
      const double phi = barrier(p);
      const double slope = gb.dot(d);
      bool accepted = false;
      PowerVector q = p;
      for (int k = 0; k < kMaxHalvings; ++k, alpha *= 0.5) {
        for (int a = 0; a < nv; ++a) q(vars[a]) = p(vars[a]) + alpha * d(a);
        const double v = barrier(q);
        if (v >= phi + kArmijo * alpha * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double moved = (alpha * d).cwiseAbs().maxCoeff();
      p = q;
      ctx = prob.context(p);
      g = prob.gradient(ctx);
      f = prob.value(p);
      res = prob.residual(p, g, scale);
      sol.trace.push_back({it, f, res, prob.in_box(p)});
      if (moved <= 1e-13 * p_max || slope <= 1e-15 * std::max(1.0, std::abs(phi))) break;
    }
    if (res <= opt.tolerance) break;
    // Crossover: near the optimum the active set is settled, so finish with
    // active-set Newton instead of following the barrier path to mu -> 0.
    if (res <= kCrossover && it < opt.max_iterations) {
      PowerOptions rest = opt;
      rest.max_iterations = opt.max_iterations - it;
      try {
        PowerSolution polished = projected_newton(prob, p, rest, scale);
        if (polished.objective >= f) {
          for (std::size_t i = 1; i < polished.trace.size(); ++i) {
            PowerTraceEntry e = polished.trace[i];
            e.iteration += it;
            sol.trace.push_back(e);
          }
          it += polished.iterations;
          p = polished.p;
          f = polished.objective;
          res = polished.kkt_residual;
          crossover_lambda = std::move(polished.lambda);
          break;
        }
      } catch (const PowerConvergenceError&) {
        // Keep following the barrier path.
      }
    }
    mu *= 0.1;
    if (mu < 1e-300) break;
  }

  const int n_leds = static_cast<int>(p.size());
  if (crossover_lambda) {
    sol.lambda = std::move(*crossover_lambda);
  } else {
    sol.lambda = Eigen::VectorXd::Zero(2 * n_leds);
    for (int n : vars) {
      sol.lambda(n) = -mu / (p_max - p(n));
      sol.lambda(n_leds + n) = -mu / p(n);
    }
  }
  sol.iterations = it;
  sol.kkt_residual = res;
  sol.converged = res <= opt.tolerance;
  if (f >= sol.initial_objective) {
    sol.p = p;
    sol.objective = f;
  } else {
    sol.p = start;
    sol.objective = sol.initial_objective;
  }
  if (!sol.converged) {
    throw PowerConvergenceError("interior-point optimizer did not reach the KKT tolerance",
                                std::move(sol));
  }
  return sol;
}

}  // namespace

PowerSolution optimize_power(const GainMatrix& gains, const Assignment& assignment,
                             const LinkBudget& budget, Objective objective,
                             const PowerOptions& options) {
  budget.validate();
  const int leds = assignment.leds();
  if (gains.rows() != assignment.users() || gains.cols() != leds) {
    throw DimensionError("gains and assignment disagree on K or N");
  }
  if (objective == Objective::kMaxLogSumRate && !assignment.every_user_served()) {
    throw InfeasibleAssignmentError("logarithmic objective needs every user served");
  }
  const bool barrier = options.method == PowerMethod::kInteriorPoint;
  PowerVector p = options.initial.value_or(
      PowerVector::Constant(leds, barrier ? 0.5 * budget.p_max : budget.p_max));
  if (p.size() != leds) throw DimensionError("initial power vector has the wrong length");
  if (!((p.array() >= 0.0).all() && (p.array() <= budget.p_max).all())) {
    throw DomainError("initial power vector leaves the box [0, p_max]");
  }

  const PowerProblem prob(gains, assignment, budget, objective);
  if (!std::isfinite(prob.value(p))) {
    throw InfeasibleAssignmentError("a user has zero rate at the starting point");
  }
  return barrier ? interior_point(prob, std::move(p), options)
                 : projected_newton(prob, std::move(p), options);
}

namespace {

using quad = __float128;

/// Per-user R~_k straight from the SINR definition, in quad precision.
std::vector<quad> quad_rates(const GainMatrix& gains, const Assignment& assignment,
                             const std::vector<quad>& p, const LinkBudget& budget,
                             Objective objective) {
  const int users = assignment.users();
  const int leds = assignment.leds();
  std::vector<quad> s(static_cast<std::size_t>(users) * users, 0);
  for (int n = 0; n < leds; ++n) {
    const int l = assignment.owners()[n];
    if (l < 0) continue;
    for (int k = 0; k < users; ++k) s[l * users + k] += p[n] * static_cast<quad>(gains(k, n));
  }
  const quad r = budget.responsivity;
  const quad noise = static_cast<quad>(budget.noise_psd) * static_cast<quad>(budget.bandwidth);
  std::vector<quad> out(users);
  for (int k = 0; k < users; ++k) {
    quad interference = 0;
    for (int l = 0; l < users; ++l)
      if (l != k) interference += s[l * users + k] * s[l * users + k];
    const quad snr = r * r * s[k * users + k] * s[k * users + k] / (noise + r * r * interference);
    const quad rate = static_cast<quad>(budget.bandwidth) * log2q(1 + snr);
    out[k] = objective == Objective::kMaxLogSumRate ? logq(rate) : rate;
  }
  return out;
}

double relative_error(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return denom > 0.0 ? std::abs(a - b) / denom : 0.0;
}

}  // namespace

FiniteDifferenceReport finite_difference_check(const GainMatrix& gains,
                                               const Assignment& assignment, const PowerVector& p,
                                               const LinkBudget& budget, Objective objective,
                                               double step_fraction) {
  check_dimensions(gains, assignment, p);
  const RateDerivativeContext ctx = RateDerivativeContext::make(gains, assignment, p, budget);
  const int users = assignment.users();
  const int leds = assignment.leds();
  const quad h = static_cast<quad>(step_fraction) * static_cast<quad>(budget.p_max);

  std::vector<quad> base(leds);
  for (int n = 0; n < leds; ++n) base[n] = p(n);
  auto eval = [&](int a, int sa, int b, int sb) {
    std::vector<quad> q = base;
    if (a >= 0) q[a] += sa * h;
    if (b >= 0) q[b] += sb * h;
    return quad_rates(gains, assignment, q, budget, objective);
  };

  std::vector<std::vector<quad>> plus(leds), minus(leds);
  for (int m = 0; m < leds; ++m) {
    plus[m] = eval(m, 1, -1, 0);
    minus[m] = eval(m, -1, -1, 0);
  }

  FiniteDifferenceReport report;
  const Eigen::MatrixXd analytic_g = rate_gradients(ctx, objective);
  for (int k = 0; k < users; ++k) {
    Eigen::VectorXd fd(leds);
    for (int m = 0; m < leds; ++m) fd(m) = static_cast<double>((plus[m][k] - minus[m][k]) / (2 * h));
    const double floor =
        1e-6 * std::max(analytic_g.row(k).cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff());
    for (int m = 0; m < leds; ++m) {
      report.gradient_error =
          std::max(report.gradient_error, relative_error(analytic_g(k, m), fd(m), floor));
    }
  }

  // fd_h[k](m, n) from the four-point mixed stencil; the diagonal reuses it
  // with m = n, which becomes the 2h second difference.
  std::vector<Eigen::MatrixXd> fd_h(users, Eigen::MatrixXd(leds, leds));
  for (int m = 0; m < leds; ++m) {
    for (int n = m; n < leds; ++n) {
      const auto pp = eval(m, 1, n, 1);
      const auto pm = eval(m, 1, n, -1);
      const auto mp = eval(m, -1, n, 1);
      const auto mm = eval(m, -1, n, -1);
      for (int k = 0; k < users; ++k) {
        const double v = static_cast<double>((pp[k] - pm[k] - mp[k] + mm[k]) / (4 * h * h));
        fd_h[k](m, n) = v;
        fd_h[k](n, m) = v;
      }
    }
  }
  for (int k = 0; k < users; ++k) {
    const Eigen::MatrixXd a = rate_hessian_matrix(ctx, objective, k);
    const double floor =
        1e-6 * std::max(a.cwiseAbs().maxCoeff(), fd_h[k].cwiseAbs().maxCoeff());
    for (int m = 0; m < leds; ++m)
      for (int n = 0; n < leds; ++n)
        report.hessian_error =
            std::max(report.hessian_error, relative_error(a(m, n), fd_h[k](m, n), floor));
  }
  return report;
}

}  // namespace vlc

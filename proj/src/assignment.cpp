#include "vlc/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vlc {

QosRatios::QosRatios(std::vector<double> ratios) : ratios_(std::move(ratios)) {
  for (double v : ratios_) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("QoS ratios must be positive");
  }
}

QosRatios QosRatios::uniform(int users) { return QosRatios(std::vector<double>(users, 1.0)); }

QosRatios QosRatios::split(int users, double high, double low) {
  std::vector<double> v(users, low);
  for (int k = 0; k < users / 2; ++k) v[k] = high;
  return QosRatios(std::move(v));
}

namespace {

template <class Score>
Assignment assign_by_column_argmax(const GainMatrix& gains, Score score) {
  const int users = static_cast<int>(gains.rows());
  const int leds = static_cast<int>(gains.cols());
  Assignment a(users, leds);
  if (users == 0) return a;
  for (int n = 0; n < leds; ++n) {
    int best = 0;
    double best_value = score(0, n);
    for (int k = 1; k < users; ++k) {
      const double v = score(k, n);
      if (v > best_value) {
        best = k;
        best_value = v;
      }
    }
    a.assign(n, best);
  }
  return a;
}

}  // namespace

Assignment hrs(const GainMatrix& gains) {
  return assign_by_column_argmax(gains, [&](int k, int n) { return gains(k, n); });
}

Assignment wss(const GainMatrix& gains) {
  const Eigen::VectorXd energy = gains.rowwise().squaredNorm();
  for (Eigen::Index k = 0; k < energy.size(); ++k) {
    if (!(energy(k) > 0.0)) {
      throw DomainError("wss: user " + std::to_string(k) + " receives nothing from any LED");
    }
  }
  return assign_by_column_argmax(gains, [&](int k, int n) { return gains(k, n) / energy(k); });
}

double snr_delta(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget, int user,
                 int led) {
  const double amplitude = p(led) * gains(user, led);
  return amplitude * amplitude / budget.noise_psd;
}

PraResult pra_trace(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
                    const QosRatios& qos, PraRateUpdate update) {
  const int users = static_cast<int>(gains.rows());
  const int leds = static_cast<int>(gains.cols());
  if (p.size() != leds) throw DimensionError("gains and power vector disagree on N");
  if (qos.users() != users) throw DimensionError("QoS ratio count differs from user count");
  if (leds < users) throw DomainError("pra needs at least as many LEDs as users");

  PraResult result{Assignment(users, leds), {}};
  Assignment& a = result.assignment;
  std::vector<bool> available(leds, true);
  std::vector<double> rate_of(users, 0.0);

  auto best_led_for = [&](int k) {
    int best = -1;
    double best_delta = -1.0;
    for (int n = 0; n < leds; ++n) {
      if (!available[n]) continue;
      const double d = snr_delta(gains, p, budget, k, n);
      if (d > best_delta) {
        best = n;
        best_delta = d;
      }
    }
    return best;
  };

  auto take = [&](int k, int n) {
    a.assign(n, k);
    available[n] = false;
    result.steps.push_back({k, n});
    if (update == PraRateUpdate::kAllUsers) {
      rate_of = rates(gains, a, p, budget);
    } else {
      rate_of[k] = rate(sinr(gains, a, p, budget, k), budget.bandwidth);
    }
  };

  for (int k = 0; k < users; ++k) take(k, best_led_for(k));

  for (int remaining = leds - users; remaining > 0; --remaining) {
    int neediest = 0;
    for (int k = 1; k < users; ++k) {
      if (rate_of[k] / qos[k] < rate_of[neediest] / qos[neediest]) neediest = k;
    }
    take(neediest, best_led_for(neediest));
  }
  return result;
}

Assignment pra(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
               const QosRatios& qos, PraRateUpdate update) {
  return pra_trace(gains, p, budget, qos, update).assignment;
}

ExhaustiveResult exhaustive_search(const GainMatrix& gains, const PowerVector& p,
                                   const LinkBudget& budget, Objective objective,
                                   const ExhaustiveOptions& options) {
  const int users = static_cast<int>(gains.rows());
  const int leds = static_cast<int>(gains.cols());
  if (p.size() != leds) throw DimensionError("gains and power vector disagree on N");
  if (users < 1) throw DomainError("exhaustive search needs at least one user");

  double space = 1.0;
  for (int n = 0; n < leds; ++n) {
    space *= users;
    if (space > static_cast<double>(options.max_evaluations)) {
      throw ResourceLimitError("exhaustive search over K^N = " + std::to_string(users) + "^" +
                               std::to_string(leds) +
                               " assignments exceeds the cap; use a heuristic (hrs/wss/pra)");
    }
  }

  const double r2 = budget.responsivity * budget.responsivity;
  const double noise = budget.noise_power();
  // Column n of `contrib` is p_n h_{., n}: what LED n adds to its owner's row of S.
  const Eigen::MatrixXd contrib = gains * p.asDiagonal();

  std::vector<int> owner(leds, 0);
  std::vector<int> count(users, 0);
  count[0] = leds;
  Eigen::MatrixXd s(users, users);

  ExhaustiveResult best{Assignment(users, leds), -std::numeric_limits<double>::infinity(), 0};
  bool found = false;

  while (true) {
    const bool starving = objective == Objective::kMaxLogSumRate &&
                          std::any_of(count.begin(), count.end(), [](int c) { return c == 0; });
    if (!starving) {
      s.setZero();
      for (int n = 0; n < leds; ++n) s.row(owner[n]) += contrib.col(n).transpose();
      double value = 0.0;
      bool feasible = true;
      for (int k = 0; k < users; ++k) {
        double interference = 0.0;
        for (int l = 0; l < users; ++l)
          if (l != k) interference += s(l, k) * s(l, k);
        const double snr = r2 * s(k, k) * s(k, k) / (noise + r2 * interference);
        const double r = budget.bandwidth * std::log2(1.0 + snr);
        if (objective == Objective::kMaxLogSumRate) {
          if (!(r > 0.0)) {
            feasible = false;
            break;
          }
          value += std::log(r);
        } else {
          value += r;
        }
      }
      ++best.evaluated;
      if (feasible && value > best.objective) {
        best.objective = value;
        for (int n = 0; n < leds; ++n) best.assignment.assign(n, owner[n]);
        found = true;
      }
    }

    // Odometer with the last LED as the fastest digit: lexicographic order.
    int pos = leds - 1;
    while (pos >= 0 && owner[pos] == users - 1) {
      --count[owner[pos]];
      owner[pos] = 0;
      ++count[0];
      --pos;
    }
    if (pos < 0) break;
    --count[owner[pos]];
    ++owner[pos];
    ++count[owner[pos]];
  }

  if (!found) {
    throw InfeasibleAssignmentError("no assignment serves every user with a positive rate");
  }
  return best;
}

Assignment exhaustive(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
                      Objective objective, const ExhaustiveOptions& options) {
  return exhaustive_search(gains, p, budget, objective, options).assignment;
}

}  // namespace vlc

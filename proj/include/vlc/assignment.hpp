#pragma once

#include <cstdint>
#include <vector>

#include "vlc/network.hpp"

namespace vlc {

/// Target rate ratios nu_k, all strictly positive.
class QosRatios {
 public:
  explicit QosRatios(std::vector<double> ratios);
  static QosRatios uniform(int users);
  /// First floor(K/2) users get `high`, the rest `low`.
  static QosRatios split(int users, double high, double low);

  int users() const { return static_cast<int>(ratios_.size()); }
  double operator[](int k) const { return ratios_.at(k); }
  const std::vector<double>& values() const { return ratios_; }

 private:
  std::vector<double> ratios_;
};

// All argmax/argmin selections below break ties toward the lowest index.

/// Highest-RSS: each LED goes to the user with the largest gain from it.
Assignment hrs(const GainMatrix& gains);

/// Weighted signal strength: each LED goes to argmax_k h_{k,n} / sum_m h_{k,m}^2.
/// Throws DomainError for a user whose gains are all zero.
Assignment wss(const GainMatrix& gains);

/// (p_n h_{k,n})^2 / N0, the ranking key used by PRA.
double snr_delta(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget, int user,
                 int led);

enum class PraRateUpdate {
  kAllUsers,     // refresh every user's rate after each pick
  kPickingUser,  // refresh only the user that picked, as the listing reads literally
};

struct PraStep {
  int user;
  int led;
};

struct PraResult {
  Assignment assignment;
  std::vector<PraStep> steps;  // in pick order, seeding included
};

/// Proportional rate algorithm: seed each user with its best LED, then let
/// the user with the lowest R_k / nu_k pick its best remaining LED until
/// none remain. Requires N >= K.
PraResult pra_trace(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
                    const QosRatios& qos, PraRateUpdate update = PraRateUpdate::kAllUsers);
Assignment pra(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
               const QosRatios& qos, PraRateUpdate update = PraRateUpdate::kAllUsers);

struct ExhaustiveOptions {
  std::uint64_t max_evaluations = std::uint64_t{1} << 20;
};

struct ExhaustiveResult {
  Assignment assignment;
  double objective;
  std::uint64_t evaluated;  // assignments whose objective was computed
};

/// Enumerates all K^N full assignments in lexicographic owner order and keeps
/// the first strict maximum. Starving assignments are skipped under the
/// logarithmic objective.
ExhaustiveResult exhaustive_search(const GainMatrix& gains, const PowerVector& p,
                                   const LinkBudget& budget, Objective objective,
                                   const ExhaustiveOptions& options = {});
Assignment exhaustive(const GainMatrix& gains, const PowerVector& p, const LinkBudget& budget,
                      Objective objective, const ExhaustiveOptions& options = {});

}  // namespace vlc

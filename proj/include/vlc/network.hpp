#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vlc/error.hpp"

namespace vlc {

/// Per-LED signal standard deviations ("power coefficients").
using PowerVector = Eigen::VectorXd;

/// Single-PD gain matrix, users x LEDs.
using GainMatrix = Eigen::MatrixXd;

struct LinkBudget {
  double noise_psd = 2.5e-20;  // N0, A^2/Hz
  double bandwidth = 20e6;     // B, Hz
  double p_max = 1.0;
  double responsivity = 0.5;  // r, A/W

  double noise_power() const { return noise_psd * bandwidth; }
  void validate() const;
};

enum class Objective { kMaxSumRate, kMaxLogSumRate };

/// Which user (if any) each LED serves. Holding one owner per LED makes the
/// "at most one 1 per column" rule structural.
class Assignment {
 public:
  Assignment() = default;
  Assignment(int users, int leds);

  /// K x N 0/1 matrix; throws DomainError on non-binary entries or a column
  /// with more than one 1.
  static Assignment from_matrix(const Eigen::MatrixXi& a);

  int users() const { return users_; }
  int leds() const { return static_cast<int>(owner_.size()); }

  std::optional<int> owner(int led) const;
  bool serves(int user, int led) const { return owner_.at(led) == user; }
  void assign(int led, int user);
  void release(int led);

  int led_count(int user) const;
  bool every_user_served() const;
  bool every_led_assigned() const;

  Eigen::MatrixXi matrix() const;
  /// Raw owners, -1 for unassigned.
  std::span<const int> owners() const { return owner_; }

  friend bool operator==(const Assignment&, const Assignment&) = default;

 private:
  int users_ = 0;
  std::vector<int> owner_;
};

/// S(l, k) = sum_n a_{l,n} h_{k,n} p_n: amplitude that user l's LED group
/// delivers at user k (responsivity not applied).
Eigen::MatrixXd group_amplitudes(const GainMatrix& gains, const Assignment& assign,
                                 const PowerVector& p);

double sinr(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
            const LinkBudget& budget, int user);
std::vector<double> sinrs(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                          const LinkBudget& budget);

/// Shannon rate B log2(1 + SINR). Throws DomainError on negative SINR.
double rate(double sinr_value, double bandwidth);

std::vector<double> rates(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                          const LinkBudget& budget);

double sum_rate(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                const LinkBudget& budget);

/// Sum of natural logs of user rates. A zero-rate user raises
/// InfeasibleAssignmentError.
double log_sum_rate(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                    const LinkBudget& budget);
double log_sum(std::span<const double> user_rates);

double objective_value(Objective objective, std::span<const double> user_rates);

/// Jain's index (sum R)^2 / (K sum R^2). Throws DomainError when all rates are zero.
double jain_fairness(std::span<const double> user_rates);

/// Equal-slot TDMA: every LED serves one user at a time, so there is no
/// interference and each user keeps 1/K of the airtime.
std::vector<double> tdma_rates(const GainMatrix& gains, const PowerVector& p,
                               const LinkBudget& budget);

void check_dimensions(const GainMatrix& gains, const Assignment& assign, const PowerVector& p);

}  // namespace vlc

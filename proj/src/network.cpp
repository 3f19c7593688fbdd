#include "vlc/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vlc {

void LinkBudget::validate() const {
  if (!(noise_psd > 0.0 && bandwidth > 0.0 && p_max > 0.0 && responsivity > 0.0)) {
    throw DomainError("link budget entries must be strictly positive");
  }
}

Assignment::Assignment(int users, int leds) : users_(users) {
  if (users < 0 || leds < 0) throw DimensionError("negative assignment extent");
  owner_.assign(leds, -1);
}

Assignment Assignment::from_matrix(const Eigen::MatrixXi& a) {
  Assignment out(static_cast<int>(a.rows()), static_cast<int>(a.cols()));
  for (Eigen::Index n = 0; n < a.cols(); ++n) {
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
      if (a(k, n) == 0) continue;
      if (a(k, n) != 1) throw DomainError("assignment entries must be 0 or 1");
      if (out.owner_[n] != -1) {
        throw DomainError("LED " + std::to_string(n) + " is assigned to more than one user");
      }
      out.owner_[n] = static_cast<int>(k);
    }
  }
  return out;
}

std::optional<int> Assignment::owner(int led) const {
  const int o = owner_.at(led);
  if (o < 0) return std::nullopt;
  return o;
}

void Assignment::assign(int led, int user) {
  if (user < 0 || user >= users_) throw DimensionError("user index out of range");
  owner_.at(led) = user;
}

void Assignment::release(int led) { owner_.at(led) = -1; }

int Assignment::led_count(int user) const {
  return static_cast<int>(std::count(owner_.begin(), owner_.end(), user));
}

bool Assignment::every_user_served() const {
  std::vector<bool> seen(users_, false);
  for (int o : owner_)
    if (o >= 0) seen[o] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

bool Assignment::every_led_assigned() const {
  return std::none_of(owner_.begin(), owner_.end(), [](int o) { return o < 0; });
}

Eigen::MatrixXi Assignment::matrix() const {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(users_, leds());
  for (int n = 0; n < leds(); ++n)
    if (owner_[n] >= 0) a(owner_[n], n) = 1;
  return a;
}

void check_dimensions(const GainMatrix& gains, const Assignment& assign, const PowerVector& p) {
  if (gains.rows() != assign.users() || gains.cols() != assign.leds() ||
      p.size() != assign.leds()) {
    throw DimensionError("gains, assignment and power vector disagree on K or N");
  }
}

Eigen::MatrixXd group_amplitudes(const GainMatrix& gains, const Assignment& assign,
                                 const PowerVector& p) {
  check_dimensions(gains, assign, p);
  const int users = assign.users();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(users, users);
  for (int n = 0; n < assign.leds(); ++n) {
    const int l = assign.owners()[n];
    if (l < 0) continue;
    s.row(l) += p(n) * gains.col(n).transpose();
  }
  return s;
}

namespace {

double sinr_from_groups(const Eigen::MatrixXd& s, const LinkBudget& budget, int k) {
  const double r2 = budget.responsivity * budget.responsivity;
  double interference = 0.0;
  for (Eigen::Index l = 0; l < s.rows(); ++l) {
    if (l != k) interference += s(l, k) * s(l, k);
  }
  return r2 * s(k, k) * s(k, k) / (budget.noise_power() + r2 * interference);
}

}  // namespace

double sinr(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
            const LinkBudget& budget, int user) {
  if (user < 0 || user >= assign.users()) throw DimensionError("user index out of range");
  return sinr_from_groups(group_amplitudes(gains, assign, p), budget, user);
}

std::vector<double> sinrs(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                          const LinkBudget& budget) {
  const Eigen::MatrixXd s = group_amplitudes(gains, assign, p);
  std::vector<double> out(assign.users());
  for (int k = 0; k < assign.users(); ++k) out[k] = sinr_from_groups(s, budget, k);
  return out;
}

double rate(double sinr_value, double bandwidth) {
  if (sinr_value < 0.0 || std::isnan(sinr_value)) throw DomainError("SINR must be nonnegative");
  return bandwidth * std::log2(1.0 + sinr_value);
}

std::vector<double> rates(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                          const LinkBudget& budget) {
  std::vector<double> out = sinrs(gains, assign, p, budget);
  for (double& v : out) v = rate(v, budget.bandwidth);
  return out;
}

double sum_rate(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                const LinkBudget& budget) {
  const std::vector<double> r = rates(gains, assign, p, budget);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

double log_sum(std::span<const double> user_rates) {
  double total = 0.0;
  for (std::size_t k = 0; k < user_rates.size(); ++k) {
    if (!(user_rates[k] > 0.0)) {
      throw InfeasibleAssignmentError("user " + std::to_string(k) +
                                      " has zero rate; logarithmic objective undefined");
    }
    total += std::log(user_rates[k]);
  }
  return total;
}

double log_sum_rate(const GainMatrix& gains, const Assignment& assign, const PowerVector& p,
                    const LinkBudget& budget) {
  return log_sum(rates(gains, assign, p, budget));
}

double objective_value(Objective objective, std::span<const double> user_rates) {
  if (objective == Objective::kMaxLogSumRate) return log_sum(user_rates);
  return std::accumulate(user_rates.begin(), user_rates.end(), 0.0);
}

double jain_fairness(std::span<const double> user_rates) {
  if (user_rates.empty()) throw DomainError("jain_fairness needs at least one rate");
  double sum = 0.0, sum_sq = 0.0;
  for (double r : user_rates) {
    if (r < 0.0) throw DomainError("rates must be nonnegative");
    sum += r;
    sum_sq += r * r;
  }
  if (!(sum_sq > 0.0)) throw DomainError("jain_fairness is undefined when every rate is zero");
  return sum * sum / (static_cast<double>(user_rates.size()) * sum_sq);
}

std::vector<double> tdma_rates(const GainMatrix& gains, const PowerVector& p,
                               const LinkBudget& budget) {
  if (gains.cols() != p.size()) throw DimensionError("gains and power vector disagree on N");
  const auto users = gains.rows();
  std::vector<double> out(users);
  for (Eigen::Index k = 0; k < users; ++k) {
    const double amplitude = budget.responsivity * gains.row(k).dot(p);
    const double snr = amplitude * amplitude / budget.noise_power();
    out[k] = rate(snr, budget.bandwidth) / static_cast<double>(users);
  }
  return out;
}

}  // namespace vlc

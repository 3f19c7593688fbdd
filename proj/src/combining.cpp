#include "vlc/combining.hpp"

#include <bit>
#include <string>

namespace vlc {

namespace {

void check_inputs(const ChannelGains& gains, const Assignment& assign, const PowerVector& p,
                  int k) {
  if (gains.users() != assign.users() || gains.leds() != assign.leds() ||
      p.size() != assign.leds()) {
    throw DimensionError("gains, assignment and power vector disagree on K or N");
  }
  if (k < 0 || k >= assign.users()) throw DimensionError("user index out of range");
}

CombiningWeights solve_weights(const CorrelationMatrix& r, const Eigen::VectorXd& signal) {
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() != Eigen::Success) {
    throw DomainError("interference-plus-noise correlation matrix is not positive definite");
  }
  return llt.solve(signal);
}

}  // namespace

Eigen::MatrixXd group_signals(const ChannelGains& gains, const Assignment& assign,
                              const PowerVector& p, const LinkBudget& budget, int k) {
  check_inputs(gains, assign, p, k);
  const int pds = gains.pds_per_user();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(pds, assign.users());
  for (int n = 0; n < assign.leds(); ++n) {
    const int l = assign.owners()[n];
    if (l < 0) continue;
    for (int m = 0; m < pds; ++m) s(m, l) += budget.responsivity * p(n) * gains(k, m, n);
  }
  return s;
}

double combined_sinr(const ChannelGains& gains, const Assignment& assign, const PowerVector& p,
                     const LinkBudget& budget, const CombiningWeights& w, int k) {
  const Eigen::MatrixXd s = group_signals(gains, assign, p, budget, k);
  if (w.size() != s.rows()) throw DimensionError("weight vector length differs from PD count");
  if (!(w.cwiseAbs().maxCoeff() > 0.0)) throw DomainError("combining weights are all zero");
  const Eigen::RowVectorXd projected = w.transpose() * s;
  double interference = 0.0;
  for (int l = 0; l < assign.users(); ++l)
    if (l != k) interference += projected(l) * projected(l);
  return projected(k) * projected(k) / (w.squaredNorm() * budget.noise_power() + interference);
}

CombiningWeights mrc_weights(const ChannelGains& gains, const Assignment& assign,
                             const PowerVector& p, const LinkBudget& budget, int k) {
  const Eigen::MatrixXd s = group_signals(gains, assign, p, budget, k);
  CombiningWeights w(s.rows());
  for (Eigen::Index m = 0; m < s.rows(); ++m) {
    double interference = 0.0;
    for (int l = 0; l < assign.users(); ++l)
      if (l != k) interference += s(m, l) * s(m, l);
    w(m) = s(m, k) * s(m, k) / (budget.noise_power() + interference);
  }
  return w;
}

CorrelationMatrix oc_correlation(const ChannelGains& gains, const Assignment& assign,
                                 const PowerVector& p, const LinkBudget& budget, int k) {
  check_inputs(gains, assign, p, k);
  const int pds = gains.pds_per_user();
  CorrelationMatrix r = budget.noise_power() * Eigen::MatrixXd::Identity(pds, pds);
  Eigen::VectorXd u(pds);
  for (int n = 0; n < assign.leds(); ++n) {
    const int l = assign.owners()[n];
    if (l < 0 || l == k) continue;
    for (int m = 0; m < pds; ++m) u(m) = budget.responsivity * p(n) * gains(k, m, n);
    r.noalias() += u * u.transpose();
  }
  return r;
}

CorrelationMatrix gboc_correlation(const ChannelGains& gains, const Assignment& assign,
                                   const PowerVector& p, const LinkBudget& budget, int k) {
  const Eigen::MatrixXd s = group_signals(gains, assign, p, budget, k);
  const auto pds = s.rows();
  CorrelationMatrix r = budget.noise_power() * Eigen::MatrixXd::Identity(pds, pds);
  for (int l = 0; l < assign.users(); ++l)
    if (l != k) r.noalias() += s.col(l) * s.col(l).transpose();
  return r;
}

CombiningWeights oc_weights(const ChannelGains& gains, const Assignment& assign,
                            const PowerVector& p, const LinkBudget& budget, int k) {
  return solve_weights(oc_correlation(gains, assign, p, budget, k),
                       group_signals(gains, assign, p, budget, k).col(k));
}

CombiningWeights gboc_weights(const ChannelGains& gains, const Assignment& assign,
                              const PowerVector& p, const LinkBudget& budget, int k) {
  return solve_weights(gboc_correlation(gains, assign, p, budget, k),
                       group_signals(gains, assign, p, budget, k).col(k));
}

const char* to_string(Combining scheme) {
  switch (scheme) {
    case Combining::kMrc:
      return "mrc";
    case Combining::kOc:
      return "oc";
    case Combining::kGbOc:
      return "gboc";
  }
  return "?";
}

CombiningWeights combining_weights(Combining scheme, const ChannelGains& gains,
                                   const Assignment& assign, const PowerVector& p,
                                   const LinkBudget& budget, int k) {
  switch (scheme) {
    case Combining::kMrc:
      return mrc_weights(gains, assign, p, budget, k);
    case Combining::kOc:
      return oc_weights(gains, assign, p, budget, k);
    case Combining::kGbOc:
      return gboc_weights(gains, assign, p, budget, k);
  }
  throw DomainError("unknown combining scheme");
}

int assignment_field_bits(int users) {
  if (users < 1) throw DomainError("assignment codec needs at least one user");
  return static_cast<int>(std::bit_width(static_cast<unsigned>(users)));
}

std::size_t naive_assignment_bits(int users, int leds) {
  return static_cast<std::size_t>(users) * static_cast<std::size_t>(leds);
}

std::string EncodedAssignment::bit_string() const {
  std::string out;
  out.reserve(payload_bits());
  for (std::size_t i = 0; i < payload_bits(); ++i) {
    out.push_back(((bytes[i / 8] >> (7 - i % 8)) & 1u) ? '1' : '0');
  }
  return out;
}

EncodedAssignment encode_assignment(const Assignment& assign) {
  EncodedAssignment e;
  e.users = assign.users();
  e.leds = assign.leds();
  e.field_bits = assignment_field_bits(e.users);
  e.bytes.assign((e.payload_bits() + 7) / 8, 0);
  std::size_t bit = 0;
  for (int n = 0; n < e.leds; ++n) {
    const unsigned value = static_cast<unsigned>(assign.owners()[n] + 1);
    for (int b = e.field_bits - 1; b >= 0; --b, ++bit) {
      if ((value >> b) & 1u) e.bytes[bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    }
  }
  return e;
}

Assignment decode_assignment(const std::vector<std::uint8_t>& bytes, int users, int leds) {
  if (leds < 0) throw DomainError("negative LED count");
  const int width = assignment_field_bits(users);
  const std::size_t bits = static_cast<std::size_t>(width) * static_cast<std::size_t>(leds);
  if (bytes.size() != (bits + 7) / 8) {
    throw DomainError("assignment broadcast has " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string((bits + 7) / 8));
  }
  auto bit_at = [&](std::size_t i) { return (bytes[i / 8] >> (7 - i % 8)) & 1u; };
  for (std::size_t i = bits; i < bytes.size() * 8; ++i) {
    if (bit_at(i)) throw DomainError("assignment broadcast has nonzero padding");
  }
  Assignment a(users, leds);
  std::size_t bit = 0;
  for (int n = 0; n < leds; ++n) {
    unsigned value = 0;
    for (int b = 0; b < width; ++b, ++bit) value = (value << 1) | bit_at(bit);
    if (value > static_cast<unsigned>(users)) {
      throw DomainError("assignment broadcast names user " + std::to_string(value) +
                        " but K = " + std::to_string(users));
    }
    if (value > 0) a.assign(n, static_cast<int>(value) - 1);
  }
  return a;
}

Assignment decode_assignment(const EncodedAssignment& encoded) {
  return decode_assignment(encoded.bytes, encoded.users, encoded.leds);
}

}  // namespace vlc

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vlc/channel.hpp"
#include "vlc/network.hpp"

namespace vlc {

/// Length-M PD weights, unnormalized.
using CombiningWeights = Eigen::VectorXd;
using CorrelationMatrix = Eigen::MatrixXd;

/// Column l holds s_{k,l}: what the LEDs serving user l deliver at each of
/// user k's PDs, r * sum_n a_{l,n} p_n h_{k(m),n}.
Eigen::MatrixXd group_signals(const ChannelGains& gains, const Assignment& assign,
                              const PowerVector& p, const LinkBudget& budget, int k);

/// Post-combining SINR of user k. Throws DomainError if w is all zero.
double combined_sinr(const ChannelGains& gains, const Assignment& assign, const PowerVector& p,
                     const LinkBudget& budget, const CombiningWeights& w, int k);

/// Per-PD SINR as weight.
CombiningWeights mrc_weights(const ChannelGains& gains, const Assignment& assign,
                             const PowerVector& p, const LinkBudget& budget, int k);

/// N0 B I plus u_n u_n^T for every LED that serves another user, with
/// u_n = r p_n h_{k(.),n}.
CorrelationMatrix oc_correlation(const ChannelGains& gains, const Assignment& assign,
                                 const PowerVector& p, const LinkBudget& budget, int k);

/// N0 B I plus s_{k,l} s_{k,l}^T for every other user l.
CorrelationMatrix gboc_correlation(const ChannelGains& gains, const Assignment& assign,
                                   const PowerVector& p, const LinkBudget& budget, int k);

/// R^{-1} s_{k,k}. Throws DomainError when R is not positive definite.
CombiningWeights oc_weights(const ChannelGains& gains, const Assignment& assign,
                            const PowerVector& p, const LinkBudget& budget, int k);
CombiningWeights gboc_weights(const ChannelGains& gains, const Assignment& assign,
                              const PowerVector& p, const LinkBudget& budget, int k);

enum class Combining { kMrc, kOc, kGbOc };

const char* to_string(Combining scheme);
CombiningWeights combining_weights(Combining scheme, const ChannelGains& gains,
                                   const Assignment& assign, const PowerVector& p,
                                   const LinkBudget& budget, int k);

/// Compact assignment broadcast: one field of bit_width(K) = ceil(log2(K+1))
/// bits per LED in LED order, MSB first, packed big-endian into bytes with
/// zero padding at the end. Field value 0 is "unassigned", v is user v - 1.
struct EncodedAssignment {
  int users = 0;
  int leds = 0;
  int field_bits = 0;
  std::vector<std::uint8_t> bytes;

  std::size_t payload_bits() const {
    return static_cast<std::size_t>(field_bits) * static_cast<std::size_t>(leds);
  }
  /// Payload as '0'/'1' characters, padding excluded.
  std::string bit_string() const;
};

int assignment_field_bits(int users);
/// N * K, the cost of sending the matrix itself.
std::size_t naive_assignment_bits(int users, int leds);

EncodedAssignment encode_assignment(const Assignment& assign);
/// Throws DomainError on a wrong byte count, nonzero padding or a field
/// value above K.
Assignment decode_assignment(const std::vector<std::uint8_t>& bytes, int users, int leds);
Assignment decode_assignment(const EncodedAssignment& encoded);

}  // namespace vlc

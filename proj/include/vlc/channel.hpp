#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vlc/error.hpp"

namespace vlc {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

/// An LED: position, unit boresight, Lambertian order and signal standard
/// deviation (power coefficient).
struct LedSource {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = -Vec3::UnitZ();
  double lambertian_order = 1.0;
  double power_coefficient = 1.0;
};

struct Photodetector {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::UnitZ();
  double area = 1e-5;         // m^2
  double fov = kPi / 2;       // half-angle, rad
  double responsivity = 1.0;  // A/W
};

/// A diffuse wall patch. Orientation is the inward surface normal.
struct Reflector {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::UnitZ();
  double area = 1.0;
  double coefficient = 0.0;
};

/// Axis-aligned room with one corner at the origin.
struct Room {
  Vec3 dimensions = Vec3(1, 1, 1);
  double wall_coefficient = 0.0;
  double floor_coefficient = 0.0;
  double ceiling_coefficient = 0.0;
  double patch_resolution = 1.0;  // target patch edge, m
};

/// Anything that radiates with a Lambertian pattern.
struct Emitter {
  Vec3 position;
  Vec3 orientation;
  double order;
};

/// Anything that collects light through a flat aperture with a FOV cutoff.
struct Aperture {
  Vec3 position;
  Vec3 orientation;
  double area;
  double fov;
};

Emitter as_emitter(const LedSource& led);
Emitter as_emitter(const Reflector& patch);  // order 1
Aperture as_aperture(const Photodetector& pd);
Aperture as_aperture(const Reflector& patch);  // area dA, FOV pi/2

/// DC part of the line-of-sight impulse response. Zero outside the receiver
/// FOV, behind the source, or for grazing geometry (cos <= 0).
/// Throws DomainError for coincident positions.
double los_gain(const Emitter& source, const Aperture& receiver);
double los_gain(const LedSource& source, const Photodetector& pd);

/// Propagation delay R/c in seconds.
double los_delay(const Vec3& from, const Vec3& to);
double los_delay(const LedSource& source, const Photodetector& pd);

/// Tiles all six room surfaces with a uniform grid per face. Order of the
/// result: floor, ceiling, wall x=0, wall x=X, wall y=0, wall y=Y.
std::vector<Reflector> discretize_room(const Room& room);

/// Finite reflection order or the full geometric series.
class ReflectionOrder {
 public:
  static ReflectionOrder up_to(int max_bounces);
  static ReflectionOrder infinite() { return ReflectionOrder(-1); }

  bool is_infinite() const { return max_ < 0; }
  int max_bounces() const;

 private:
  explicit ReflectionOrder(int m) : max_(m) {}
  int max_;
};

/// Node 0 is the LED in its source role and the PD in its receiver role;
/// nodes 1..L are the reflectors. Entry (i, j) couples source j into
/// receiver i with phase exp(j 2 pi tau_ij f).
Eigen::MatrixXcd build_cfr_matrix(const LedSource& source, const Photodetector& pd,
                                  std::span<const Reflector> reflectors, double frequency_hz);

enum class CfrMethod { kSpectral, kIterated };

struct CfrOptions {
  CfrMethod preferred = CfrMethod::kSpectral;
  /// The eigenvector basis is rejected (and iterated products used instead)
  /// when its reciprocal condition number drops below this.
  double min_basis_rcond = 1e-7;
  double spectral_margin = 1e-6;
};

struct CfrEvaluation {
  std::complex<double> value;
  CfrMethod method;  // the method that actually produced `value`
};

/// Channel frequency response at one frequency, summing bounce orders
/// 0..max (or all of them for infinite order).
CfrEvaluation evaluate_cfr(const LedSource& source, const Photodetector& pd,
                           std::span<const Reflector> reflectors, double frequency_hz,
                           ReflectionOrder order, const CfrOptions& options = {});

std::complex<double> cfr(const LedSource& source, const Photodetector& pd,
                         std::span<const Reflector> reflectors, double frequency_hz,
                         ReflectionOrder order, const CfrOptions& options = {});

/// Real DC gain (CFR at f = 0).
double dc_gain(const LedSource& source, const Photodetector& pd,
               std::span<const Reflector> reflectors, ReflectionOrder order,
               const CfrOptions& options = {});

struct ImpulseSample {
  double time;  // s
  double amplitude;
};

struct RecursiveOptions {
  /// Upper bound on the number of reflector sequences enumerated.
  double path_cap = 1e9;
  /// 0 keeps one sample per path; otherwise paths are accumulated into bins
  /// of this width (sample time = bin start).
  double bin_width = 0.0;
  /// Evaluate sum(amplitude * exp(j 2 pi f tau)) at this frequency too.
  double frequency_hz = 0.0;
};

struct RecursiveResponse {
  std::vector<ImpulseSample> samples;
  double dc_gain = 0.0;
  std::complex<double> frequency_response;  // at RecursiveOptions::frequency_hz
  std::size_t paths = 0;                    // nonzero paths, LOS included
};

/// Time-domain multiple-bounce response by explicit enumeration of
/// reflector sequences up to `max_bounces`.
RecursiveResponse recursive_oracle(const LedSource& source, const Photodetector& pd,
                                   std::span<const Reflector> reflectors, int max_bounces,
                                   const RecursiveOptions& options = {});

struct CirGrid {
  double max_frequency_hz = 100e6;
  double spacing_hz = 1e6;
};

struct CfrSample {
  double frequency_hz;
  std::complex<double> value;
};

std::vector<CfrSample> cfr_sweep(const LedSource& source, const Photodetector& pd,
                                 std::span<const Reflector> reflectors, ReflectionOrder order,
                                 const CirGrid& grid = {}, const CfrOptions& options = {});

/// Inverse DFT of a one-sided CFR grid after Hermitian extension. Samples are
/// per-bin amplitudes, so they sum to the DC value of the grid.
std::vector<ImpulseSample> cir_from_cfr(std::span<const CfrSample> one_sided);

/// Dense K x M x N tensor of DC gains h_{k(m)n}.
class ChannelGains {
 public:
  ChannelGains() = default;
  ChannelGains(int users, int pds_per_user, int leds);

  int users() const { return users_; }
  int pds_per_user() const { return pds_; }
  int leds() const { return leds_; }

  double& operator()(int k, int m, int n) { return data_[index(k, m, n)]; }
  double operator()(int k, int m, int n) const { return data_[index(k, m, n)]; }

  /// K x N matrix for single-PD receivers. Throws DimensionError when M != 1.
  Eigen::MatrixXd single_pd() const;
  /// K x N matrix of per-receiver sums over the PD array.
  Eigen::MatrixXd summed_over_pds() const;
  /// M x N matrix of one user's PD array.
  Eigen::MatrixXd user_array(int k) const;

 private:
  std::size_t index(int k, int m, int n) const {
    return (static_cast<std::size_t>(k) * pds_ + m) * leds_ + n;
  }

  int users_ = 0;
  int pds_ = 0;
  int leds_ = 0;
  std::vector<double> data_;
};

/// DC channel from a fixed LED set inside a fixed room to arbitrary
/// photodetectors. The reflector-to-reflector operator and the per-LED
/// reflected fields are computed once, so per-PD evaluation is O(L * N).
class ChannelModel {
 public:
  ChannelModel(std::vector<LedSource> leds, std::vector<Reflector> reflectors,
               ReflectionOrder order);

  int leds() const { return static_cast<int>(leds_.size()); }
  int reflectors() const { return static_cast<int>(reflectors_.size()); }

  /// DC gains from every LED to `pd`.
  Eigen::VectorXd gains_to(const Photodetector& pd) const;

  /// receivers[k][m] is PD m of user k; every user must have the same count.
  ChannelGains gains(std::span<const std::vector<Photodetector>> receivers) const;

 private:
  std::vector<LedSource> leds_;
  std::vector<Reflector> reflectors_;
  // Column n: sum over bounce counts d >= 1 of M^(d-1) a_n, where a_n holds
  // LED n -> patch gains and M_ij = G_ij rho_j.
  Eigen::MatrixXd reflected_field_;
};

}  // namespace vlc

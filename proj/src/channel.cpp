#include "vlc/channel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace vlc {

namespace {

constexpr double kCoincidentDistance = 1e-12;

void require_unit(const Vec3& v, const char* what) {
  if (std::abs(v.norm() - 1.0) > 1e-9) {
    throw DomainError(std::string(what) + " orientation must be a unit vector");
  }
}

// Same as los_gain but coincident points simply do not couple. Used when
// building reflector operators, where a patch and an LED may share a point.
double coupling(const Emitter& src, const Aperture& rx) {
  const Vec3 d = rx.position - src.position;
  const double dist = d.norm();
  if (dist <= kCoincidentDistance) return 0.0;
  const double cos_phi = src.orientation.dot(d) / dist;
  const double cos_theta = -rx.orientation.dot(d) / dist;
  if (cos_phi <= 0.0 || cos_theta <= 0.0) return 0.0;
  if (cos_theta < std::cos(rx.fov)) return 0.0;
  const double pattern = src.order == 1.0 ? cos_phi : std::pow(cos_phi, src.order);
  return (src.order + 1.0) / (2.0 * kPi) * pattern * cos_theta * rx.area / (dist * dist);
}

// Gains and delays of every node pair of the (L+1)-node graph; the phase
// at a given frequency is applied on demand.
struct CouplingGraph {
  Eigen::MatrixXd gain;   // (i, j): source j -> receiver i
  Eigen::MatrixXd delay;  // seconds
  Eigen::VectorXd reflectance;  // D diagonal, entry 0 is zero

  Eigen::MatrixXcd at(double frequency_hz) const {
    const Eigen::Index n = gain.rows();
    Eigen::MatrixXcd c(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double g = gain(i, j);
        c(i, j) = g == 0.0 ? std::complex<double>(0.0)
                           : std::polar(g, 2.0 * kPi * delay(i, j) * frequency_hz);
      }
    }
    return c;
  }
};

CouplingGraph build_graph(const LedSource& source, const Photodetector& pd,
                          std::span<const Reflector> reflectors) {
  const Eigen::Index n = static_cast<Eigen::Index>(reflectors.size()) + 1;
  CouplingGraph g;
  g.gain = Eigen::MatrixXd::Zero(n, n);
  g.delay = Eigen::MatrixXd::Zero(n, n);
  g.reflectance = Eigen::VectorXd::Zero(n);

  const Emitter led = as_emitter(source);
  const Aperture det = as_aperture(pd);
  g.gain(0, 0) = los_gain(led, det);
  g.delay(0, 0) = los_delay(source.position, pd.position);

  for (Eigen::Index j = 1; j < n; ++j) {
    const Reflector& patch = reflectors[j - 1];
    g.reflectance(j) = patch.coefficient;
    const Emitter as_src = as_emitter(patch);
    const Aperture as_rx = as_aperture(patch);
    g.gain(0, j) = coupling(as_src, det);
    g.delay(0, j) = (pd.position - patch.position).norm() / kSpeedOfLight;
    g.gain(j, 0) = coupling(led, as_rx);
    g.delay(j, 0) = (patch.position - source.position).norm() / kSpeedOfLight;
    for (Eigen::Index i = 1; i < n; ++i) {
      if (i == j) continue;
      const Reflector& other = reflectors[i - 1];
      g.gain(i, j) = coupling(as_src, as_aperture(other));
      g.delay(i, j) = (other.position - patch.position).norm() / kSpeedOfLight;
    }
  }
  return g;
}

double spectral_radius(const Eigen::MatrixXcd& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

CfrEvaluation evaluate_graph(const CouplingGraph& graph, double frequency_hz,
                             ReflectionOrder order, const CfrOptions& options) {
  const Eigen::MatrixXcd c = graph.at(frequency_hz);
  const Eigen::VectorXcd p0 = c.col(0);  // C e
  Eigen::MatrixXcd cd = c * graph.reflectance.cast<std::complex<double>>().asDiagonal();

  if (!order.is_infinite() && order.max_bounces() == 0) {
    return {p0(0), options.preferred};
  }

  const double limit = 1.0 - options.spectral_margin;

  if (options.preferred == CfrMethod::kSpectral) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(cd);
    if (es.info() == Eigen::Success) {
      const Eigen::VectorXcd& lambda = es.eigenvalues();
      if (order.is_infinite() && lambda.cwiseAbs().maxCoeff() >= limit) {
        throw NonConvergenceError("reflection series diverges: spectral radius of C(f)D >= 1");
      }
      Eigen::PartialPivLU<Eigen::MatrixXcd> lu(es.eigenvectors());
      if (lu.rcond() >= options.min_basis_rcond) {
        const Eigen::VectorXcd y = lu.solve(p0);
        Eigen::VectorXcd weight(lambda.size());
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
          if (order.is_infinite()) {
            weight(i) = lambda(i) / (1.0 - lambda(i));
          } else {
            std::complex<double> power = 1.0, sum = 0.0;
            for (int d = 1; d <= order.max_bounces(); ++d) {
              power *= lambda(i);
              sum += power;
            }
            weight(i) = sum;
          }
        }
        const std::complex<double> tail =
            (es.eigenvectors().row(0).transpose().array() * weight.array() * y.array()).sum();
        return {p0(0) + tail, CfrMethod::kSpectral};
      }
    } else if (order.is_infinite()) {
      throw NonConvergenceError("eigendecomposition of C(f)D failed");
    }
  }

  if (order.is_infinite()) {
    if (spectral_radius(cd) >= limit) {
      throw NonConvergenceError("reflection series diverges: spectral radius of C(f)D >= 1");
    }
    const Eigen::Index n = cd.rows();
    const Eigen::VectorXcd x =
        (Eigen::MatrixXcd::Identity(n, n) - cd).partialPivLu().solve(p0);
    return {x(0), CfrMethod::kIterated};
  }

  Eigen::VectorXcd v = p0;
  std::complex<double> sum = p0(0);
  for (int d = 1; d <= order.max_bounces(); ++d) {
    v = cd * v;
    sum += v(0);
  }
  return {sum, CfrMethod::kIterated};
}

}  // namespace

Emitter as_emitter(const LedSource& led) {
  return {led.position, led.orientation, led.lambertian_order};
}
Emitter as_emitter(const Reflector& patch) { return {patch.position, patch.orientation, 1.0}; }
Aperture as_aperture(const Photodetector& pd) {
  return {pd.position, pd.orientation, pd.area, pd.fov};
}
Aperture as_aperture(const Reflector& patch) {
  return {patch.position, patch.orientation, patch.area, kPi / 2};
}

double los_gain(const Emitter& source, const Aperture& receiver) {
  if ((receiver.position - source.position).norm() <= kCoincidentDistance) {
    throw DomainError("los_gain: source and receiver positions coincide");
  }
  return coupling(source, receiver);
}

double los_gain(const LedSource& source, const Photodetector& pd) {
  require_unit(source.orientation, "LED");
  require_unit(pd.orientation, "photodetector");
  return los_gain(as_emitter(source), as_aperture(pd));
}

double los_delay(const Vec3& from, const Vec3& to) {
  const double dist = (to - from).norm();
  if (dist <= kCoincidentDistance) {
    throw DomainError("los_delay: positions coincide");
  }
  return dist / kSpeedOfLight;
}

double los_delay(const LedSource& source, const Photodetector& pd) {
  return los_delay(source.position, pd.position);
}

std::vector<Reflector> discretize_room(const Room& room) {
  const Vec3& dim = room.dimensions;
  if (!(dim.minCoeff() > 0.0)) throw DomainError("room dimensions must be positive");
  if (!(room.patch_resolution > 0.0)) throw DomainError("patch resolution must be positive");
  if (room.patch_resolution > dim.minCoeff() * (1.0 + 1e-12)) {
    throw DomainError("patch resolution exceeds the smallest room dimension");
  }
  for (double rho : {room.wall_coefficient, room.floor_coefficient, room.ceiling_coefficient}) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("reflection coefficients must lie in [0, 1)");
  }

  auto count = [&](double extent) {
    return std::max(1, static_cast<int>(std::ceil(extent / room.patch_resolution - 1e-9)));
  };
  const int nx = count(dim.x()), ny = count(dim.y()), nz = count(dim.z());
  const double dx = dim.x() / nx, dy = dim.y() / ny, dz = dim.z() / nz;

  std::vector<Reflector> patches;
  patches.reserve(2 * (nx * ny + nx * nz + ny * nz));

  auto horizontal = [&](double z, const Vec3& normal, double rho) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        patches.push_back({Vec3((i + 0.5) * dx, (j + 0.5) * dy, z), normal, dx * dy, rho});
  };
  horizontal(0.0, Vec3::UnitZ(), room.floor_coefficient);
  horizontal(dim.z(), -Vec3::UnitZ(), room.ceiling_coefficient);

  for (double x : {0.0, dim.x()}) {
    const Vec3 normal = x == 0.0 ? Vec3::UnitX() : Vec3(-Vec3::UnitX());
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        patches.push_back({Vec3(x, (j + 0.5) * dy, (k + 0.5) * dz), normal, dy * dz,
                           room.wall_coefficient});
  }
  for (double y : {0.0, dim.y()}) {
    const Vec3 normal = y == 0.0 ? Vec3::UnitY() : Vec3(-Vec3::UnitY());
    for (int i = 0; i < nx; ++i)
      for (int k = 0; k < nz; ++k)
        patches.push_back({Vec3((i + 0.5) * dx, y, (k + 0.5) * dz), normal, dx * dz,
                           room.wall_coefficient});
  }
  return patches;
}

ReflectionOrder ReflectionOrder::up_to(int max_bounces) {
  if (max_bounces < 0) throw DomainError("reflection order must be >= 0");
  return ReflectionOrder(max_bounces);
}

int ReflectionOrder::max_bounces() const {
  if (is_infinite()) throw DomainError("infinite reflection order has no maximum");
  return max_;
}

Eigen::MatrixXcd build_cfr_matrix(const LedSource& source, const Photodetector& pd,
                                  std::span<const Reflector> reflectors, double frequency_hz) {
  return build_graph(source, pd, reflectors).at(frequency_hz);
}

CfrEvaluation evaluate_cfr(const LedSource& source, const Photodetector& pd,
                           std::span<const Reflector> reflectors, double frequency_hz,
                           ReflectionOrder order, const CfrOptions& options) {
  return evaluate_graph(build_graph(source, pd, reflectors), frequency_hz, order, options);
}

std::complex<double> cfr(const LedSource& source, const Photodetector& pd,
                         std::span<const Reflector> reflectors, double frequency_hz,
                         ReflectionOrder order, const CfrOptions& options) {
  return evaluate_cfr(source, pd, reflectors, frequency_hz, order, options).value;
}

double dc_gain(const LedSource& source, const Photodetector& pd,
               std::span<const Reflector> reflectors, ReflectionOrder order,
               const CfrOptions& options) {
  const std::complex<double> h = cfr(source, pd, reflectors, 0.0, order, options);
  // Roundoff in the eigenvector basis can leave a tiny negative residue when
  // nothing reaches the PD.
  return std::max(h.real(), 0.0);
}

RecursiveResponse recursive_oracle(const LedSource& source, const Photodetector& pd,
                                   std::span<const Reflector> reflectors, int max_bounces,
                                   const RecursiveOptions& options) {
  if (max_bounces < 0) throw DomainError("max_bounces must be >= 0");
  const std::size_t count = reflectors.size();
  double estimate = 0.0, layer = 1.0;
  for (int d = 1; d <= max_bounces; ++d) {
    layer *= static_cast<double>(count);
    estimate += layer;
  }
  if (estimate > options.path_cap) {
    throw ResourceLimitError("recursive_oracle: " + std::to_string(estimate) +
                             " reflector sequences exceed the path cap");
  }

  const CouplingGraph graph = build_graph(source, pd, reflectors);
  const double f = options.frequency_hz;
  const Eigen::MatrixXcd phase_edges = graph.at(f);  // gain * phase per edge

  RecursiveResponse out;
  long double dc_sum = 0.0L;
  std::complex<long double> freq_sum = 0.0L;
  std::vector<double> bins;

  auto record = [&](double amplitude, double delay, std::complex<double> weighted) {
    dc_sum += amplitude;
    freq_sum += std::complex<long double>(weighted.real(), weighted.imag());
    ++out.paths;
    if (options.bin_width > 0.0) {
      const auto bin = static_cast<std::size_t>(delay / options.bin_width);
      if (bin >= bins.size()) bins.resize(bin + 1, 0.0);
      bins[bin] += amplitude;
    } else {
      out.samples.push_back({delay, amplitude});
    }
  };

  record(graph.gain(0, 0), graph.delay(0, 0), phase_edges(0, 0));

  const auto nodes = static_cast<Eigen::Index>(count);
  // `arrived` is the power reaching patch j (before its reflectance).
  std::function<void(int, Eigen::Index, double, double, std::complex<double>)> walk =
      [&](int depth, Eigen::Index j, double arrived, double delay, std::complex<double> phasor) {
        const double rho = graph.reflectance(j);
        const double emitted = arrived * rho;
        if (emitted == 0.0) return;
        const std::complex<double> emitted_phasor = phasor * rho;
        if (graph.gain(0, j) > 0.0) {
          record(emitted * graph.gain(0, j), delay + graph.delay(0, j),
                 emitted_phasor * phase_edges(0, j));
        }
        if (depth == max_bounces) return;
        for (Eigen::Index i = 1; i <= nodes; ++i) {
          const double g = graph.gain(i, j);
          if (g == 0.0) continue;
          walk(depth + 1, i, emitted * g, delay + graph.delay(i, j),
               emitted_phasor * phase_edges(i, j));
        }
      };

  if (max_bounces >= 1) {
    for (Eigen::Index j = 1; j <= nodes; ++j) {
      if (graph.gain(j, 0) > 0.0) walk(1, j, graph.gain(j, 0), graph.delay(j, 0), phase_edges(j, 0));
    }
  }

  if (options.bin_width > 0.0) {
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (bins[b] != 0.0) out.samples.push_back({b * options.bin_width, bins[b]});
    }
  }
  out.dc_gain = static_cast<double>(dc_sum);
  out.frequency_response = {static_cast<double>(freq_sum.real()),
                            static_cast<double>(freq_sum.imag())};
  return out;
}

std::vector<CfrSample> cfr_sweep(const LedSource& source, const Photodetector& pd,
                                 std::span<const Reflector> reflectors, ReflectionOrder order,
                                 const CirGrid& grid, const CfrOptions& options) {
  if (!(grid.spacing_hz > 0.0) || grid.max_frequency_hz < 0.0) {
    throw DomainError("frequency grid needs positive spacing and nonnegative maximum");
  }
  const CouplingGraph graph = build_graph(source, pd, reflectors);
  const int points = static_cast<int>(std::floor(grid.max_frequency_hz / grid.spacing_hz + 1e-9)) + 1;
  std::vector<CfrSample> out;
  out.reserve(points);
  for (int i = 0; i < points; ++i) {
    const double f = i * grid.spacing_hz;
    out.push_back({f, evaluate_graph(graph, f, order, options).value});
  }
  return out;
}

std::vector<ImpulseSample> cir_from_cfr(std::span<const CfrSample> one_sided) {
  if (one_sided.size() < 2) throw DomainError("cir_from_cfr needs at least two frequency points");
  const double df = one_sided[1].frequency_hz - one_sided[0].frequency_hz;
  if (one_sided[0].frequency_hz != 0.0 || !(df > 0.0)) {
    throw DomainError("cir_from_cfr expects a uniform grid starting at 0 Hz");
  }
  const std::size_t f_count = one_sided.size();
  const std::size_t total = 2 * f_count - 1;
  const double dt = 1.0 / (static_cast<double>(total) * df);

  // H(f) carries exp(+j 2 pi f tau), so the inverse kernel is exp(-j ...).
  std::vector<ImpulseSample> out(total);
  for (std::size_t n = 0; n < total; ++n) {
    double acc = one_sided[0].value.real();
    for (std::size_t k = 1; k < f_count; ++k) {
      const double angle = -2.0 * kPi * static_cast<double>(k * n % total) / total;
      acc += 2.0 * (one_sided[k].value * std::polar(1.0, angle)).real();
    }
    out[n] = {n * dt, acc / static_cast<double>(total)};
  }
  return out;
}

ChannelGains::ChannelGains(int users, int pds_per_user, int leds)
    : users_(users), pds_(pds_per_user), leds_(leds) {
  if (users < 0 || pds_per_user < 0 || leds < 0) throw DimensionError("negative tensor extent");
  data_.assign(static_cast<std::size_t>(users) * pds_per_user * leds, 0.0);
}

Eigen::MatrixXd ChannelGains::single_pd() const {
  if (pds_ != 1) throw DimensionError("single_pd() requires exactly one PD per user");
  return summed_over_pds();
}

Eigen::MatrixXd ChannelGains::summed_over_pds() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(users_, leds_);
  for (int k = 0; k < users_; ++k)
    for (int m = 0; m < pds_; ++m)
      for (int n = 0; n < leds_; ++n) h(k, n) += (*this)(k, m, n);
  return h;
}

Eigen::MatrixXd ChannelGains::user_array(int k) const {
  if (k < 0 || k >= users_) throw DimensionError("user index out of range");
  Eigen::MatrixXd h(pds_, leds_);
  for (int m = 0; m < pds_; ++m)
    for (int n = 0; n < leds_; ++n) h(m, n) = (*this)(k, m, n);
  return h;
}

ChannelModel::ChannelModel(std::vector<LedSource> leds, std::vector<Reflector> reflectors,
                           ReflectionOrder order)
    : leds_(std::move(leds)), reflectors_(std::move(reflectors)) {
  for (const LedSource& led : leds_) {
    require_unit(led.orientation, "LED");
    if (!(led.lambertian_order > 0.0)) throw DomainError("Lambertian order must be positive");
  }
  const auto patches = static_cast<Eigen::Index>(reflectors_.size());
  const auto sources = static_cast<Eigen::Index>(leds_.size());

  Eigen::MatrixXd direct(patches, sources);
  for (Eigen::Index n = 0; n < sources; ++n) {
    const Emitter e = as_emitter(leds_[n]);
    for (Eigen::Index j = 0; j < patches; ++j) direct(j, n) = coupling(e, as_aperture(reflectors_[j]));
  }

  if (!order.is_infinite() && order.max_bounces() == 0) {
    reflected_field_ = Eigen::MatrixXd::Zero(patches, sources);
    return;
  }

  Eigen::MatrixXd transfer = Eigen::MatrixXd::Zero(patches, patches);
  for (Eigen::Index j = 0; j < patches; ++j) {
    const double rho = reflectors_[j].coefficient;
    if (rho == 0.0) continue;
    const Emitter e = as_emitter(reflectors_[j]);
    for (Eigen::Index i = 0; i < patches; ++i) {
      if (i != j) transfer(i, j) = coupling(e, as_aperture(reflectors_[i])) * rho;
    }
  }

  if (order.is_infinite()) {
    if (patches > 0) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(transfer, /*computeEigenvectors=*/false);
      if (es.eigenvalues().cwiseAbs().maxCoeff() >= 1.0 - 1e-6) {
        throw NonConvergenceError("reflection series diverges for this room discretization");
      }
    }
    reflected_field_ = (Eigen::MatrixXd::Identity(patches, patches) - transfer)
                           .partialPivLu()
                           .solve(direct);
    return;
  }

  reflected_field_ = direct;
  Eigen::MatrixXd layer = direct;
  for (int d = 2; d <= order.max_bounces(); ++d) {
    layer = transfer * layer;
    reflected_field_ += layer;
  }
}

Eigen::VectorXd ChannelModel::gains_to(const Photodetector& pd) const {
  require_unit(pd.orientation, "photodetector");
  const Aperture det = as_aperture(pd);
  const auto sources = static_cast<Eigen::Index>(leds_.size());
  Eigen::VectorXd h(sources);
  for (Eigen::Index n = 0; n < sources; ++n) h(n) = los_gain(as_emitter(leds_[n]), det);

  const auto patches = static_cast<Eigen::Index>(reflectors_.size());
  if (patches > 0) {
    Eigen::VectorXd exit(patches);  // rho_j * (patch j -> PD)
    for (Eigen::Index j = 0; j < patches; ++j) {
      exit(j) = reflectors_[j].coefficient * coupling(as_emitter(reflectors_[j]), det);
    }
    h.noalias() += reflected_field_.transpose() * exit;
  }
  return h;
}

ChannelGains ChannelModel::gains(std::span<const std::vector<Photodetector>> receivers) const {
  const int users = static_cast<int>(receivers.size());
  const int pds = users == 0 ? 0 : static_cast<int>(receivers[0].size());
  ChannelGains out(users, pds, leds());
  for (int k = 0; k < users; ++k) {
    if (static_cast<int>(receivers[k].size()) != pds) {
      throw DimensionError("every user needs the same number of PDs");
    }
    for (int m = 0; m < pds; ++m) {
      const Eigen::VectorXd h = gains_to(receivers[k][m]);
      for (int n = 0; n < leds(); ++n) out(k, m, n) = h(n);
    }
  }
  return out;
}

}  // namespace vlc

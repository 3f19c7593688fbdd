#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "vlc/channel.hpp"
#include "vlc/harness.hpp"

using namespace vlc;

namespace {

LedSource down_led(const Vec3& at, double order = 1.0) {
  LedSource led;
  led.position = at;
  led.orientation = -Vec3::UnitZ();
  led.lambertian_order = order;
  return led;
}

Photodetector up_pd(const Vec3& at, double area = 4e-5, double fov = kPi / 2) {
  Photodetector pd;
  pd.position = at;
  pd.orientation = Vec3::UnitZ();
  pd.area = area;
  pd.fov = fov;
  return pd;
}

Room small_room(double rho = 0.6, double resolution = 1.0) {
  Room r;
  r.dimensions = Vec3(3, 2, 2.5);
  r.wall_coefficient = rho;
  r.floor_coefficient = rho / 2;
  r.ceiling_coefficient = rho / 3;
  r.patch_resolution = resolution;
  return r;
}

double rel(std::complex<double> a, std::complex<double> b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("los gain hand value") {
  const double g = los_gain(down_led(Vec3(0, 0, 3)), up_pd(Vec3::Zero()));
  CHECK(g == doctest::Approx(2.0 / (2 * kPi) * 4e-5 / 9).epsilon(1e-14));
  CHECK(g == doctest::Approx(1.41471e-6).epsilon(1e-5));
}

TEST_CASE("los gain off-axis matches closed form") {
  // PD 1 m aside, 2 m below, order 3.
  const LedSource led = down_led(Vec3(1, 0, 2), 3.0);
  const Photodetector pd = up_pd(Vec3::Zero(), 1e-4);
  const double r2 = 5.0, c = 2.0 / std::sqrt(r2);
  CHECK(los_gain(led, pd) == doctest::Approx(4.0 / (2 * kPi) * std::pow(c, 3) * c * 1e-4 / r2));
}

TEST_CASE("los gain cutoffs") {
  const LedSource led = down_led(Vec3(1, 0, 1));
  // Incidence exactly 45 degrees.
  const double theta = kPi / 4;
  CHECK(los_gain(led, up_pd(Vec3::Zero(), 1e-4, theta + 1e-9)) > 0.0);
  CHECK(los_gain(led, up_pd(Vec3::Zero(), 1e-4, theta - 1e-9)) == 0.0);

  LedSource away = led;
  away.orientation = Vec3::UnitZ();
  CHECK(los_gain(away, up_pd(Vec3::Zero())) == 0.0);

  Photodetector down = up_pd(Vec3::Zero());
  down.orientation = -Vec3::UnitZ();
  CHECK(los_gain(led, down) == 0.0);
}

TEST_CASE("los gain is never negative near the cutoffs") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 2000; ++i) {
    LedSource led = down_led(Vec3(u(gen), u(gen), 1 + u(gen) * 0.01));
    led.orientation = Vec3(u(gen), u(gen), u(gen)).normalized();
    Photodetector pd = up_pd(Vec3::Zero(), 1e-4, 0.2 + 1.3 * std::abs(u(gen)));
    pd.orientation = Vec3(u(gen), u(gen), u(gen)).normalized();
    const double g = los_gain(led, pd);
    CHECK(g >= 0.0);
    CHECK(std::isfinite(g));
  }
}

TEST_CASE("los gain and delay reject coincident points") {
  CHECK_THROWS_AS(los_gain(down_led(Vec3::Zero()), up_pd(Vec3::Zero())), DomainError);
  CHECK_THROWS_AS(los_delay(Vec3::Zero(), Vec3::Zero()), DomainError);
}

TEST_CASE("los gain rejects non-unit orientation") {
  LedSource led = down_led(Vec3(0, 0, 2));
  led.orientation = Vec3(0, 0, -2);
  CHECK_THROWS_AS(los_gain(led, up_pd(Vec3::Zero())), DomainError);
}

TEST_CASE("los delay") {
  CHECK(los_delay(Vec3::Zero(), Vec3(3, 0, 0)) == doctest::Approx(1.00069e-8).epsilon(1e-5));
  CHECK(los_delay(Vec3::Zero(), Vec3(0, 0.299792458, 0)) == doctest::Approx(1e-9).epsilon(1e-15));
  CHECK(los_delay(Vec3::Zero(), Vec3(0, 0, kSpeedOfLight)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("discretize room counts and orientation") {
  Room r;
  r.dimensions = Vec3(12, 12, 4);
  r.patch_resolution = 2.0;
  r.wall_coefficient = 0.8;
  r.floor_coefficient = r.ceiling_coefficient = 0.3;
  const auto patches = discretize_room(r);
  CHECK(patches.size() == 120);

  double area = 0.0;
  for (const auto& p : patches) {
    area += p.area;
    CHECK(p.orientation.norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Inward: a step along the normal stays inside.
    const Vec3 inside = p.position + 0.01 * p.orientation;
    CHECK((inside.array() > 0.0).all());
    CHECK((inside.array() < r.dimensions.array()).all());
  }
  CHECK(area == doctest::Approx(2 * (144 + 48 + 48)));
  CHECK(patches.front().coefficient == 0.3);
  CHECK(patches.back().coefficient == 0.8);
}

TEST_CASE("discretize room with resolution equal to the smallest dimension") {
  Room r;
  r.dimensions = Vec3(2, 2, 2);
  r.patch_resolution = 2.0;
  const auto patches = discretize_room(r);
  CHECK(patches.size() == 6);
  Vec3 normal_sum = Vec3::Zero();
  for (const auto& p : patches) normal_sum += p.orientation;
  CHECK(normal_sum.norm() < 1e-15);
}

TEST_CASE("discretize room errors") {
  Room r;
  r.dimensions = Vec3(3, 3, 2);
  r.patch_resolution = 0.0;
  CHECK_THROWS_AS(discretize_room(r), DomainError);
  r.patch_resolution = 2.5;
  CHECK_THROWS_AS(discretize_room(r), DomainError);
  r.patch_resolution = 1.0;
  r.wall_coefficient = 1.0;
  CHECK_THROWS_AS(discretize_room(r), DomainError);
}

TEST_CASE("cfr matrix structure") {
  const Room room = small_room();
  const auto patches = discretize_room(room);
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(1, 1, 0.8), 1e-4, 1.2);

  const Eigen::MatrixXcd c0 = build_cfr_matrix(led, pd, patches, 0.0);
  CHECK(c0.rows() == static_cast<Eigen::Index>(patches.size()) + 1);
  CHECK(c0.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(c0.real().minCoeff() >= 0.0);
  for (Eigen::Index i = 0; i < c0.rows(); ++i) {
    if (i > 0) CHECK(c0(i, i) == std::complex<double>(0.0));
  }
  CHECK(c0(0, 0).real() == doctest::Approx(los_gain(led, pd)));

  // Row 0 holds patch-as-source into the PD.
  const double f = 5e6;
  const Eigen::MatrixXcd c = build_cfr_matrix(led, pd, patches, f);
  for (std::size_t j = 0; j < patches.size(); ++j) {
    const Vec3 d = pd.position - patches[j].position;
    const double cos_theta = pd.orientation.dot(-d) / d.norm();
    if (patches[j].orientation.dot(d) <= 0.0 || cos_theta < std::cos(pd.fov)) continue;
    const double expected = los_gain(as_emitter(patches[j]), as_aperture(pd));
    const double tau = los_delay(patches[j].position, pd.position);
    const std::complex<double> want = std::polar(expected, 2 * kPi * tau * f);
    CHECK(std::abs(c(0, j + 1) - want) <= 1e-14 * expected);
  }
}

TEST_CASE("cfr matrix without reflectors") {
  const Eigen::MatrixXcd c = build_cfr_matrix(down_led(Vec3(0, 0, 2)), up_pd(Vec3::Zero()), {}, 0.0);
  CHECK(c.rows() == 1);
  CHECK(c(0, 0).real() == doctest::Approx(los_gain(down_led(Vec3(0, 0, 2)), up_pd(Vec3::Zero()))));
  // A PD facing away gives the 1x1 zero matrix.
  Photodetector away = up_pd(Vec3::Zero());
  away.orientation = -Vec3::UnitZ();
  CHECK(build_cfr_matrix(down_led(Vec3(0, 0, 2)), away, {}, 0.0)(0, 0) == std::complex<double>(0.0));
}

TEST_CASE("zero order cfr is the LOS term with its phase") {
  const auto patches = discretize_room(small_room());
  const LedSource led = down_led(Vec3(2, 1, 2.4), 2.0);
  const Photodetector pd = up_pd(Vec3(1, 0.7, 0.8), 1e-4, 1.3);
  const double f = 3e6;
  const std::complex<double> want = std::polar(los_gain(led, pd), 2 * kPi * los_delay(led, pd) * f);
  CHECK(rel(cfr(led, pd, patches, f, ReflectionOrder::up_to(0)), want) < 1e-14);
}

TEST_CASE("non-reflective room gives the LOS term at every order") {
  const auto patches = discretize_room(small_room(0.0));
  const LedSource led = down_led(Vec3(2, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(1, 0.7, 0.8));
  for (int d : {1, 3, 6}) CHECK(dc_gain(led, pd, patches, ReflectionOrder::up_to(d)) == los_gain(led, pd));
  CHECK(dc_gain(led, pd, patches, ReflectionOrder::infinite()) == los_gain(led, pd));
  CHECK(dc_gain(led, pd, {}, ReflectionOrder::up_to(3)) == los_gain(led, pd));
}

TEST_CASE("eigen cfr agrees with path enumeration at DC and 1 MHz") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 1);
  int lit = 0;
  for (int trial = 0; trial < 30; ++trial) {
    Room room = small_room(0.2 + 0.7 * u(gen), 1.0 + u(gen));
    const auto patches = discretize_room(room);
    REQUIRE(patches.size() <= 50);
    const LedSource led = down_led(Vec3(0.3 + 2.4 * u(gen), 0.3 + 1.4 * u(gen), 2.4), 1 + 5 * u(gen));
    const Photodetector pd = up_pd(Vec3(0.3 + 2.4 * u(gen), 0.3 + 1.4 * u(gen), 0.5 + u(gen)), 1e-4,
                                   0.8 + 0.7 * u(gen));
    const int d = 1 + trial % 3;
    for (double f : {0.0, 1e6}) {
      RecursiveOptions opt;
      opt.frequency_hz = f;
      const RecursiveResponse oracle = recursive_oracle(led, pd, patches, d, opt);
      if (oracle.dc_gain == 0.0) continue;
      ++lit;
      const CfrEvaluation e = evaluate_cfr(led, pd, patches, f, ReflectionOrder::up_to(d));
      CHECK(rel(e.value, oracle.frequency_response) <= 1e-9);
      CfrOptions iterated;
      iterated.preferred = CfrMethod::kIterated;
      CHECK(rel(cfr(led, pd, patches, f, ReflectionOrder::up_to(d), iterated), oracle.frequency_response) <=
            1e-12);
    }
  }
  CHECK(lit > 40);
}

TEST_CASE("DC response is real") {
  const auto patches = discretize_room(small_room(0.8, 0.7));
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(0.5, 0.5, 0.9));
  for (auto order : {ReflectionOrder::up_to(4), ReflectionOrder::infinite()}) {
    const std::complex<double> h = cfr(led, pd, patches, 0.0, order);
    CHECK(std::abs(h.imag()) <= 1e-12 * std::abs(h.real()));
  }
}

TEST_CASE("dc gain is monotone in order and reflectance") {
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(0.5, 0.5, 0.9), 1e-4, 1.0);
  for (double rho : {0.2, 0.5, 0.85}) {
    const auto patches = discretize_room(small_room(rho, 0.5));
    double prev = 0.0;
    for (int d = 0; d <= 6; ++d) {
      const double g = dc_gain(led, pd, patches, ReflectionOrder::up_to(d));
      CHECK(g >= prev * (1 - 1e-13));
      prev = g;
    }
    const double inf = dc_gain(led, pd, patches, ReflectionOrder::infinite());
    CHECK(inf >= prev * (1 - 1e-13));
    CHECK(inf < 1.0);
  }
  double prev = 0.0;
  for (double rho : {0.0, 0.1, 0.4, 0.7, 0.95}) {
    const double g = dc_gain(led, pd, discretize_room(small_room(rho, 0.5)), ReflectionOrder::up_to(3));
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("infinite order is the limit of finite orders") {
  const auto patches = discretize_room(small_room(0.5, 0.7));
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(0.5, 0.5, 0.9));
  CfrOptions iterated;
  iterated.preferred = CfrMethod::kIterated;
  const double far = dc_gain(led, pd, patches, ReflectionOrder::up_to(200), iterated);
  CHECK(dc_gain(led, pd, patches, ReflectionOrder::infinite()) == doctest::Approx(far).epsilon(1e-10));
  CHECK(dc_gain(led, pd, patches, ReflectionOrder::infinite(), iterated) == doctest::Approx(far).epsilon(1e-10));
}

TEST_CASE("divergent series is reported") {
  // Reflectances just under 1 in a closed cube make C(f)D nearly stochastic;
  // a tighter margin than its spectral radius must refuse the closed form.
  Room r;
  r.dimensions = Vec3(1, 1, 1);
  r.patch_resolution = 0.5;
  r.wall_coefficient = r.floor_coefficient = r.ceiling_coefficient = 0.999;
  const auto patches = discretize_room(r);
  CfrOptions strict;
  strict.spectral_margin = 0.9;
  CHECK_THROWS_AS(cfr(down_led(Vec3(0.5, 0.5, 0.9)), up_pd(Vec3(0.5, 0.5, 0.1)), patches, 0.0,
                      ReflectionOrder::infinite(), strict),
                  NonConvergenceError);
}

TEST_CASE("recursive oracle") {
  const auto patches = discretize_room(small_room(0.6, 1.0));
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(0.5, 0.5, 0.9));

  const RecursiveResponse zero = recursive_oracle(led, pd, patches, 0);
  REQUIRE(zero.samples.size() == 1);
  CHECK(zero.samples[0].time == los_delay(led, pd));
  CHECK(zero.samples[0].amplitude == los_gain(led, pd));

  double prev = 0.0;
  for (int d = 0; d <= 3; ++d) {
    const double g = recursive_oracle(led, pd, patches, d).dc_gain;
    CHECK(g >= prev);
    prev = g;
  }

  RecursiveOptions binned;
  binned.bin_width = 1e-9;
  const RecursiveResponse b = recursive_oracle(led, pd, patches, 2, binned);
  double total = 0.0;
  for (const auto& s : b.samples) total += s.amplitude;
  CHECK(total == doctest::Approx(b.dc_gain).epsilon(1e-12));

  RecursiveOptions capped;
  capped.path_cap = 100;
  CHECK_THROWS_AS(recursive_oracle(led, pd, patches, 3, capped), ResourceLimitError);
  CHECK_THROWS_AS(recursive_oracle(led, pd, patches, -1), DomainError);
}

TEST_CASE("impulse response from a frequency grid keeps the DC sum") {
  const auto patches = discretize_room(small_room(0.6, 1.0));
  const LedSource led = down_led(Vec3(1.5, 1, 2.4));
  const Photodetector pd = up_pd(Vec3(0.5, 0.5, 0.9));
  const auto sweep = cfr_sweep(led, pd, patches, ReflectionOrder::up_to(3), CirGrid{50e6, 1e6});
  CHECK(sweep.size() == 51);
  const auto cir = cir_from_cfr(sweep);
  CHECK(cir.size() == 101);
  double total = 0.0;
  for (const auto& s : cir) total += s.amplitude;
  CHECK(total == doctest::Approx(sweep[0].value.real()).epsilon(1e-10));
  CHECK_THROWS_AS(cir_from_cfr(std::span<const CfrSample>(sweep.data(), 1)), DomainError);
  CHECK_THROWS_AS(cfr_sweep(led, pd, patches, ReflectionOrder::up_to(1), CirGrid{1e6, 0.0}), DomainError);
}

TEST_CASE("reflection order") {
  CHECK(ReflectionOrder::up_to(3).max_bounces() == 3);
  CHECK(ReflectionOrder::infinite().is_infinite());
  CHECK_THROWS_AS(ReflectionOrder::up_to(-1), DomainError);
  CHECK_THROWS_AS(ReflectionOrder::infinite().max_bounces(), DomainError);
}

TEST_CASE("channel model matches per-link dc gain") {
  const auto patches = discretize_room(small_room(0.7, 0.8));
  std::vector<LedSource> leds = {down_led(Vec3(1, 1, 2.5), 2.0), down_led(Vec3(2, 1, 2.5), 7.0)};
  leds[1].orientation = Vec3(0.3, 0, -1).normalized();
  for (auto order : {ReflectionOrder::up_to(0), ReflectionOrder::up_to(3), ReflectionOrder::infinite()}) {
    const ChannelModel model(leds, patches, order);
    const Photodetector pd = up_pd(Vec3(0.7, 1.3, 0.85), 1e-4, 1.1);
    const Eigen::VectorXd g = model.gains_to(pd);
    for (int n = 0; n < 2; ++n) {
      // LEDs sit on the ceiling plane, where they coincide with no patch center.
      CHECK(g(n) == doctest::Approx(dc_gain(leds[n], pd, patches, order)).epsilon(1e-10));
    }
  }
}

TEST_CASE("channel gains tensor") {
  ChannelGains g(2, 3, 4);
  CHECK(g.users() == 2);
  CHECK(g.pds_per_user() == 3);
  CHECK(g.leds() == 4);
  g(1, 2, 3) = 5.0;
  g(1, 0, 3) = 1.0;
  CHECK(g.summed_over_pds()(1, 3) == 6.0);
  CHECK(g.user_array(1)(2, 3) == 5.0);
  CHECK_THROWS_AS(g.single_pd(), DimensionError);
  CHECK_THROWS_AS(g.user_array(2), DimensionError);
  CHECK_THROWS_AS(ChannelGains(-1, 1, 1), DimensionError);

  const auto patches = discretize_room(small_room());
  const ChannelModel model({down_led(Vec3(1, 1, 2.5))}, patches, ReflectionOrder::up_to(2));
  const std::vector<std::vector<Photodetector>> one = {{up_pd(Vec3(1.2, 0.8, 0.8))}};
  const ChannelGains single = model.gains(one);
  CHECK(single.single_pd()(0, 0) ==
        doctest::Approx(dc_gain(down_led(Vec3(1, 1, 2.5)), one[0][0], patches, ReflectionOrder::up_to(2))));
  const std::vector<std::vector<Photodetector>> ragged = {{one[0][0]}, {one[0][0], one[0][0]}};
  CHECK_THROWS_AS(model.gains(ragged), DimensionError);
}

TEST_CASE("large room has 28 LED columns and mirror symmetry") {
  ScenarioConfig cfg = preset("paper");
  cfg.room.patch_resolution = 2.0;  // coarse: symmetry does not depend on it
  const Scenario scenario(cfg);
  CHECK(scenario.led_count() == 28);
  // Mirror image through x = 6 of a user: LED sets map onto each other, so
  // sorted gain rows agree.
  const ChannelGains g = scenario.gains_for({Vec3(2.3, 4.1, 0.85), Vec3(12 - 2.3, 4.1, 0.85)});
  std::vector<double> a, b;
  for (int n = 0; n < 28; ++n) {
    a.push_back(g(0, 0, n));
    b.push_back(g(1, 0, n));
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (int n = 0; n < 28; ++n) CHECK(std::abs(a[n] - b[n]) <= 1e-12 * std::max(a[n], 1e-300) + 1e-300);
  for (double x : a) CHECK(x >= 0.0);
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vlc/assignment.hpp"
#include "vlc/channel.hpp"
#include "vlc/combining.hpp"
#include "vlc/network.hpp"
#include "vlc/power.hpp"

namespace vlc {

/// Multi-element transmitter: an optional center LED along `boresight` and a
/// ring of LEDs tilted by `divergence_deg` from it, evenly spaced in azimuth.
struct TransmitterLayout {
  std::vector<Vec3> positions;
  bool center_led = true;
  int ring_leds = 6;
  double divergence_deg = 45.0;
  double lambertian_order = 7.0459;
};

/// Co-located PD array: one PD facing up plus `pd_count - 1` PDs tilted by
/// `tilt_deg` and spread evenly in azimuth.
struct ReceiverLayout {
  double height_m = 0.85;
  int pd_count = 1;
  double tilt_deg = 45.0;
  double pd_area_m2 = 40e-6;
  double fov_deg = 60.0;
};

struct CampaignSettings {
  int users = 4;
  int realizations = 100;
  std::uint64_t seed = 1;
  std::vector<std::string> pipelines = {"tdma", "hrs", "wss"};
  /// Empty means every user has ratio 1.
  std::vector<double> qos_ratios;
  /// 0 means hardware concurrency.
  int threads = 0;
};

struct ScenarioConfig {
  std::string name = "paper";
  Room room;
  /// Negative means the full geometric series.
  int reflection_order = 4;
  TransmitterLayout transmitters;
  ReceiverLayout receiver;
  LinkBudget budget;
  CampaignSettings campaign;

  /// Throws DomainError on inconsistent geometry or parameters.
  void validate() const;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&);
};

/// Known presets: "paper" (single PD), "paper-7pd", "small-room".
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Defaults of the large room with the given overrides merged in (JSON merge
/// patch with the schema of to_json). Unknown keys raise DomainError.
ScenarioConfig build_paper_scenario(const nlohmann::json& overrides = nlohmann::json::object());

nlohmann::json to_json(const ScenarioConfig& config);
/// Strict: unknown keys and wrong types raise DomainError. A "preset" key
/// selects the base that the other keys override.
ScenarioConfig config_from_json(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

std::vector<LedSource> build_leds(const ScenarioConfig& config);
std::vector<Photodetector> build_receiver(const ScenarioConfig& config, const Vec3& position);
ReflectionOrder reflection_order(const ScenarioConfig& config);

/// Portable uniform doubles in [0, 1) from mt19937_64: the top 53 bits of
/// each draw, so streams agree across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  /// Realization i of a campaign uses seed + i.
  static Rng for_realization(std::uint64_t seed, std::uint64_t index) { return Rng(seed + index); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

/// Positions uniform over the floor plan at receiver height.
std::vector<Vec3> place_users(const ScenarioConfig& config, Rng& rng);

/// Room, LEDs and the reflection operator of one configuration, shared by
/// every realization.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig config);

  const ScenarioConfig& config() const { return config_; }
  const std::vector<LedSource>& leds() const { return leds_; }
  int led_count() const { return static_cast<int>(leds_.size()); }
  ChannelGains gains_for(const std::vector<Vec3>& user_positions) const;

 private:
  ScenarioConfig config_;
  std::vector<LedSource> leds_;
  ChannelModel model_;
};

/// "<assignment>[+power|+power-sum][+combine]" with assignment one of tdma,
/// hrs, wss, pra, exhaustive-sum, exhaustive-log. "+power" maximizes the
/// log-sum rate, "+power-sum" the sum rate.
struct Pipeline {
  enum class Assign { kTdma, kHrs, kWss, kPra, kExhaustiveSum, kExhaustiveLog };
  std::string name;
  Assign assign = Assign::kHrs;
  std::optional<Objective> power;
  bool combine = false;

  static Pipeline parse(const std::string& text);
};

struct RealizationRecord {
  int realization = 0;
  std::uint64_t seed = 0;
  std::string pipeline;
  std::string error;  // empty on success
  std::vector<Vec3> users;
  std::vector<int> owners;  // per LED, -1 unassigned; empty for tdma
  std::vector<double> power;
  std::vector<double> rates;
  std::vector<double> sinr;  // per user, single-stream (summed PD gains)
  double sum_rate = 0.0;
  std::optional<double> log_sum;
  std::optional<double> jfi;
  int power_iterations = 0;
  bool power_converged = true;
  /// Scheme name -> per-user post-combining SINR (linear).
  std::map<std::string, std::vector<double>> combined_sinr;

  bool ok() const { return error.empty(); }
};

struct PipelineSummary {
  std::string pipeline;
  int realizations = 0;
  int failures = 0;
  double mean_sum_rate = 0.0;
  std::optional<double> mean_log_sum;  // over records where it is defined
  std::optional<double> mean_jfi;
  /// Scheme name -> (10th, 50th, 90th) nearest-rank percentiles in dB,
  /// pooled over users and realizations.
  std::map<std::string, std::vector<double>> sinr_percentiles_db;
};

struct CampaignResult {
  ScenarioConfig config;
  std::vector<RealizationRecord> records;  // realization-major, pipelines in request order
  std::vector<PipelineSummary> summaries;
};

/// Evaluates every pipeline on one set of user positions.
std::vector<RealizationRecord> run_realization(const Scenario& scenario,
                                               const std::vector<Pipeline>& pipelines,
                                               int realization);

/// Output does not depend on the thread count.
CampaignResult run_campaign(const ScenarioConfig& config);
CampaignResult run_campaign(const Scenario& scenario);

std::vector<PipelineSummary> summarize(const std::vector<RealizationRecord>& records,
                                       const std::vector<std::string>& pipelines);

/// Right-continuous empirical CDF: sorted distinct values with P(X <= v).
std::vector<std::pair<double, double>> cdf(std::vector<double> values);
/// Nearest rank: the ceil(q/100 * n)-th smallest value (the smallest for q = 0).
double percentile(std::vector<double> values, double q);

double to_db(double linear);

void write_csv(std::ostream& out, const CampaignResult& result);
nlohmann::json campaign_to_json(const CampaignResult& result);

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  double total_gain = 0.0;  // sum over LEDs and PDs
  double snr_db = 0.0;      // all LEDs at p_max serving this one receiver
  double rate = 0.0;
};

/// Single receiver moved over a grid of the floor plan.
std::vector<GridPoint> grid_sweep(const Scenario& scenario, double step_m);
void write_grid_csv(std::ostream& out, const std::vector<GridPoint>& points);

}  // namespace vlc

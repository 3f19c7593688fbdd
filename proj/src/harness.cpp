#include "vlc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

namespace vlc {

using nlohmann::json;

namespace {

double deg(double d) { return d * kPi / 180.0; }

bool same_points(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  const auto& ra = a.room;
  const auto& rb = b.room;
  const auto& ta = a.transmitters;
  const auto& tb = b.transmitters;
  const auto& pa = a.receiver;
  const auto& pb = b.receiver;
  const auto& la = a.budget;
  const auto& lb = b.budget;
  const auto& ca = a.campaign;
  const auto& cb = b.campaign;
  return a.name == b.name && ra.dimensions == rb.dimensions &&
         ra.wall_coefficient == rb.wall_coefficient &&
         ra.floor_coefficient == rb.floor_coefficient &&
         ra.ceiling_coefficient == rb.ceiling_coefficient &&
         ra.patch_resolution == rb.patch_resolution && a.reflection_order == b.reflection_order &&
         same_points(ta.positions, tb.positions) && ta.center_led == tb.center_led &&
         ta.ring_leds == tb.ring_leds && ta.divergence_deg == tb.divergence_deg &&
         ta.lambertian_order == tb.lambertian_order && pa.height_m == pb.height_m &&
         pa.pd_count == pb.pd_count && pa.tilt_deg == pb.tilt_deg &&
         pa.pd_area_m2 == pb.pd_area_m2 && pa.fov_deg == pb.fov_deg &&
         la.noise_psd == lb.noise_psd && la.bandwidth == lb.bandwidth && la.p_max == lb.p_max &&
         la.responsivity == lb.responsivity && ca.users == cb.users &&
         ca.realizations == cb.realizations && ca.seed == cb.seed &&
         ca.pipelines == cb.pipelines && ca.qos_ratios == cb.qos_ratios &&
         ca.threads == cb.threads;
}

void ScenarioConfig::validate() const {
  const Vec3& dim = room.dimensions;
  if (!(dim.minCoeff() > 0.0) || !dim.allFinite()) throw DomainError("room size must be positive");
  for (double rho : {room.wall_coefficient, room.floor_coefficient, room.ceiling_coefficient}) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("reflectances must lie in [0, 1)");
  }
  if (reflection_order != 0 && !(room.patch_resolution > 0.0)) {
    throw DomainError("patch size must be positive");
  }
  if (transmitters.positions.empty()) throw DomainError("at least one transmitter is needed");
  for (const Vec3& t : transmitters.positions) {
    if ((t.array() < 0.0).any() || (t.array() > dim.array()).any()) {
      throw DomainError("transmitter outside the room");
    }
  }
  if (!transmitters.center_led && transmitters.ring_leds <= 0) {
    throw DomainError("transmitters carry no LEDs");
  }
  if (transmitters.ring_leds < 0) throw DomainError("ring LED count must be nonnegative");
  if (!(transmitters.divergence_deg >= 0.0 && transmitters.divergence_deg <= 90.0)) {
    throw DomainError("divergence angle must lie in [0, 90] degrees");
  }
  if (!(transmitters.lambertian_order > 0.0)) throw DomainError("Lambertian order must be positive");
  if (!(receiver.height_m > 0.0 && receiver.height_m < dim.z())) {
    throw DomainError("receiver height must lie strictly between floor and ceiling");
  }
  if (receiver.pd_count < 1) throw DomainError("receivers need at least one PD");
  if (!(receiver.tilt_deg >= 0.0 && receiver.tilt_deg <= 90.0)) {
    throw DomainError("PD tilt must lie in [0, 90] degrees");
  }
  if (!(receiver.pd_area_m2 > 0.0)) throw DomainError("PD area must be positive");
  if (!(receiver.fov_deg > 0.0 && receiver.fov_deg <= 90.0)) {
    throw DomainError("PD field of view must lie in (0, 90] degrees");
  }
  budget.validate();
  if (campaign.users < 1) throw DomainError("campaign needs at least one user");
  if (campaign.realizations < 1) throw DomainError("campaign needs at least one realization");
  if (campaign.threads < 0) throw DomainError("thread count must be nonnegative");
  if (!campaign.qos_ratios.empty()) {
    if (static_cast<int>(campaign.qos_ratios.size()) != campaign.users) {
      throw DomainError("qos_ratios needs one entry per user");
    }
    QosRatios check(campaign.qos_ratios);
  }
  for (const std::string& p : campaign.pipelines) Pipeline::parse(p);
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  c.name = name;
  c.room.dimensions = Vec3(12, 12, 4);
  c.room.wall_coefficient = 0.8;
  c.room.floor_coefficient = 0.3;
  c.room.ceiling_coefficient = 0.3;
  c.room.patch_resolution = 0.5;
  c.transmitters.positions = {Vec3(3, 3, 4), Vec3(3, 9, 4), Vec3(9, 3, 4), Vec3(9, 9, 4)};
  if (name == "paper") return c;
  if (name == "paper-7pd") {
    c.receiver.pd_count = 7;
    c.receiver.pd_area_m2 = 10e-6;
    c.campaign.pipelines = {"wss+combine"};
    return c;
  }
  if (name == "small-room") {
    c.room.dimensions = Vec3(12, 6, 4);
    c.transmitters.positions = {Vec3(3, 3, 4), Vec3(9, 3, 4)};
    return c;
  }
  throw DomainError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"paper", "paper-7pd", "small-room"}; }

json to_json(const ScenarioConfig& c) {
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json positions = json::array();
  for (const Vec3& p : c.transmitters.positions) positions.push_back(vec(p));
  json order = c.reflection_order < 0 ? json("infinite") : json(c.reflection_order);
  return {
      {"name", c.name},
      {"room",
       {{"size_m", vec(c.room.dimensions)},
        {"wall_reflectance", c.room.wall_coefficient},
        {"floor_reflectance", c.room.floor_coefficient},
        {"ceiling_reflectance", c.room.ceiling_coefficient},
        {"patch_size_m", c.room.patch_resolution},
        {"reflection_order", order}}},
      {"transmitters",
       {{"positions_m", positions},
        {"center_led", c.transmitters.center_led},
        {"ring_leds", c.transmitters.ring_leds},
        {"divergence_deg", c.transmitters.divergence_deg},
        {"lambertian_order", c.transmitters.lambertian_order}}},
      {"receiver",
       {{"height_m", c.receiver.height_m},
        {"pd_count", c.receiver.pd_count},
        {"tilt_deg", c.receiver.tilt_deg},
        {"pd_area_m2", c.receiver.pd_area_m2},
        {"fov_deg", c.receiver.fov_deg}}},
      {"link",
       {{"noise_psd_a2_per_hz", c.budget.noise_psd},
        {"bandwidth_hz", c.budget.bandwidth},
        {"p_max_w", c.budget.p_max},
        {"responsivity_a_per_w", c.budget.responsivity}}},
      {"campaign",
       {{"users", c.campaign.users},
        {"realizations", c.campaign.realizations},
        {"seed", c.campaign.seed},
        {"pipelines", c.campaign.pipelines},
        {"qos_ratios", c.campaign.qos_ratios},
        {"threads", c.campaign.threads}}},
  };
}

namespace {

/// Reads the keys of one JSON object, rejecting unknown or missing ones.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw DomainError(path_ + " must be an object");
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw DomainError("missing key " + path_ + "." + key);
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw DomainError(path_ + "." + key + " must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) throw DomainError(path_ + "." + key + " must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) throw DomainError(path_ + "." + key + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) throw DomainError(path_ + "." + key + " must be a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const json& v, const std::string& what) const {
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      throw DomainError(what + " must be an array of three numbers");
    }
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }

  Vec3 vec3(const std::string& key) { return vec3(at(key), path_ + "." + key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw DomainError("unknown key " + path_ + "." + item.key());
    }
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ScenarioConfig parse_config(const json& j) {
  ScenarioConfig c;
  Section top(j, "config");
  c.name = top.string("name");

  Section room(top.at("room"), "room");
  c.room.dimensions = room.vec3("size_m");
  c.room.wall_coefficient = room.number("wall_reflectance");
  c.room.floor_coefficient = room.number("floor_reflectance");
  c.room.ceiling_coefficient = room.number("ceiling_reflectance");
  c.room.patch_resolution = room.number("patch_size_m");
  const json& order = room.at("reflection_order");
  if (order.is_string() && order.get<std::string>() == "infinite") {
    c.reflection_order = -1;
  } else if (order.is_number_integer() && order.get<int>() >= 0) {
    c.reflection_order = order.get<int>();
  } else {
    throw DomainError("room.reflection_order must be a nonnegative integer or \"infinite\"");
  }
  room.finish();

  Section tx(top.at("transmitters"), "transmitters");
  const json& positions = tx.at("positions_m");
  if (!positions.is_array()) throw DomainError("transmitters.positions_m must be an array");
  for (const json& p : positions) c.transmitters.positions.push_back(tx.vec3(p, "transmitter position"));
  c.transmitters.center_led = tx.boolean("center_led");
  c.transmitters.ring_leds = tx.integer("ring_leds");
  c.transmitters.divergence_deg = tx.number("divergence_deg");
  c.transmitters.lambertian_order = tx.number("lambertian_order");
  tx.finish();

  Section rx(top.at("receiver"), "receiver");
  c.receiver.height_m = rx.number("height_m");
  c.receiver.pd_count = rx.integer("pd_count");
  c.receiver.tilt_deg = rx.number("tilt_deg");
  c.receiver.pd_area_m2 = rx.number("pd_area_m2");
  c.receiver.fov_deg = rx.number("fov_deg");
  rx.finish();

  Section link(top.at("link"), "link");
  c.budget.noise_psd = link.number("noise_psd_a2_per_hz");
  c.budget.bandwidth = link.number("bandwidth_hz");
  c.budget.p_max = link.number("p_max_w");
  c.budget.responsivity = link.number("responsivity_a_per_w");
  link.finish();

  Section camp(top.at("campaign"), "campaign");
  c.campaign.users = camp.integer("users");
  c.campaign.realizations = camp.integer("realizations");
  const json& seed = camp.at("seed");
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() &&
                                    seed.get<std::int64_t>() < 0)) {
    throw DomainError("campaign.seed must be a nonnegative integer");
  }
  c.campaign.seed = seed.get<std::uint64_t>();
  const json& pipes = camp.at("pipelines");
  if (!pipes.is_array()) throw DomainError("campaign.pipelines must be an array of strings");
  c.campaign.pipelines.clear();
  for (const json& p : pipes) {
    if (!p.is_string()) throw DomainError("campaign.pipelines must be an array of strings");
    c.campaign.pipelines.push_back(p.get<std::string>());
  }
  const json& qos = camp.at("qos_ratios");
  if (!qos.is_array()) throw DomainError("campaign.qos_ratios must be an array of numbers");
  for (const json& q : qos) {
    if (!q.is_number()) throw DomainError("campaign.qos_ratios must be an array of numbers");
    c.campaign.qos_ratios.push_back(q.get<double>());
  }
  c.campaign.threads = camp.integer("threads");
  camp.finish();

  top.finish();
  c.validate();
  return c;
}

}  // namespace

ScenarioConfig config_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  std::string base = "paper";
  json patch = j;
  if (patch.contains("preset")) {
    if (!patch["preset"].is_string()) throw DomainError("preset must be a string");
    base = patch["preset"].get<std::string>();
    patch.erase("preset");
  }
  json merged = to_json(preset(base));
  merged.merge_patch(patch);
  return parse_config(merged);
}

ScenarioConfig build_paper_scenario(const json& overrides) { return config_from_json(overrides); }

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::vector<LedSource> build_leds(const ScenarioConfig& config) {
  const auto& tx = config.transmitters;
  std::vector<LedSource> leds;
  const double tilt = deg(tx.divergence_deg);
  for (const Vec3& pos : tx.positions) {
    if (tx.center_led) leds.push_back({pos, -Vec3::UnitZ(), tx.lambertian_order, config.budget.p_max});
    for (int i = 0; i < tx.ring_leds; ++i) {
      const double az = 2.0 * kPi * i / tx.ring_leds;
      const Vec3 dir(std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), -std::cos(tilt));
      leds.push_back({pos, dir.normalized(), tx.lambertian_order, config.budget.p_max});
    }
  }
  return leds;
}

std::vector<Photodetector> build_receiver(const ScenarioConfig& config, const Vec3& position) {
  const auto& rx = config.receiver;
  std::vector<Photodetector> pds;
  const double fov = deg(rx.fov_deg);
  pds.push_back({position, Vec3::UnitZ(), rx.pd_area_m2, fov, config.budget.responsivity});
  const int ring = rx.pd_count - 1;
  const double tilt = deg(rx.tilt_deg);
  for (int i = 0; i < ring; ++i) {
    const double az = 2.0 * kPi * i / ring;
    const Vec3 dir(std::sin(tilt) * std::cos(az), std::sin(tilt) * std::sin(az), std::cos(tilt));
    pds.push_back({position, dir.normalized(), rx.pd_area_m2, fov, config.budget.responsivity});
  }
  return pds;
}

ReflectionOrder reflection_order(const ScenarioConfig& config) {
  return config.reflection_order < 0 ? ReflectionOrder::infinite()
                                     : ReflectionOrder::up_to(config.reflection_order);
}

std::vector<Vec3> place_users(const ScenarioConfig& config, Rng& rng) {
  std::vector<Vec3> users;
  users.reserve(config.campaign.users);
  for (int k = 0; k < config.campaign.users; ++k) {
    const double x = rng.uniform(0.0, config.room.dimensions.x());
    const double y = rng.uniform(0.0, config.room.dimensions.y());
    users.emplace_back(x, y, config.receiver.height_m);
  }
  return users;
}

namespace {

std::vector<Reflector> scenario_reflectors(const ScenarioConfig& config) {
  if (config.reflection_order == 0) return {};
  return discretize_room(config.room);
}

}  // namespace

Scenario::Scenario(ScenarioConfig config)
    : config_((config.validate(), std::move(config))),
      leds_(build_leds(config_)),
      model_(leds_, scenario_reflectors(config_), reflection_order(config_)) {}

ChannelGains Scenario::gains_for(const std::vector<Vec3>& user_positions) const {
  std::vector<std::vector<Photodetector>> receivers;
  receivers.reserve(user_positions.size());
  for (const Vec3& pos : user_positions) receivers.push_back(build_receiver(config_, pos));
  return model_.gains(receivers);
}

Pipeline Pipeline::parse(const std::string& text) {
  Pipeline p;
  p.name = text;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t plus = text.find('+', start);
    parts.push_back(text.substr(start, plus - start));
    if (plus == std::string::npos) break;
    start = plus + 1;
  }
  static const std::map<std::string, Assign> kAssign = {
      {"tdma", Assign::kTdma},
      {"hrs", Assign::kHrs},
      {"wss", Assign::kWss},
      {"pra", Assign::kPra},
      {"exhaustive-sum", Assign::kExhaustiveSum},
      {"exhaustive-log", Assign::kExhaustiveLog},
  };
  const auto it = kAssign.find(parts[0]);
  if (it == kAssign.end()) throw DomainError("unknown assignment '" + parts[0] + "' in pipeline " + text);
  p.assign = it->second;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if ((parts[i] == "power" || parts[i] == "power-sum") && !p.power && !p.combine) {
      p.power = parts[i] == "power" ? Objective::kMaxLogSumRate : Objective::kMaxSumRate;
    } else if (parts[i] == "combine" && !p.combine) {
      p.combine = true;
    } else {
      throw DomainError("bad stage '" + parts[i] + "' in pipeline " + text);
    }
  }
  if (p.assign == Assign::kTdma && (p.power || p.combine)) {
    throw DomainError("tdma takes no power or combining stage");
  }
  return p;
}

namespace {

void fill_metrics(RealizationRecord& r) {
  r.sum_rate = std::accumulate(r.rates.begin(), r.rates.end(), 0.0);
  if (std::all_of(r.rates.begin(), r.rates.end(), [](double v) { return v > 0.0; })) {
    r.log_sum = log_sum(r.rates);
  }
  if (std::any_of(r.rates.begin(), r.rates.end(), [](double v) { return v > 0.0; })) {
    r.jfi = jain_fairness(r.rates);
  }
}

RealizationRecord run_pipeline(const Scenario& scenario, const Pipeline& pipe,
                               const ChannelGains& gains, const GainMatrix& h) {
  const ScenarioConfig& cfg = scenario.config();
  const LinkBudget& budget = cfg.budget;
  RealizationRecord r;
  r.pipeline = pipe.name;
  PowerVector p = PowerVector::Constant(h.cols(), budget.p_max);

  if (pipe.assign == Pipeline::Assign::kTdma) {
    r.rates = tdma_rates(h, p, budget);
    for (Eigen::Index k = 0; k < h.rows(); ++k) {
      const double a = budget.responsivity * h.row(k).dot(p);
      r.sinr.push_back(a * a / budget.noise_power());
    }
    r.power.assign(p.data(), p.data() + p.size());
    fill_metrics(r);
    return r;
  }

  Assignment a;
  switch (pipe.assign) {
    case Pipeline::Assign::kHrs:
      a = hrs(h);
      break;
    case Pipeline::Assign::kWss:
      a = wss(h);
      break;
    case Pipeline::Assign::kPra: {
      const QosRatios qos = cfg.campaign.qos_ratios.empty()
                                ? QosRatios::uniform(static_cast<int>(h.rows()))
                                : QosRatios(cfg.campaign.qos_ratios);
      a = pra(h, p, budget, qos);
      break;
    }
    case Pipeline::Assign::kExhaustiveSum:
      a = exhaustive(h, p, budget, Objective::kMaxSumRate);
      break;
    case Pipeline::Assign::kExhaustiveLog:
      a = exhaustive(h, p, budget, Objective::kMaxLogSumRate);
      break;
    case Pipeline::Assign::kTdma:
      break;
  }
  r.owners.assign(a.owners().begin(), a.owners().end());

  if (pipe.power) {
    try {
      const PowerSolution sol = optimize_power(h, a, budget, *pipe.power);
      p = sol.p;
      r.power_iterations = sol.iterations;
    } catch (const PowerConvergenceError& e) {
      p = e.best().p;
      r.power_iterations = e.best().iterations;
      r.power_converged = false;
    }
  }
  r.power.assign(p.data(), p.data() + p.size());
  r.sinr = sinrs(h, a, p, budget);
  r.rates = rates(h, a, p, budget);
  fill_metrics(r);

  if (pipe.combine) {
    for (Combining scheme : {Combining::kMrc, Combining::kOc, Combining::kGbOc}) {
      std::vector<double>& out = r.combined_sinr[to_string(scheme)];
      for (int k = 0; k < a.users(); ++k) {
        const Eigen::MatrixXd s = group_signals(gains, a, p, budget, k);
        if (!(s.col(k).cwiseAbs().maxCoeff() > 0.0)) {
          out.push_back(0.0);
          continue;
        }
        const CombiningWeights w = combining_weights(scheme, gains, a, p, budget, k);
        out.push_back(combined_sinr(gains, a, p, budget, w, k));
      }
    }
  }
  return r;
}

}  // namespace

std::vector<RealizationRecord> run_realization(const Scenario& scenario,
                                               const std::vector<Pipeline>& pipelines,
                                               int realization) {
  const ScenarioConfig& cfg = scenario.config();
  const std::uint64_t seed = cfg.campaign.seed + static_cast<std::uint64_t>(realization);
  Rng rng(seed);
  const std::vector<Vec3> users = place_users(cfg, rng);
  std::vector<RealizationRecord> out;
  ChannelGains gains;
  GainMatrix h;
  std::string channel_error;
  try {
    gains = scenario.gains_for(users);
    h = gains.summed_over_pds();
  } catch (const std::exception& e) {
    channel_error = e.what();
  }
  for (const Pipeline& pipe : pipelines) {
    RealizationRecord r;
    if (channel_error.empty()) {
      try {
        r = run_pipeline(scenario, pipe, gains, h);
      } catch (const std::exception& e) {
        r = RealizationRecord{};
        r.error = e.what();
        if (r.error.empty()) r.error = "error";
      }
    } else {
      r.error = channel_error;
    }
    r.pipeline = pipe.name;
    r.realization = realization;
    r.seed = seed;
    r.users = users;
    out.push_back(std::move(r));
  }
  return out;
}

CampaignResult run_campaign(const ScenarioConfig& config) { return run_campaign(Scenario(config)); }

CampaignResult run_campaign(const Scenario& scenario) {
  const ScenarioConfig& cfg = scenario.config();
  std::vector<Pipeline> pipelines;
  for (const std::string& name : cfg.campaign.pipelines) pipelines.push_back(Pipeline::parse(name));

  const int count = cfg.campaign.realizations;
  std::vector<std::vector<RealizationRecord>> slots(count);
  int threads = cfg.campaign.threads > 0 ? cfg.campaign.threads
                                         : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) slots[i] = run_realization(scenario, pipelines, i);
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  CampaignResult result;
  result.config = cfg;
  for (auto& slot : slots)
    for (auto& r : slot) result.records.push_back(std::move(r));
  result.summaries = summarize(result.records, cfg.campaign.pipelines);
  return result;
}

double to_db(double linear) { return 10.0 * std::log10(linear); }

std::vector<std::pair<double, double>> cdf(std::vector<double> values) {
  if (values.empty()) throw DomainError("cdf of an empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw DomainError("percentile rank must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(q / 100.0 * n)));
  return values[std::min(rank, values.size()) - 1];
}

std::vector<PipelineSummary> summarize(const std::vector<RealizationRecord>& records,
                                       const std::vector<std::string>& pipelines) {
  std::vector<PipelineSummary> out;
  for (const std::string& name : pipelines) {
    PipelineSummary s;
    s.pipeline = name;
    double sum_rate = 0.0, log_total = 0.0, jfi_total = 0.0;
    int ok = 0, log_count = 0, jfi_count = 0;
    std::map<std::string, std::vector<double>> pooled;
    for (const RealizationRecord& r : records) {
      if (r.pipeline != name) continue;
      ++s.realizations;
      if (!r.ok()) {
        ++s.failures;
        continue;
      }
      ++ok;
      sum_rate += r.sum_rate;
      if (r.log_sum) {
        log_total += *r.log_sum;
        ++log_count;
      }
      if (r.jfi) {
        jfi_total += *r.jfi;
        ++jfi_count;
      }
      auto& single = pooled["single"];
      single.insert(single.end(), r.sinr.begin(), r.sinr.end());
      for (const auto& [scheme, values] : r.combined_sinr) {
        auto& v = pooled[scheme];
        v.insert(v.end(), values.begin(), values.end());
      }
    }
    if (ok > 0) s.mean_sum_rate = sum_rate / ok;
    if (log_count > 0) s.mean_log_sum = log_total / log_count;
    if (jfi_count > 0) s.mean_jfi = jfi_total / jfi_count;
    for (const auto& [scheme, values] : pooled) {
      if (values.empty()) continue;
      s.sinr_percentiles_db[scheme] = {to_db(percentile(values, 10)), to_db(percentile(values, 50)),
                                       to_db(percentile(values, 90))};
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) {
  return v ? finite_or_null(*v) : json(nullptr);
}

}  // namespace

void write_csv(std::ostream& out, const CampaignResult& result) {
  out << "realization,seed,pipeline,status,user,x_m,y_m,leds_served,rate_bps,sinr,sinr_mrc,"
         "sinr_oc,sinr_gboc,sum_rate_bps,log_sum,jfi,power_converged\n";
  for (const RealizationRecord& r : result.records) {
    const std::string head =
        std::to_string(r.realization) + "," + std::to_string(r.seed) + "," + csv_field(r.pipeline);
    if (!r.ok()) {
      out << head << "," << csv_field("error: " + r.error) << ",,,,,,,,,,,,,\n";
      continue;
    }
    for (std::size_t k = 0; k < r.rates.size(); ++k) {
      const int served = r.owners.empty()
                             ? static_cast<int>(r.power.size())
                             : static_cast<int>(std::count(r.owners.begin(), r.owners.end(), k));
      auto combined = [&](const char* scheme) {
        const auto it = r.combined_sinr.find(scheme);
        return it == r.combined_sinr.end() ? std::string() : num(it->second[k]);
      };
      out << head << ",ok," << k << "," << num(r.users[k].x()) << "," << num(r.users[k].y()) << ","
          << served << "," << num(r.rates[k]) << "," << num(r.sinr[k]) << "," << combined("mrc")
          << "," << combined("oc") << "," << combined("gboc") << "," << num(r.sum_rate) << ","
          << (r.log_sum ? num(*r.log_sum) : "") << "," << (r.jfi ? num(*r.jfi) : "") << ","
          << (r.power_converged ? 1 : 0) << "\n";
    }
  }
}

json campaign_to_json(const CampaignResult& result) {
  json records = json::array();
  for (const RealizationRecord& r : result.records) {
    json users = json::array();
    for (const Vec3& u : r.users) users.push_back({u.x(), u.y(), u.z()});
    json rec = {{"realization", r.realization},
                {"seed", r.seed},
                {"pipeline", r.pipeline},
                {"users_m", users}};
    if (!r.ok()) {
      rec["error"] = r.error;
      records.push_back(std::move(rec));
      continue;
    }
    rec["owners"] = r.owners;
    rec["power"] = r.power;
    rec["rates_bps"] = r.rates;
    rec["sinr"] = r.sinr;
    rec["sum_rate_bps"] = r.sum_rate;
    rec["log_sum"] = optional_number(r.log_sum);
    rec["jfi"] = optional_number(r.jfi);
    rec["power_iterations"] = r.power_iterations;
    rec["power_converged"] = r.power_converged;
    json combined = json::object();
    for (const auto& [scheme, values] : r.combined_sinr) combined[scheme] = values;
    rec["combined_sinr"] = combined;
    records.push_back(std::move(rec));
  }
  json summaries = json::array();
  for (const PipelineSummary& s : result.summaries) {
    json pct = json::object();
    for (const auto& [scheme, values] : s.sinr_percentiles_db) {
      json v = json::array();
      for (double x : values) v.push_back(finite_or_null(x));
      pct[scheme] = v;
    }
    summaries.push_back({{"pipeline", s.pipeline},
                         {"realizations", s.realizations},
                         {"failures", s.failures},
                         {"mean_sum_rate_bps", s.mean_sum_rate},
                         {"mean_log_sum", optional_number(s.mean_log_sum)},
                         {"mean_jfi", optional_number(s.mean_jfi)},
                         {"sinr_percentiles_db_10_50_90", pct}});
  }
  // The worker count does not affect results, so it is left out of the echo.
  json config = to_json(result.config);
  config["campaign"].erase("threads");
  return {{"config", config}, {"records", records}, {"summaries", summaries}};
}

std::vector<GridPoint> grid_sweep(const Scenario& scenario, double step_m) {
  if (!(step_m > 0.0)) throw DomainError("grid step must be positive");
  const ScenarioConfig& cfg = scenario.config();
  const LinkBudget& budget = cfg.budget;
  const int nx = static_cast<int>(std::floor(cfg.room.dimensions.x() / step_m + 1e-9));
  const int ny = static_cast<int>(std::floor(cfg.room.dimensions.y() / step_m + 1e-9));
  std::vector<GridPoint> out;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      GridPoint g;
      g.x = (i + 0.5) * step_m;
      g.y = (j + 0.5) * step_m;
      const ChannelGains gains = scenario.gains_for({Vec3(g.x, g.y, cfg.receiver.height_m)});
      const GainMatrix h = gains.summed_over_pds();
      g.total_gain = h.sum();
      const double a = budget.responsivity * budget.p_max * g.total_gain;
      const double snr = a * a / budget.noise_power();
      g.snr_db = to_db(snr);
      g.rate = rate(snr, budget.bandwidth);
      out.push_back(g);
    }
  }
  return out;
}

void write_grid_csv(std::ostream& out, const std::vector<GridPoint>& points) {
  out << "x_m,y_m,total_gain,snr_db,rate_bps\n";
  for (const GridPoint& g : points) {
    out << num(g.x) << "," << num(g.y) << "," << num(g.total_gain) << "," << num(g.snr_db) << ","
        << num(g.rate) << "\n";
  }
}

}  // namespace vlc

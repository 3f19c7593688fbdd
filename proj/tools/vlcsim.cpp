// vlcsim: command-line front end for the VLC downlink simulator.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vlc/assignment.hpp"
#include "vlc/channel.hpp"
#include "vlc/combining.hpp"
#include "vlc/harness.hpp"
#include "vlc/network.hpp"
#include "vlc/power.hpp"

namespace {

using nlohmann::json;
using namespace vlc;

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

/// Raised for bad option values that CLI11 cannot catch on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string preset = "paper";
  std::optional<std::uint64_t> seed;
  std::optional<int> users;
  std::string out;
  std::string format = "csv";
  int realization = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON scenario file");
  cmd->add_option("--preset", c.preset, "Base scenario when no --config is given")
      ->check(CLI::IsMember(preset_names()));
  cmd->add_option("--seed", c.seed, "Campaign seed (realization i draws users with seed + i)");
  cmd->add_option("--users", c.users, "Number of users K")->check(CLI::PositiveNumber);
  cmd->add_option("--out", c.out, "Output file (default stdout)");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

void add_realization(CLI::App* cmd, Common& c) {
  cmd->add_option("--realization", c.realization, "Realization index that places the users")
      ->check(CLI::NonNegativeNumber);
}

ScenarioConfig resolve_config(const Common& c) {
  ScenarioConfig cfg;
  if (!c.config_path.empty()) {
    if (!std::ifstream(c.config_path)) throw UsageError("config file not found: " + c.config_path);
    try {
      cfg = load_config(c.config_path);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  } else {
    cfg = preset(c.preset);
  }
  if (c.seed) cfg.campaign.seed = *c.seed;
  if (c.users) cfg.campaign.users = *c.users;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

/// Writes to --out or stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw Error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string join(const std::vector<int>& values, char sep = ' ') {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(values[i]);
  }
  return s;
}

std::string join(const Eigen::VectorXd& values) {
  std::ostringstream s;
  s.precision(17);
  for (Eigen::Index i = 0; i < values.size(); ++i) s << (i ? " " : "") << values(i);
  return s.str();
}

/// One placement of users and its channel, shared by the single-shot commands.
struct Snapshot {
  Scenario scenario;
  std::vector<Vec3> users;
  ChannelGains gains;
  GainMatrix h;  // summed over PDs

  Snapshot(const ScenarioConfig& cfg, int realization) : scenario(cfg) {
    Rng rng = Rng::for_realization(cfg.campaign.seed, static_cast<std::uint64_t>(realization));
    users = place_users(cfg, rng);
    gains = scenario.gains_for(users);
    h = gains.summed_over_pds();
  }
  PowerVector full_power() const {
    return PowerVector::Constant(h.cols(), scenario.config().budget.p_max);
  }
};

QosRatios qos_for(const ScenarioConfig& cfg) {
  if (cfg.campaign.qos_ratios.empty()) return QosRatios::uniform(cfg.campaign.users);
  return QosRatios(cfg.campaign.qos_ratios);
}

Assignment run_assignment(const std::string& algorithm, const Snapshot& s) {
  const ScenarioConfig& cfg = s.scenario.config();
  const PowerVector p = s.full_power();
  if (algorithm == "hrs") return hrs(s.h);
  if (algorithm == "wss") return wss(s.h);
  if (algorithm == "pra") return pra(s.h, p, cfg.budget, qos_for(cfg));
  if (algorithm == "exhaustive-sum") return exhaustive(s.h, p, cfg.budget, Objective::kMaxSumRate);
  if (algorithm == "exhaustive-log") return exhaustive(s.h, p, cfg.budget, Objective::kMaxLogSumRate);
  throw UsageError("unknown algorithm " + algorithm);
}

const std::vector<std::string> kAlgorithms = {"hrs", "wss", "pra", "exhaustive-sum",
                                              "exhaustive-log"};

json users_json(const std::vector<Vec3>& users) {
  json out = json::array();
  for (const Vec3& u : users) out.push_back({u.x(), u.y(), u.z()});
  return out;
}

// ---- channel --------------------------------------------------------------

struct ChannelArgs {
  bool cfr = false;
  bool cir = false;
  int user = 0;
  int pd = 0;
  int led = 0;
  double max_frequency_hz = 100e6;
  double spacing_hz = 1e6;
  std::string method = "iterated";
};

void cmd_channel(const Common& c, const ChannelArgs& a) {
  const ScenarioConfig cfg = resolve_config(c);
  const Snapshot s(cfg, c.realization);
  Output out(c.out);
  std::ostream& os = out.stream();
  os.precision(17);

  if (a.cfr || a.cir) {
    if (a.user < 0 || a.user >= cfg.campaign.users) throw UsageError("--user out of range");
    if (a.pd < 0 || a.pd >= cfg.receiver.pd_count) throw UsageError("--pd out of range");
    if (a.led < 0 || a.led >= s.scenario.led_count()) throw UsageError("--led out of range");
    const Photodetector pd = build_receiver(cfg, s.users[a.user])[a.pd];
    const std::vector<Reflector> patches = discretize_room(cfg.room);
    CfrOptions options;
    options.preferred = a.method == "spectral" ? CfrMethod::kSpectral : CfrMethod::kIterated;
    const auto sweep = cfr_sweep(s.scenario.leds()[a.led], pd, patches, reflection_order(cfg),
                                 CirGrid{a.max_frequency_hz, a.spacing_hz}, options);
    if (a.cir) {
      const auto cir = cir_from_cfr(sweep);
      if (c.format == "json") {
        json samples = json::array();
        for (const auto& x : cir) samples.push_back({{"time_s", x.time}, {"amplitude", x.amplitude}});
        os << json{{"user", a.user}, {"pd", a.pd}, {"led", a.led}, {"cir", samples}}.dump(2) << '\n';
      } else {
        os << "time_s,amplitude\n";
        for (const auto& x : cir) os << x.time << ',' << x.amplitude << '\n';
      }
      return;
    }
    if (c.format == "json") {
      json samples = json::array();
      for (const auto& x : sweep)
        samples.push_back({{"frequency_hz", x.frequency_hz}, {"re", x.value.real()}, {"im", x.value.imag()}});
      os << json{{"user", a.user}, {"pd", a.pd}, {"led", a.led}, {"cfr", samples}}.dump(2) << '\n';
    } else {
      os << "frequency_hz,re,im,magnitude\n";
      for (const auto& x : sweep)
        os << x.frequency_hz << ',' << x.value.real() << ',' << x.value.imag() << ','
           << std::abs(x.value) << '\n';
    }
    return;
  }

  if (c.format == "json") {
    json gains = json::array();
    for (int k = 0; k < s.gains.users(); ++k) {
      json per_pd = json::array();
      for (int m = 0; m < s.gains.pds_per_user(); ++m) {
        json row = json::array();
        for (int n = 0; n < s.gains.leds(); ++n) row.push_back(s.gains(k, m, n));
        per_pd.push_back(row);
      }
      gains.push_back(per_pd);
    }
    os << json{{"users_m", users_json(s.users)}, {"gains", gains}}.dump(2) << '\n';
    return;
  }
  os << "user,pd,led,gain\n";
  for (int k = 0; k < s.gains.users(); ++k)
    for (int m = 0; m < s.gains.pds_per_user(); ++m)
      for (int n = 0; n < s.gains.leds(); ++n) os << k << ',' << m << ',' << n << ',' << s.gains(k, m, n) << '\n';
}

// ---- assign ---------------------------------------------------------------

void cmd_assign(const Common& c, const std::string& algorithm) {
  const ScenarioConfig cfg = resolve_config(c);
  const Snapshot s(cfg, c.realization);
  const Assignment a = run_assignment(algorithm, s);
  const PowerVector p = s.full_power();
  const std::vector<double> r = rates(s.h, a, p, cfg.budget);
  const std::vector<double> q = sinrs(s.h, a, p, cfg.budget);
  Output out(c.out);
  std::ostream& os = out.stream();
  os.precision(17);
  if (c.format == "json") {
    json lsum = nullptr;
    if (a.every_user_served()) lsum = log_sum(r);
    os << json{{"algorithm", algorithm},
               {"users_m", users_json(s.users)},
               {"owners", std::vector<int>(a.owners().begin(), a.owners().end())},
               {"rates_bps", r},
               {"sinr", q},
               {"sum_rate_bps", sum_rate(s.h, a, p, cfg.budget)},
               {"log_sum", lsum},
               {"jfi", jain_fairness(r)}}
              .dump(2)
       << '\n';
    return;
  }
  os << "user,x_m,y_m,leds,rate_bps,sinr\n";
  for (int k = 0; k < a.users(); ++k) {
    std::vector<int> leds;
    for (int n = 0; n < a.leds(); ++n)
      if (a.serves(k, n)) leds.push_back(n);
    os << k << ',' << s.users[k].x() << ',' << s.users[k].y() << ',' << join(leds) << ',' << r[k]
       << ',' << q[k] << '\n';
  }
}

// ---- optimize -------------------------------------------------------------

struct OptimizeArgs {
  std::string algorithm = "hrs";
  std::string objective = "log";
  std::string method = "newton";
  int max_iterations = 500;
};

void cmd_optimize(const Common& c, const OptimizeArgs& a) {
  const ScenarioConfig cfg = resolve_config(c);
  const Snapshot s(cfg, c.realization);
  const Assignment assign = run_assignment(a.algorithm, s);
  PowerOptions options;
  options.method = a.method == "interior" ? PowerMethod::kInteriorPoint : PowerMethod::kProjectedNewton;
  options.max_iterations = a.max_iterations;
  const Objective obj = a.objective == "sum" ? Objective::kMaxSumRate : Objective::kMaxLogSumRate;
  const PowerSolution sol = optimize_power(s.h, assign, cfg.budget, obj, options);

  Output out(c.out);
  std::ostream& os = out.stream();
  os.precision(17);
  if (c.format == "json") {
    json trace = json::array();
    for (const auto& t : sol.trace)
      trace.push_back({{"iteration", t.iteration},
                       {"objective", t.objective},
                       {"kkt_residual", t.kkt_residual},
                       {"box_feasible", t.box_feasible}});
    os << json{{"algorithm", a.algorithm},
               {"objective", a.objective},
               {"method", a.method},
               {"owners", std::vector<int>(assign.owners().begin(), assign.owners().end())},
               {"power", std::vector<double>(sol.p.data(), sol.p.data() + sol.p.size())},
               {"lambda", std::vector<double>(sol.lambda.data(), sol.lambda.data() + sol.lambda.size())},
               {"initial_objective", sol.initial_objective},
               {"final_objective", sol.objective},
               {"kkt_residual", sol.kkt_residual},
               {"iterations", sol.iterations},
               {"converged", sol.converged},
               {"trace", trace}}
              .dump(2)
       << '\n';
    return;
  }
  os << "iteration,objective,kkt_residual,box_feasible\n";
  for (const auto& t : sol.trace)
    os << t.iteration << ',' << t.objective << ',' << t.kkt_residual << ',' << (t.box_feasible ? 1 : 0) << '\n';
  std::cerr << "p* = " << join(sol.p) << "\n";
}

// ---- combine --------------------------------------------------------------

void cmd_combine(const Common& c, const std::string& algorithm) {
  const ScenarioConfig cfg = resolve_config(c);
  const Snapshot s(cfg, c.realization);
  const Assignment a = run_assignment(algorithm, s);
  const PowerVector p = s.full_power();
  Output out(c.out);
  std::ostream& os = out.stream();
  os.precision(17);
  json rows = json::array();
  if (c.format == "csv") os << "user,scheme,sinr,sinr_db,weights\n";
  for (int k = 0; k < a.users(); ++k) {
    for (Combining scheme : {Combining::kMrc, Combining::kOc, Combining::kGbOc}) {
      std::string error;
      CombiningWeights w;
      double value = 0.0;
      try {
        w = combining_weights(scheme, s.gains, a, p, cfg.budget, k);
        value = combined_sinr(s.gains, a, p, cfg.budget, w, k);
        w.normalize();  // reported at unit norm
      } catch (const Error& e) {
        error = e.what();
      }
      if (c.format == "csv") {
        if (error.empty())
          os << k << ',' << to_string(scheme) << ',' << value << ',' << to_db(value) << ',' << join(w) << '\n';
        else
          os << k << ',' << to_string(scheme) << ",,,\n";
      } else {
        json row = {{"user", k}, {"scheme", to_string(scheme)}};
        if (error.empty()) {
          row["sinr"] = value;
          row["weights"] = std::vector<double>(w.data(), w.data() + w.size());
        } else {
          row["error"] = error;
        }
        rows.push_back(row);
      }
    }
  }
  if (c.format == "json")
    os << json{{"algorithm", algorithm},
               {"owners", std::vector<int>(a.owners().begin(), a.owners().end())},
               {"combining", rows}}
              .dump(2)
       << '\n';
}

// ---- campaign -------------------------------------------------------------

struct CampaignArgs {
  std::optional<int> realizations;
  std::optional<int> threads;
  std::vector<std::string> pipelines;
  std::optional<double> grid_step_m;
};

void cmd_campaign(const Common& c, const CampaignArgs& a) {
  ScenarioConfig cfg = resolve_config(c);
  if (a.realizations) cfg.campaign.realizations = *a.realizations;
  if (a.threads) cfg.campaign.threads = *a.threads;
  if (!a.pipelines.empty()) cfg.campaign.pipelines = a.pipelines;
  try {
    cfg.validate();
    for (const auto& p : cfg.campaign.pipelines) Pipeline::parse(p);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Output out(c.out);
  std::ostream& os = out.stream();
  if (a.grid_step_m) {
    const Scenario scenario(cfg);
    const auto grid = grid_sweep(scenario, *a.grid_step_m);
    if (c.format == "json") {
      json points = json::array();
      for (const auto& g : grid)
        points.push_back({{"x_m", g.x}, {"y_m", g.y}, {"total_gain", g.total_gain},
                          {"snr_db", g.snr_db}, {"rate_bps", g.rate}});
      os << points.dump(2) << '\n';
    } else {
      write_grid_csv(os, grid);
    }
    return;
  }
  const CampaignResult result = run_campaign(cfg);
  if (c.format == "json") {
    os << campaign_to_json(result).dump(2) << '\n';
  } else {
    write_csv(os, result);
  }
  for (const auto& s : result.summaries) {
    std::fprintf(stderr, "%-20s mean sum rate %.4g bps, failures %d/%d\n", s.pipeline.c_str(),
                 s.mean_sum_rate, s.failures, s.realizations);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-element VLC downlink simulator"};
  app.require_subcommand(1);

  Common common;
  ChannelArgs channel_args;
  std::string assign_algorithm = "hrs";
  OptimizeArgs optimize_args;
  std::string combine_algorithm = "wss";
  CampaignArgs campaign_args;

  auto* channel = app.add_subcommand("channel", "Dump DC gains, or the CFR/CIR of one link");
  add_common(channel, common);
  add_realization(channel, common);
  channel->add_flag("--cfr", channel_args.cfr, "Frequency response of one LED-PD link");
  channel->add_flag("--cir", channel_args.cir, "Impulse response of one LED-PD link");
  channel->add_option("--user", channel_args.user, "User index for --cfr/--cir");
  channel->add_option("--pd", channel_args.pd, "PD index for --cfr/--cir");
  channel->add_option("--led", channel_args.led, "LED index for --cfr/--cir");
  channel->add_option("--max-frequency-hz", channel_args.max_frequency_hz)->check(CLI::PositiveNumber);
  channel->add_option("--spacing-hz", channel_args.spacing_hz)->check(CLI::PositiveNumber);
  channel->add_option("--cfr-method", channel_args.method,
                      "Eigendecomposition per frequency, or bounce-by-bounce products (fast on large rooms)")
      ->check(CLI::IsMember({"iterated", "spectral"}));

  auto* assign = app.add_subcommand("assign", "Run one LED assignment algorithm");
  add_common(assign, common);
  add_realization(assign, common);
  assign->add_option("--algorithm", assign_algorithm)->check(CLI::IsMember(kAlgorithms));

  auto* optimize = app.add_subcommand("optimize", "Power control on top of an assignment");
  add_common(optimize, common);
  add_realization(optimize, common);
  optimize->add_option("--algorithm", optimize_args.algorithm)->check(CLI::IsMember(kAlgorithms));
  optimize->add_option("--objective", optimize_args.objective)->check(CLI::IsMember({"sum", "log"}));
  optimize->add_option("--method", optimize_args.method)->check(CLI::IsMember({"newton", "interior"}));
  optimize->add_option("--max-iterations", optimize_args.max_iterations)->check(CLI::PositiveNumber);

  auto* combine = app.add_subcommand("combine", "Per-user MRC, OC and GB-OC weights and SINRs");
  add_common(combine, common);
  add_realization(combine, common);
  combine->add_option("--algorithm", combine_algorithm)->check(CLI::IsMember(kAlgorithms));

  auto* campaign = app.add_subcommand("campaign", "Monte Carlo campaign or grid sweep");
  add_common(campaign, common);
  campaign->add_option("--realizations", campaign_args.realizations)->check(CLI::PositiveNumber);
  campaign->add_option("--threads", campaign_args.threads)->check(CLI::NonNegativeNumber);
  campaign->add_option("--pipelines", campaign_args.pipelines, "e.g. tdma hrs wss+power")->delimiter(',');
  campaign->add_option("--grid-step", campaign_args.grid_step_m, "Grid sweep with this step in m")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (*channel) cmd_channel(common, channel_args);
    else if (*assign) cmd_assign(common, assign_algorithm);
    else if (*optimize) cmd_optimize(common, optimize_args);
    else if (*combine) cmd_combine(common, combine_algorithm);
    else if (*campaign) cmd_campaign(common, campaign_args);
  } catch (const UsageError& e) {
    std::cerr << "vlcsim: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "vlcsim: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}

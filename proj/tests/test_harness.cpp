#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vlc/harness.hpp"

using namespace vlc;
using nlohmann::json;

namespace {

// Cheap campaign: half room, first-order reflections on coarse patches.
ScenarioConfig quick(int users, int realizations) {
  ScenarioConfig c = preset("small-room");
  c.reflection_order = 1;
  c.room.patch_resolution = 2.0;
  c.campaign.users = users;
  c.campaign.realizations = realizations;
  c.campaign.seed = 11;
  c.campaign.threads = 1;
  return c;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("large room preset parameters") {
  const ScenarioConfig c = preset("paper");
  CHECK(c.room.dimensions == Vec3(12, 12, 4));
  CHECK(c.room.wall_coefficient == 0.8);
  CHECK(c.room.floor_coefficient == 0.3);
  CHECK(c.room.ceiling_coefficient == 0.3);
  CHECK(c.reflection_order == 4);
  CHECK(c.transmitters.positions.size() == 4);
  CHECK(c.transmitters.lambertian_order == 7.0459);
  CHECK(c.transmitters.divergence_deg == 45.0);
  CHECK(c.receiver.height_m == 0.85);
  CHECK(c.receiver.pd_area_m2 == 40e-6);
  CHECK(c.budget.p_max == 1.0);
  CHECK(c.budget.responsivity == 0.5);
  CHECK(c.budget.bandwidth == 20e6);
  CHECK(c.budget.noise_psd == 2.5e-20);
  CHECK(build_leds(c).size() == 28);

  const ScenarioConfig seven = preset("paper-7pd");
  CHECK(seven.receiver.pd_count == 7);
  CHECK(seven.receiver.pd_area_m2 == 10e-6);

  const ScenarioConfig small = preset("small-room");
  CHECK(small.room.dimensions == Vec3(12, 6, 4));
  CHECK(build_leds(small).size() == 14);

  CHECK_THROWS_AS(preset("office"), DomainError);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).validate());
}

TEST_CASE("overrides propagate") {
  const ScenarioConfig c = build_paper_scenario(json::parse(R"({"link": {"p_max_w": 0.2}})"));
  CHECK(c.budget.p_max == 0.2);
  for (const LedSource& led : build_leds(c)) CHECK(led.power_coefficient == 0.2);
  CHECK(c.room.dimensions == Vec3(12, 12, 4));

  const ScenarioConfig small = config_from_json(json::parse(R"({"preset": "small-room", "campaign": {"users": 3}})"));
  CHECK(small.room.dimensions.y() == 6.0);
  CHECK(small.campaign.users == 3);
}

TEST_CASE("json round trip") {
  for (const auto& name : preset_names()) {
    ScenarioConfig c = preset(name);
    c.campaign.qos_ratios = std::vector<double>(c.campaign.users, 1.5);
    c.campaign.seed = 1234567890123ULL;
    CHECK(config_from_json(to_json(c)) == c);
  }
  ScenarioConfig inf = preset("paper");
  inf.reflection_order = -1;
  const json j = to_json(inf);
  CHECK(j["room"]["reflection_order"] == "infinite");
  CHECK(config_from_json(j).reflection_order < 0);
}

TEST_CASE("strict parsing") {
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"room": {"colour": 1}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"extra": 1})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"campaign": {"users": "four"}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"campaign": {"users": 2.5}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"campaign": {"seed": -1}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"room": {"reflection_order": "many"}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"room": {"size_m": [1, 2]}})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"preset": 3})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"preset": "nowhere"})")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse("[1]")), DomainError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"campaign": {"pipelines": ["hrs+fly"]}})")), DomainError);
  // Parsed values are validated too.
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"receiver": {"fov_deg": 120}})")), DomainError);
}

TEST_CASE("load_config") {
  CHECK_THROWS_AS(load_config("/nonexistent/dir/config.json"), DomainError);
  const std::string path = "harness_test_config.json";
  {
    std::ofstream(path) << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), DomainError);
  {
    std::ofstream(path) << R"({"preset": "paper-7pd", "campaign": {"seed": 99}})";
  }
  const ScenarioConfig c = load_config(path);
  CHECK(c.receiver.pd_count == 7);
  CHECK(c.campaign.seed == 99);
  std::remove(path.c_str());
}

TEST_CASE("validation errors") {
  auto broken = [](auto mutate) {
    ScenarioConfig c = preset("paper");
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.room.dimensions.x() = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.room.wall_coefficient = 1.0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.room.patch_resolution = 0; }).validate(), DomainError);
  CHECK_NOTHROW(broken([](ScenarioConfig& c) {
                  c.room.patch_resolution = 0;
                  c.reflection_order = 0;
                }).validate());
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.transmitters.positions.clear(); }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.transmitters.positions[0] = Vec3(13, 3, 4); }).validate(),
                  DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) {
                    c.transmitters.center_led = false;
                    c.transmitters.ring_leds = 0;
                  }).validate(),
                  DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.transmitters.divergence_deg = 95; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.transmitters.lambertian_order = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.receiver.height_m = 4; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.receiver.pd_count = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.receiver.tilt_deg = -1; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.receiver.pd_area_m2 = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.receiver.fov_deg = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.budget.noise_psd = -1; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.campaign.users = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.campaign.realizations = 0; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.campaign.threads = -2; }).validate(), DomainError);
  CHECK_THROWS_AS(broken([](ScenarioConfig& c) { c.campaign.qos_ratios = {1, 2}; }).validate(), DomainError);
  CHECK_THROWS_AS(Scenario(broken([](ScenarioConfig& c) { c.campaign.users = 0; })), DomainError);
}

TEST_CASE("geometry builders") {
  const ScenarioConfig c = preset("paper-7pd");
  const auto leds = build_leds(c);
  const double cos45 = std::cos(M_PI / 4);
  for (std::size_t i = 0; i < leds.size(); ++i) {
    CHECK(leds[i].orientation.norm() == doctest::Approx(1.0));
    if (i % 7 == 0)
      CHECK(leds[i].orientation == Vec3(0, 0, -1));
    else
      CHECK(-leds[i].orientation.z() == doctest::Approx(cos45));
    CHECK(leds[i].position == c.transmitters.positions[i / 7]);
  }
  const auto pds = build_receiver(c, Vec3(1, 2, 0.85));
  REQUIRE(pds.size() == 7);
  CHECK(pds[0].orientation == Vec3(0, 0, 1));
  Vec3 ring = Vec3::Zero();
  for (std::size_t m = 1; m < pds.size(); ++m) {
    CHECK(pds[m].orientation.z() == doctest::Approx(cos45));
    CHECK(pds[m].fov == doctest::Approx(M_PI / 3));
    CHECK(pds[m].area == 10e-6);
    ring += pds[m].orientation;
  }
  // Evenly spread in azimuth: horizontal parts cancel.
  CHECK(ring.head<2>().norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rng is portable and seeded per realization") {
  // First output of mt19937_64 with its default seed.
  Rng r(5489);
  CHECK(r.uniform() == static_cast<double>(14514284786278117030ULL >> 11) * 0x1.0p-53);

  Rng a = Rng::for_realization(10, 3), b(13);
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  Rng c(2);
  const auto users = place_users(preset("small-room"), c);
  CHECK(users.size() == 4);
  for (const Vec3& u : users) {
    CHECK(u.x() >= 0.0);
    CHECK(u.x() < 12.0);
    CHECK(u.y() < 6.0);
    CHECK(u.z() == 0.85);
  }
}

TEST_CASE("pipeline names") {
  const Pipeline p = Pipeline::parse("pra+power+combine");
  CHECK(p.assign == Pipeline::Assign::kPra);
  CHECK(p.power == Objective::kMaxLogSumRate);
  CHECK(p.combine);
  CHECK(Pipeline::parse("wss+power-sum").power == Objective::kMaxSumRate);
  CHECK_FALSE(Pipeline::parse("exhaustive-log").power.has_value());
  CHECK(Pipeline::parse("exhaustive-log").assign == Pipeline::Assign::kExhaustiveLog);
  CHECK_THROWS_AS(Pipeline::parse("greedy"), DomainError);
  CHECK_THROWS_AS(Pipeline::parse("hrs+turbo"), DomainError);
  CHECK_THROWS_AS(Pipeline::parse("tdma+power"), DomainError);
  CHECK_THROWS_AS(Pipeline::parse(""), DomainError);
}

TEST_CASE("cdf and percentile") {
  const auto flat = cdf({3.0, 3.0, 3.0});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].first == 3.0);
  CHECK(flat[0].second == 1.0);

  const auto steps = cdf({2.0, 1.0, 2.0, 4.0});
  REQUIRE(steps.size() == 3);
  CHECK(steps[0] == std::pair(1.0, 0.25));
  CHECK(steps[1] == std::pair(2.0, 0.75));  // includes both ties at 2
  CHECK(steps[2] == std::pair(4.0, 1.0));

  CHECK(percentile({1, 2, 3}, 50) == 2);
  CHECK(percentile({3, 1, 2}, 0) == 1);
  CHECK(percentile({3, 1, 2}, 100) == 3);
  CHECK(percentile({10, 20, 30, 40}, 25) == 10);
  CHECK(percentile({10, 20, 30, 40}, 26) == 20);
  CHECK_THROWS_AS(percentile({}, 50), DomainError);
  CHECK_THROWS_AS(percentile({1}, 101), DomainError);
  CHECK_THROWS_AS(cdf({}), DomainError);
  CHECK(to_db(100.0) == doctest::Approx(20.0));
}

TEST_CASE("single user: tdma and hrs coincide") {
  ScenarioConfig c = quick(1, 1);
  c.campaign.pipelines = {"tdma", "hrs"};
  const CampaignResult r = run_campaign(c);
  REQUIRE(r.records.size() == 2);
  REQUIRE(r.records[0].ok());
  REQUIRE(r.records[1].ok());
  CHECK(r.records[0].rates[0] == doctest::Approx(r.records[1].rates[0]).epsilon(1e-12));
  CHECK(r.records[0].jfi == doctest::Approx(1.0));
}

TEST_CASE("campaign records and summaries") {
  ScenarioConfig c = quick(3, 4);
  c.campaign.pipelines = {"tdma", "hrs", "wss+power", "pra+combine"};
  c.receiver.pd_count = 3;
  const CampaignResult r = run_campaign(c);
  REQUIRE(r.records.size() == 16);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const RealizationRecord& rec = r.records[i];
    CHECK(rec.realization == static_cast<int>(i / 4));
    CHECK(rec.pipeline == c.campaign.pipelines[i % 4]);
    CHECK(rec.seed == 11 + i / 4);
    CHECK(rec.users == r.records[i - i % 4].users);
  }
  REQUIRE(r.summaries.size() == 4);
  for (const PipelineSummary& s : r.summaries) {
    std::vector<double> single;
    double total = 0.0;
    int ok = 0;
    for (const RealizationRecord& rec : r.records) {
      if (rec.pipeline != s.pipeline || !rec.ok()) continue;
      total += rec.sum_rate;
      ++ok;
      single.insert(single.end(), rec.sinr.begin(), rec.sinr.end());
      double sum = 0.0;
      for (double x : rec.rates) sum += x;
      CHECK(rec.sum_rate == doctest::Approx(sum));
    }
    CHECK(s.realizations == 4);
    CHECK(s.failures == 4 - ok);
    if (ok == 0) continue;
    CHECK(s.mean_sum_rate == doctest::Approx(total / ok));
    REQUIRE(s.sinr_percentiles_db.count("single"));
    CHECK(s.sinr_percentiles_db.at("single")[1] == doctest::Approx(to_db(percentile(single, 50))));
  }
  const auto& combined = r.summaries[3].sinr_percentiles_db;
  CHECK(combined.count("mrc"));
  CHECK(combined.count("oc"));
  CHECK(combined.count("gboc"));
}

TEST_CASE("campaign output is deterministic across thread counts") {
  ScenarioConfig c = quick(3, 6);
  c.campaign.pipelines = {"hrs+power", "wss"};
  std::ostringstream one, four, again;
  write_csv(one, run_campaign(c));
  write_csv(again, run_campaign(c));
  c.campaign.threads = 4;
  const CampaignResult parallel = run_campaign(c);
  write_csv(four, parallel);
  CHECK(one.str() == again.str());
  CHECK(one.str() == four.str());
  CHECK(count_lines(one.str()) == 1 + 6 * 2 * 3);
  CHECK(one.str().rfind("realization,seed,pipeline,status,user,", 0) == 0);

  const json j = campaign_to_json(parallel);
  CHECK(j["records"].size() == 12);
  CHECK(j["summaries"].size() == 2);
  CHECK_FALSE(j["config"]["campaign"].contains("threads"));
}

TEST_CASE("failed pipelines become error rows") {
  // 14 LEDs and 4 users give 4^14 assignments, beyond the exhaustive search cap.
  ScenarioConfig c = quick(4, 1);
  c.campaign.pipelines = {"exhaustive-sum", "hrs"};
  const CampaignResult r = run_campaign(c);
  REQUIRE(r.records.size() == 2);
  CHECK_FALSE(r.records[0].ok());
  CHECK(r.records[1].ok());
  std::ostringstream out;
  write_csv(out, r);
  CHECK(out.str().find(",exhaustive-sum,error: ") != std::string::npos);
  CHECK(count_lines(out.str()) == 1 + 1 + 4);
  CHECK(r.summaries[0].failures == 1);
  CHECK(r.summaries[1].failures == 0);
}

TEST_CASE("grid sweep") {
  ScenarioConfig c = quick(1, 1);
  const Scenario s(c);
  const auto grid = grid_sweep(s, 3.0);
  REQUIRE(grid.size() == 4 * 2);
  CHECK(grid[0].x == 1.5);
  CHECK(grid[0].y == 1.5);
  for (const GridPoint& g : grid) {
    CHECK(g.total_gain > 0.0);
    const double a = 0.5 * g.total_gain;
    CHECK(g.snr_db == doctest::Approx(to_db(a * a / (2.5e-20 * 20e6))));
  }
  // Mirror symmetry of the half room about x = 6.
  CHECK(grid[0].total_gain == doctest::Approx(grid[6].total_gain).epsilon(1e-9));
  CHECK_THROWS_AS(grid_sweep(s, 0.0), DomainError);
  std::ostringstream out;
  write_grid_csv(out, grid);
  CHECK(count_lines(out.str()) == 9);
}

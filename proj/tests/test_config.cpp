#include <gtest/gtest.h>

#include "hybridsim/io/config.hpp"
#include "hybridsim/io/csv.hpp"

using namespace hybridsim;
using io::json;

namespace {

json default_doc() { return io::read_json_file(std::string(HYBRIDSIM_SOURCE_DIR) + "/configs/default.json"); }

std::string config_error(const json& doc) {
    try {
        io::load_bundle(doc);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultBundleLoads) {
    const auto b = io::load_bundle(default_doc());
    EXPECT_EQ(b.batch_groups.size(), 3u);
    EXPECT_EQ(b.inference_groups.size(), 5u);
    EXPECT_EQ(b.llm_templates.size(), 21u);
    EXPECT_EQ(templates_for(b.llm_templates, SpeedClass::S).size(), 7u);
    EXPECT_EQ(b.power.template_gate, 194.0);
    EXPECT_EQ(b.calendar.epoch_iso(), "2024-01-01");
    for (const auto& g : b.inference_groups) {
        double s = 0.0;
        for (double p : g.tokens.pmf()) s += p;
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
    // The rarest leaf sits under the quantile gate and backs off.
    const auto& high = b.batch_groups[2].jobs;
    EXPECT_LT(high.quantiles.at({24 * kHour, 8}).support, high.quantile_gate);
}

TEST(Config, EveryProblemIsReported) {
    auto doc = default_doc();
    doc["schema_version"] = 7;
    doc["batch"]["groups"][0]["arrivals"]["dispersion"] = "lots";
    doc["batch"]["groups"][1]["intraday"]["alr_mean"] = json::array({1, 2, 3});
    doc["inference"]["llm_templates"][0]["g"] = 0;
    doc["power"]["hw_factor"] = -2.0;
    const auto msg = config_error(doc);
    ASSERT_FALSE(msg.empty());
    EXPECT_NE(msg.find("schema_version"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch.groups[0].arrivals.dispersion"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch.groups[1].intraday.alr_mean"), std::string::npos) << msg;
    EXPECT_NE(msg.find("llm_templates[0]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("hw_factor"), std::string::npos) << msg;
    EXPECT_NE(msg.find("5 problem(s)"), std::string::npos) << msg;
}

TEST(Config, MissingGroupTemplateIsCaught) {
    auto doc = default_doc();
    auto& tpls = doc["power"]["templates"];
    for (auto it = tpls.begin(); it != tpls.end();) {
        if ((*it)["group"] == "high" && !it->contains("tl_s")) it = tpls.erase(it);
        else ++it;
    }
    EXPECT_NE(config_error(doc).find("no group-level template for batch group 'high'"), std::string::npos);
}

TEST(Config, BadCalendarEpoch) {
    auto doc = default_doc();
    doc["calendar"]["epoch"] = "2024-13-01";
    EXPECT_NE(config_error(doc).find("config.calendar.epoch"), std::string::npos);
}

TEST(Config, HashIsStableAndSensitive) {
    auto doc = default_doc();
    const auto h = io::config_hash(doc);
    EXPECT_EQ(h, io::config_hash(default_doc()));
    doc["inference"]["kappa"] = 1.25;
    EXPECT_NE(h, io::config_hash(doc));
}

TEST(Scenario, DefaultsAndOverrides) {
    const auto s = io::load_scenario(json{{"schema_version", 1},
                                          {"id", "x"},
                                          {"total_gpus", 16},
                                          {"share", 0.25},
                                          {"ckpt_s", nullptr},
                                          {"inference_cap_fraction", 0.5},
                                          {"policy", "SWF"},
                                          {"seed", 99}});
    EXPECT_EQ(s.id, "x");
    EXPECT_EQ(s.total_gpus, 16);
    EXPECT_EQ(s.ckpt_s, kNoCheckpoint);
    EXPECT_EQ(s.policy, Policy::Swf);
    EXPECT_EQ(*s.inference_cap_fraction, 0.5);
    EXPECT_EQ(s.seed, 99u);
}

TEST(Scenario, InvalidValuesListed) {
    try {
        io::load_scenario(json{{"schema_version", 1}, {"share", 2.0}, {"policy", "LIFO"}, {"ckpt_s", 0}});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("LIFO"), std::string::npos) << msg;
        EXPECT_NE(msg.find("share must lie in [0, 1]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("ckpt_s must be > 0"), std::string::npos) << msg;
    }
}

TEST(Scenario, JsonRoundTrip) {
    Scenario s;
    s.id = "rt";
    s.ckpt_s = 1800;
    s.inference_cap_fraction = 0.8;
    s.timezones = TimezonePlan::equal({0, 8 * kHour});
    json doc = io::scenario_to_json(s);
    doc["schema_version"] = 1;
    const auto back = io::load_scenario(doc);
    EXPECT_EQ(io::scenario_to_json(back), io::scenario_to_json(s));
}

TEST(Sweep, GridExpansionOrderAndIds) {
    const auto doc = io::load_sweep(json{{"schema_version", 1},
                                         {"base", {{"total_gpus", 8}, {"horizon_days", 1}}},
                                         {"grid", {{"share", {0.0, 1.0}}, {"seed", {1, 2, 3}}}}});
    ASSERT_EQ(doc.scenarios.size(), 6u);
    EXPECT_EQ(doc.scenarios[0].id, "s000");
    EXPECT_EQ(doc.scenarios[5].id, "s005");
    EXPECT_EQ(doc.scenarios[2].share, 0.0);
    EXPECT_EQ(doc.scenarios[2].seed, 3u);
    EXPECT_EQ(doc.scenarios[3].share, 1.0);
    EXPECT_EQ(doc.scenarios[3].total_gpus, 8);
}

TEST(Sweep, ShippedSweepLoads) {
    const auto doc = io::load_sweep(io::read_json_file(std::string(HYBRIDSIM_SOURCE_DIR) + "/configs/sweep_shares.json"));
    EXPECT_EQ(doc.scenarios.size(), 15u);
    EXPECT_EQ(doc.ramp_horizons, (std::vector<std::size_t>{1, 5, 15}));
    for (const auto& s : doc.scenarios) {
        EXPECT_EQ(s.total_gpus, 64);
        EXPECT_EQ(s.horizon_days, 7);
        EXPECT_GE(s.utilization, 0.7);
    }
}

TEST(Sweep, DuplicateIdsRejected) {
    const json doc{{"schema_version", 1}, {"scenarios", {{{"id", "a"}}, {{"id", "a"}}}}};
    EXPECT_THROW(io::load_sweep(doc), ConfigError);
}

TEST(Csv, NineSignificantDigitsAndQuoting) {
    EXPECT_EQ(io::fmt(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(io::fmt(2.0), "2");
    io::CsvWriter w({"a", "b"});
    w.cell(io::quoted("x,y")).cell(1.5).end_row();
    EXPECT_EQ(w.str(), "a,b\n\"x,y\",1.5\n");
}

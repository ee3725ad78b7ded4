#include <gtest/gtest.h>

#include <cmath>

#include "hybridsim/batch_jobs.hpp"
#include "stats_oracles.hpp"

using namespace hybridsim;

namespace {

QuantileCurve constant_curve(double log_runtime, double support = 1e4) {
    QuantileCurve c;
    c.log_runtime.fill(log_runtime);
    c.support = support;
    return c;
}

JobClassModel single_cell(Seconds tl, int gpu, double log_runtime) {
    JobClassModel m;
    m.group = "low";
    m.time_limit = SmoothedPmf<Seconds>::from_counts({tl}, {10}, 1.0);
    m.per_time_limit[tl] = {SmoothedPmf<int>::from_counts({gpu}, {10}, 1.0)};
    m.quantiles[{0, 0}] = constant_curve(log_runtime);
    m.quantile_gate = 50;
    return m;
}

PowerTemplate make_template(TemplateKey key, double support, std::size_t minutes = 10, double phi = 0.5) {
    PowerTemplate t;
    t.key = std::move(key);
    t.support_count = support;
    t.ar1_phi = phi;
    for (std::size_t i = 0; i < minutes; ++i) {
        const double m = 0.2 + 0.01 * static_cast<double>(i);
        t.minutes.push_back({m, 0.02, m - 0.03, m + 0.03});
    }
    return t;
}

TemplateKey leaf_key() { return {"medium", 7200, 4, 1}; }

}  // namespace

TEST(SampleJob, ConstantCurve) {
    const auto m = single_cell(7200, 2, std::log(3600.0));
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto j = sample_job(m, rng);
        ASSERT_EQ(j.runtime, 3600);
        ASSERT_EQ(j.time_limit, 7200);
        ASSERT_EQ(j.gpu, 2);
    }
}

TEST(SampleJob, TruncationAtTimeLimit) {
    const auto m = single_cell(7200, 1, std::log(10800.0));
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_job(m, rng).runtime, 7200);
}

TEST(SampleJob, RuntimeNeverExceedsLimit) {
    JobClassModel m = single_cell(3600, 1, 0.0);
    QuantileCurve c;
    for (int k = 0; k < kQuantileGridSize; ++k) c.log_runtime[static_cast<std::size_t>(k)] = 5.0 + 0.06 * k;
    c.support = 1e4;
    m.quantiles[{0, 0}] = c;
    Rng rng(3);
    for (int i = 0; i < 20000; ++i) {
        const auto j = sample_job(m, rng);
        ASSERT_GT(j.runtime, 0);
        ASSERT_LE(j.runtime, j.time_limit);
    }
}

TEST(SampleJob, AddAlphaTimeLimitPmf) {
    const auto pmf = SmoothedPmf<Seconds>::from_counts({3600, 14400}, {3, 1}, 1.0);
    EXPECT_NEAR(pmf.prob[0], 4.0 / 6.0, 1e-12);
    EXPECT_NEAR(pmf.prob[1], 2.0 / 6.0, 1e-12);
}

TEST(SampleJob, QuantileBackoffRespectsGate) {
    JobClassModel m = single_cell(7200, 2, std::log(100.0));
    m.quantiles[{7200, 0}] = constant_curve(std::log(200.0), 80);
    m.quantiles[{7200, 2}] = constant_curve(std::log(300.0), 49);
    EXPECT_DOUBLE_EQ(std::exp(m.resolve_quantiles(7200, 2).log_quantile(0.5)), 200.0);
    m.quantiles[{7200, 2}].support = 50;
    EXPECT_DOUBLE_EQ(std::exp(m.resolve_quantiles(7200, 2).log_quantile(0.5)), 300.0);
    m.quantiles.clear();
    EXPECT_THROW(m.resolve_quantiles(7200, 2), ConfigError);
}

TEST(QuantileCurve, InterpolatesAndExtrapolatesFlat) {
    QuantileCurve c;
    for (int k = 0; k < kQuantileGridSize; ++k) c.log_runtime[static_cast<std::size_t>(k)] = k;
    EXPECT_DOUBLE_EQ(c.log_quantile(0.001), 0.0);
    EXPECT_DOUBLE_EQ(c.log_quantile(0.999), 98.0);
    EXPECT_NEAR(c.log_quantile(0.015), 0.5, 1e-9);
    EXPECT_NEAR(c.log_quantile(0.50), 49.0, 1e-9);
}

TEST(ExpectedJobWork, MatchesMonteCarlo) {
    JobClassModel m;
    m.group = "g";
    m.time_limit = SmoothedPmf<Seconds>::from_counts({3600, 7200}, {3, 1}, 1.0);
    m.per_time_limit[3600] = {SmoothedPmf<int>::from_counts({1, 2}, {5, 5}, 0.0)};
    m.per_time_limit[7200] = {SmoothedPmf<int>::from_counts({4}, {1}, 0.0)};
    QuantileCurve c;
    for (int k = 0; k < kQuantileGridSize; ++k) c.log_runtime[static_cast<std::size_t>(k)] = 6.0 + 0.04 * k;
    c.support = 1e4;
    m.quantiles[{0, 0}] = c;
    Rng rng(9);
    const auto mc = test::moments(400'000, [&] {
        const auto j = sample_job(m, rng);
        return static_cast<double>(j.gpu * j.runtime);
    });
    EXPECT_NEAR(expected_job_work(m), mc.mean, 0.01 * mc.mean);
}

TEST(SelectTemplate, GateBoundary) {
    TemplateStore store;
    store.add(make_template({"medium"}, 1e4));
    store.add(make_template({"medium", 7200}, 300));
    store.add(make_template({"medium", 7200, 4}, 500));
    store.add(make_template(leaf_key(), 194));
    auto sel = select_template(store, leaf_key(), 194);
    EXPECT_EQ(sel.backoff_level, 3);
    EXPECT_EQ(sel.tpl->key.str(), leaf_key().str());

    store.add(make_template(leaf_key(), 193));
    sel = select_template(store, leaf_key(), 194);
    EXPECT_EQ(sel.backoff_level, 2);
    EXPECT_EQ(sel.tpl->support_count, 500);
}

TEST(SelectTemplate, FullBackoffAndMissingNodes) {
    TemplateStore store;
    store.add(make_template({"medium"}, 1e4));
    store.add(make_template({"medium", 7200}, 100));
    store.add(make_template(leaf_key(), 10));
    const auto sel = select_template(store, leaf_key(), 194);
    EXPECT_EQ(sel.backoff_level, 0);
    EXPECT_EQ(sel.tpl->key.str(), TemplateKey{"medium"}.str());
}

TEST(SelectTemplate, ErrorListsChain) {
    TemplateStore store;
    store.add(make_template({"medium"}, 5));
    try {
        select_template(store, leaf_key(), 194);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("medium|7200|4|1(absent)"), std::string::npos) << msg;
        EXPECT_NE(msg.find("medium|*|*|*(n=5)"), std::string::npos) << msg;
    }
}

TEST(SelectTemplate, RaisingGateNeverMoreSpecific) {
    TemplateStore store;
    store.add(make_template({"medium"}, 1e5));
    store.add(make_template({"medium", 7200}, 900));
    store.add(make_template({"medium", 7200, 4}, 400));
    store.add(make_template(leaf_key(), 200));
    int prev = 4;
    for (double gate : {1.0, 100.0, 200.0, 201.0, 400.0, 401.0, 900.0, 1000.0, 1e5}) {
        const int level = select_template(store, leaf_key(), gate).backoff_level;
        EXPECT_LE(level, prev) << "gate " << gate;
        prev = level;
    }
}

TEST(TemplateStore, RejectsInvalidTemplates) {
    TemplateStore store;
    auto bad = make_template({"low"}, 10);
    bad.minutes[3].p5 = bad.minutes[3].mean + 0.1;
    EXPECT_THROW(store.add(bad), ConfigError);
    auto phi = make_template({"low"}, 10);
    phi.ar1_phi = 1.0;
    EXPECT_THROW(store.add(phi), ConfigError);
}

TEST(Synthesis, NoiselessLimitIsExact) {
    const auto tpl = make_template({"low"}, 1e4, 5);
    PowerSynthesisConfig cfg{0.0, 2.6, 194};
    Rng a(1), b(999);
    const auto p1 = synthesize_job_power(tpl, 7 * 60 + 10, 3, cfg, a);
    const auto p2 = synthesize_job_power(tpl, 7 * 60 + 10, 3, cfg, b);
    ASSERT_EQ(p1.size(), 8u);
    EXPECT_EQ(p1, p2);
    for (std::size_t t = 0; t < p1.size(); ++t) {
        const auto& s = tpl.minutes[std::min<std::size_t>(t, 4)];
        EXPECT_EQ(p1[t], 2.6 * 3 * std::clamp(s.mean, s.p5, s.p95));
    }
}

TEST(Synthesis, ClippedToBandAndScaled) {
    auto tpl = make_template({"low"}, 1e4, 30, 0.6);
    PowerSynthesisConfig cfg{3.0, 1.7, 194};
    Rng rng(4);
    const auto p = synthesize_job_power(tpl, 500 * 60, 2, cfg, rng);
    for (std::size_t t = 0; t < p.size(); ++t) {
        const auto& s = job_minutes_beyond_template(tpl, t);
        EXPECT_GE(p[t], 1.7 * 2 * s.p5 - 1e-12);
        EXPECT_LE(p[t], 1.7 * 2 * s.p95 + 1e-12);
    }
}

TEST(Synthesis, PreClipResidualsFollowTemplatePhi) {
    // Wide band so nothing clips: output recovers the residual path exactly.
    PowerTemplate tpl;
    tpl.key = {"low"};
    tpl.support_count = 1e4;
    tpl.ar1_phi = 0.8;
    tpl.minutes = {{1.0, 0.1, -100.0, 100.0}};
    PowerSynthesisConfig cfg{1.0, 1.0, 194};
    Rng rng(12);
    const auto p = synthesize_job_power(tpl, 100'000 * 60, 1, cfg, rng);
    std::vector<double> eps(p.size());
    for (std::size_t t = 0; t < p.size(); ++t) eps[t] = (p[t] - 1.0) / 0.1;
    EXPECT_NEAR(test::lag1_autocorrelation(eps), 0.8, 0.02);
}

TEST(Ar1, WhiteNoiseLimit) {
    Rng rng(21);
    const auto e = ar1_residuals(0.0, 100'000, rng);
    EXPECT_NEAR(test::lag1_autocorrelation(e), 0.0, 0.02);
}

TEST(Ar1, ConfiguredPhiAndUnitVariance) {
    for (double phi : {0.8, 0.5, -0.3}) {
        Rng rng(22);
        const auto e = ar1_residuals(phi, 100'000, rng);
        EXPECT_NEAR(test::lag1_autocorrelation(e), phi, 0.02) << phi;
        double ss = 0.0;
        for (double v : e) ss += v * v;
        EXPECT_NEAR(ss / static_cast<double>(e.size()), 1.0, 0.05) << phi;
    }
}

TEST(HoldLast, Examples) {
    const auto ten = make_template({"low"}, 1, 10);
    EXPECT_EQ(&job_minutes_beyond_template(ten, 10), &ten.minutes[9]);
    EXPECT_EQ(&job_minutes_beyond_template(ten, 9), &ten.minutes[9]);
    EXPECT_EQ(&job_minutes_beyond_template(ten, 5000), &ten.minutes[9]);
    const auto one = make_template({"low"}, 1, 1);
    for (std::size_t q : {0u, 1u, 77u}) EXPECT_EQ(&job_minutes_beyond_template(one, q), &one.minutes[0]);
}

TEST(RuntimeBins, EdgesAreLeftClosed) {
    RuntimeBins bins;
    bins.edges[RuntimeBins::cell("low", 3600, 1)] = {360, 1800};
    EXPECT_EQ(bins.bin("low", 3600, 1, 359), 0);
    EXPECT_EQ(bins.bin("low", 3600, 1, 360), 1);
    EXPECT_EQ(bins.bin("low", 3600, 1, 1800), 2);
    EXPECT_EQ(bins.bin("low", 7200, 1, 1800), 0);
}

#include <gtest/gtest.h>

#include "hybridsim/cosim.hpp"
#include "hybridsim/io/config.hpp"

using namespace hybridsim;

namespace {

const ModelBundle& bundle() {
    static const ModelBundle b =
        io::load_bundle(io::read_json_file(std::string(HYBRIDSIM_SOURCE_DIR) + "/configs/default.json"));
    return b;
}

Scenario small(double share, std::uint64_t seed = 5) {
    Scenario s;
    s.id = "t";
    s.total_gpus = 32;
    s.horizon_days = 2;
    s.warmup_days = 1;
    s.share = share;
    s.utilization = 0.85;
    s.ckpt_s = 3600;
    s.seed = seed;
    return s;
}

void expect_conservation(const HybridResult& r, int total_gpus) {
    ASSERT_EQ(r.p_total_kw.size(), r.g_inf.size());
    for (std::size_t t = 0; t < r.p_total_kw.size(); ++t) {
        ASSERT_LE(r.g_inf[t] + r.g_batch[t], total_gpus + 1e-9) << "minute " << t;
        ASSERT_NEAR(r.p_total_kw[t], r.p_batch_kw[t] + r.p_inf_kw[t], 1e-9) << "minute " << t;
    }
}

}  // namespace

TEST(TinyCosim, HandCheckedResidualAndStarts) {
    // One template (g=2, B=2) on a 4-GPU pool; one 2-GPU batch job arriving
    // at 30 s with 300 s of work. Minute concurrency 0,1,2,3,4,5,2,0,...
    const std::vector<LLMTemplate> tpl{{"m", 2, 2, 0.05, 0.5, SpeedClass::M}};
    std::vector<std::vector<double>> conc{{0, 1, 2, 3, 4, 5, 2, 0, 0, 0, 0, 0}};
    const auto served = serve(conc, tpl, {Budget{4}});
    // cap = min(C, 2 * 4 / 2); G = 2 * ceil(cap / 2); P = 0.5 * cap.
    EXPECT_EQ(served.total_gpus, (std::vector<int>{0, 2, 2, 4, 4, 4, 2, 0, 0, 0, 0, 0}));
    EXPECT_EQ(served.conc_cap[0][5], 4.0);
    EXPECT_EQ(served.unmet[5], 1.0);
    EXPECT_EQ(served.total_power_kw[5], 2.0);
    EXPECT_EQ(served.total_power_kw[3], 1.5);

    std::vector<int> residual;
    for (int g : served.total_gpus) residual.push_back(4 - g);
    EXPECT_EQ(residual, (std::vector<int>{4, 2, 2, 0, 0, 0, 2, 4, 4, 4, 4, 4}));
    const std::vector<BatchJob> jobs{{0, 30, 2, 300, 600, "low"}};
    SchedulerOptions opt;
    opt.horizon = 12 * kMinute;
    const auto tr = schedule(jobs, CapacityTimeline::from_minutes(residual), opt);
    // Starts at 30, loses its GPUs at minute 3, restarts at minute 6.
    ASSERT_EQ(tr.runs.size(), 2u);
    EXPECT_EQ(tr.runs[0].start, 30);
    EXPECT_EQ(tr.runs[0].end, 180);
    EXPECT_EQ(tr.runs[0].status, RunStatus::Preempted);
    EXPECT_EQ(tr.runs[1].start, 360);
    EXPECT_EQ(tr.runs[1].end, 660);
    const auto busy = busy_gpu_minutes(tr.runs, 12);
    EXPECT_EQ(busy, (std::vector<double>{1, 2, 2, 0, 0, 0, 2, 2, 2, 2, 2, 0}));
    for (std::size_t t = 0; t < 12; ++t) EXPECT_LE(served.total_gpus[t] + busy[t], 4.0);
}

TEST(RunHybrid, ShareZeroEqualsBatchOnlyRun) {
    const auto& b = bundle();
    const auto s = small(0.0);
    const auto r = run_hybrid(b, s);
    for (double p : r.p_inf_kw) ASSERT_EQ(p, 0.0);
    for (int g : r.g_inf) ASSERT_EQ(g, 0);

    // Independent batch-only path: same jobs on a constant pool.
    const long days = s.warmup_days + s.horizon_days;
    const auto jobs = generate_batch_jobs(b, b.timezones, days, r.batch_scale, s.seed);
    SchedulerOptions opt;
    opt.ckpt = s.ckpt_s;
    opt.horizon = days * kDay;
    const auto tr = schedule(jobs, CapacityTimeline(s.total_gpus), opt);
    const auto minutes = static_cast<std::size_t>(days * kMinutesPerDay);
    const auto p = tail(batch_power_minutes(b, jobs, tr.runs, minutes, s.seed), r.first_minute);
    EXPECT_EQ(p, r.p_batch_kw);
    EXPECT_EQ(p, r.p_total_kw);
}

TEST(RunHybrid, ShareOneHasNoBatch) {
    const auto r = run_hybrid(bundle(), small(1.0));
    EXPECT_TRUE(r.jobs.empty());
    for (std::size_t t = 0; t < r.p_total_kw.size(); ++t) {
        ASSERT_EQ(r.p_batch_kw[t], 0.0);
        ASSERT_EQ(r.p_total_kw[t], r.p_inf_kw[t]);
    }
}

TEST(RunHybrid, ConservationEveryMinute) {
    for (double share : {0.0, 0.3, 0.7, 1.0}) {
        auto s = small(share, 17);
        s.inference_cap_fraction = 0.6;
        const auto r = run_hybrid(bundle(), s);
        expect_conservation(r, s.total_gpus);
        auto u = small(share, 18);
        u.policy = Policy::Swf;
        expect_conservation(run_hybrid(bundle(), u), u.total_gpus);
    }
}

TEST(RunHybrid, RealizedSharesTrackTargets) {
    for (double share : {0.0, 0.5, 1.0}) {
        auto s = small(share, 3);
        s.total_gpus = 64;
        s.horizon_days = 7;
        const auto r = run_hybrid(bundle(), s);
        EXPECT_NEAR(r.share_realized, share, 0.05) << share;
    }
}

TEST(RunHybrid, CappedInferenceSaturatesToConstantPower) {
    Scenario s = small(1.0);
    s.utilization = 1.5;
    s.inference_cap_fraction = 0.5;
    const auto r = run_hybrid(bundle(), s);
    const auto& sv = r.serving;
    double saturated = -1.0;
    std::size_t binding = 0;
    for (std::size_t t = 0; t < sv.total_power_kw.size(); ++t) {
        bool all_bound = true;
        for (std::size_t m = 0; m < sv.conc.size(); ++m) all_bound &= sv.conc_cap[m][t] < sv.conc[m][t];
        if (!all_bound) continue;
        ++binding;
        if (saturated < 0) saturated = sv.total_power_kw[t];
        ASSERT_EQ(sv.total_power_kw[t], saturated) << "minute " << t;
    }
    EXPECT_GT(binding, 60u);
}

TEST(RunHybrid, VerbosityOneIsIdentity) {
    auto a = small(0.5, 9);
    auto c = a;
    c.verbosity = 1.0;
    EXPECT_EQ(run_hybrid(bundle(), a).p_total_kw, run_hybrid(bundle(), c).p_total_kw);
}

TEST(RunHybrid, RejectsOversizedJobsByName) {
    auto s = small(0.0);
    s.total_gpus = 3;  // the default bundle has 4- and 8-GPU jobs
    s.utilization = 0.3;
    const auto r = run_hybrid(bundle(), s);
    ASSERT_FALSE(r.trace.rejected.empty());
    EXPECT_NE(r.trace.rejected[0].reason.find("exceeds total_gpus 3"), std::string::npos);
    expect_conservation(r, 3);
}

TEST(RunHybrid, InvalidScenarioIsAConfigError) {
    auto s = small(1.5);
    EXPECT_THROW(run_hybrid(bundle(), s), ConfigError);
}

TEST(Metrics, ScaleInvariance) {
    const auto r = run_hybrid(bundle(), small(0.5, 21));
    std::vector<double> scaled;
    for (double p : r.p_total_kw) scaled.push_back(3.7 * p);
    EXPECT_NEAR(cov(r.p_total_kw), cov(scaled), 1e-12);
    EXPECT_NEAR(ramp_rate(r.p_total_kw, 15).median, ramp_rate(scaled, 15).median, 1e-12);
    const auto ramps = ramp_rate(r.p_total_kw, 5);
    EXPECT_EQ(ramps.ramps.size(), r.p_total_kw.size() - 5);
    for (double x : ramps.ramps) ASSERT_GE(x, 0.0);
}

TEST(Sweep, OnePointMatchesManualRun) {
    const auto s = small(0.5, 4);
    MetricsOptions opt;
    const auto rows = sweep(bundle(), {s}, opt);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_TRUE(rows[0].error.empty());
    const auto r = run_hybrid(bundle(), s);
    const auto m = compute_metrics(r, opt);
    EXPECT_EQ(rows[0].metrics.cov, m.cov);
    EXPECT_EQ(rows[0].metrics.ramp_medians, m.ramp_medians);
    EXPECT_EQ(rows[0].share_realized, r.share_realized);
    EXPECT_EQ(m.cov, cov(r.p_total_kw));
    EXPECT_EQ(m.ramp_medians[2], ramp_rate(r.p_total_kw, 15).median);
}

TEST(Sweep, ParallelRowsMatchSerialAndErrorsStayPerRow) {
    std::vector<Scenario> grid;
    for (double share : {0.0, 0.5, 1.0}) grid.push_back(small(share, 31));
    grid.push_back(small(0.5, 31));
    grid[1].id = "bad";
    grid[1].utilization = -1.0;
    const MetricsOptions opt;
    const auto serial = sweep(bundle(), grid, opt, 1);
    const auto par = sweep(bundle(), grid, opt, 3);
    ASSERT_EQ(serial.size(), 4u);
    EXPECT_FALSE(serial[1].error.empty());
    EXPECT_TRUE(serial[0].error.empty());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(serial[i].scenario.id, par[i].scenario.id);
        EXPECT_EQ(serial[i].error, par[i].error);
        EXPECT_EQ(serial[i].metrics.cov, par[i].metrics.cov);
        EXPECT_EQ(serial[i].metrics.ramp_medians, par[i].metrics.ramp_medians);
    }
    // Same scenario, same seed: same row.
    EXPECT_EQ(serial[2].metrics.cov, sweep(bundle(), {grid[2]}, opt)[0].metrics.cov);
}

TEST(LoadScales, TargetsExpectedWork) {
    const auto& b = bundle();
    auto s = small(0.25);
    const auto groups = with_verbosity(b.inference_groups, s.verbosity);
    const auto templates = templates_for(b.llm_templates, s.speed);
    const auto k = load_scales(b, s, groups, templates);
    const long days = s.warmup_days + s.horizon_days;
    const double target = s.utilization * s.total_gpus * 24.0 * days;
    EXPECT_NEAR(k.inference * expected_inference_work(b, groups, templates, days * kMinutesPerDay), 0.25 * target, 1e-6);
    EXPECT_NEAR(k.batch * expected_batch_work(b, days), 0.75 * target, 1e-6);
}

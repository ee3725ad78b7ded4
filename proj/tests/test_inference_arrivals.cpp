#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hybridsim/inference_arrivals.hpp"
#include "hybridsim/io/config.hpp"
#include "stats_oracles.hpp"

using namespace hybridsim;

namespace {

TokenDistribution point_mass(int y, int support) {
    std::vector<double> p(static_cast<std::size_t>(support), 0.0);
    p[static_cast<std::size_t>(y - 1)] = 1.0;
    return TokenDistribution(p);
}

// Empirical frequencies of sample_tokens vs the pmf, 4-sigma multinomial band.
void expect_frequencies(const TokenDistribution& d, std::uint64_t seed, int n = 1'000'000) {
    Rng rng(seed);
    std::vector<int> counts(static_cast<std::size_t>(d.support_max()) + 1, 0);
    for (int i = 0; i < n; ++i) {
        const int y = sample_tokens(d, rng);
        ASSERT_GE(y, 1);
        ASSERT_LE(y, d.support_max());
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int y = 1; y <= d.support_max(); ++y) {
        const double p = d.prob(y);
        EXPECT_NEAR(counts[static_cast<std::size_t>(y)], n * p, test::multinomial_4sigma(n, p) + 1e-9) << "y=" << y;
    }
}

const ModelBundle& default_bundle() {
    static const ModelBundle b =
        io::load_bundle(io::read_json_file(std::string(HYBRIDSIM_SOURCE_DIR) + "/configs/default.json"));
    return b;
}

}  // namespace

TEST(MinuteRate, ZeroTableIsOne) {
    MinuteRateModel m;
    for (int t : {0, 1, 599, 1439}) {
        EXPECT_DOUBLE_EQ(minute_rate(m, t, false), 1.0);
        EXPECT_DOUBLE_EQ(minute_rate(m, t, true), 1.0);
    }
}

TEST(MinuteRate, SlotArithmetic) {
    MinuteRateModel m;
    m.log_rate[40][0] = std::log(120.0);
    for (int t = 600; t <= 614; ++t) EXPECT_NEAR(minute_rate(m, t, false), 120.0, 1e-9);
    EXPECT_DOUBLE_EQ(minute_rate(m, 615, false), 1.0);
    EXPECT_DOUBLE_EQ(minute_rate(m, 599, false), 1.0);
    EXPECT_DOUBLE_EQ(minute_rate(m, 600, true), 1.0);
    m.log_rate[0][1] = 0.7;
    EXPECT_EQ(minute_rate(m, 0, true), minute_rate(m, 14, true));
    EXPECT_THROW(minute_rate(m, 1440, false), DomainError);
}

TEST(MinuteArrivals, NbExamples) {
    const std::vector<std::tuple<double, double, double>> cases{{5, 0, 5}, {100, 0.05, 600}, {1, 1, 2}};
    std::uint64_t seed = 40;
    for (auto [mu, a, var] : cases) {
        Rng rng(seed++);
        const auto m = test::moments(1'000'000, [&] { return static_cast<double>(sample_minute_arrivals(mu, a, rng)); });
        EXPECT_NEAR(m.mean, mu, 0.01 * mu);
        EXPECT_NEAR(m.var, var, 0.05 * var);
    }
}

TEST(TemplateSplit, Examples) {
    const auto one = split_across_templates(12.0, 0.3, 1);
    EXPECT_DOUBLE_EQ(one.mean, 12.0);
    EXPECT_DOUBLE_EQ(one.dispersion, 0.3);
    const auto seven = split_across_templates(14.0, 0.1, 7);
    EXPECT_NEAR(seven.dispersion, 0.7, 1e-12);
    EXPECT_NEAR(7 * (seven.mean + seven.dispersion * seven.mean * seven.mean), 14.0 + 0.1 * 14.0 * 14.0, 1e-9);
    EXPECT_EQ(split_across_templates(3.0, 0.0, 5).dispersion, 0.0);
    EXPECT_THROW(split_across_templates(1.0, 0.1, 0), DomainError);
}

TEST(TemplateSplit, SuperpositionPreservesGroupMoments) {
    const double mu = 30.0, alpha = 0.08;
    const int M = 7;
    const auto p = split_across_templates(mu, alpha, M);
    Rng rng(8);
    const auto m = test::moments(200'000, [&] {
        std::int64_t total = 0;
        for (int k = 0; k < M; ++k) total += sample_minute_arrivals(p.mean, p.dispersion, rng);
        return static_cast<double>(total);
    });
    EXPECT_NEAR(m.mean, mu, 0.01 * mu);
    EXPECT_NEAR(m.var, mu + alpha * mu * mu, 0.05 * (mu + alpha * mu * mu));
}

TEST(GroupPmf, Examples) {
    const std::vector<double> counts{3, 1};
    const std::vector<double> pooled{0.5, 0.5};
    const auto post = fit_group_pmf(counts, pooled, 4.0);
    EXPECT_NEAR(post.prob(1), 0.625, 1e-12);
    EXPECT_NEAR(post.prob(2), 0.375, 1e-12);

    const auto emp = fit_group_pmf(counts, pooled, 0.0);
    EXPECT_NEAR(emp.prob(1), 0.75, 1e-12);
    EXPECT_NEAR(emp.prob(2), 0.25, 1e-12);

    const auto prior = fit_group_pmf({0, 0, 0}, {0.2, 0.3, 0.5}, 10.0);
    EXPECT_NEAR(prior.prob(1), 0.2, 1e-12);
    EXPECT_NEAR(prior.prob(3), 0.5, 1e-12);

    EXPECT_THROW(fit_group_pmf({0, 0}, {0.5, 0.5}, 0.0), ConfigError);
}

TEST(SmoothHistogram, Examples) {
    const auto z = smooth_histogram({2, 6, 0, 2}, 0);
    EXPECT_EQ(z, (std::vector<double>{0.2, 0.6, 0.0, 0.2}));

    std::vector<double> pm(200, 0.0);
    pm[99] = 1.0;  // y = 100
    const auto s = smooth_histogram(pm, 1);
    EXPECT_NEAR(s[98], 1.0 / 3, 1e-12);
    EXPECT_NEAR(s[99], 1.0 / 3, 1e-12);
    EXPECT_NEAR(s[100], 1.0 / 3, 1e-12);
    EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-12);

    const std::vector<double> flat(50, 7.0);
    for (int bw : {1, 3, 10, 60}) {
        for (double v : smooth_histogram(flat, bw)) EXPECT_NEAR(v, 1.0 / 50, 1e-12);
    }
}

TEST(Verbosity, UnitScaleIsBitExact) {
    const auto& conv = default_bundle().inference_groups.at(2).tokens;
    const auto same = apply_verbosity(conv, 1.0);
    EXPECT_EQ(same.pmf(), conv.pmf());
}

TEST(Verbosity, PointMassDoubles) {
    const auto d = apply_verbosity(point_mass(10, 1200), 2.0);
    EXPECT_EQ(d.support_max(), 2400);
    EXPECT_NEAR(d.prob(20) + d.prob(21), 1.0, 1e-12);
    for (int y = 1; y <= 2400; ++y) {
        if (y != 20 && y != 21) {
            EXPECT_EQ(d.prob(y), 0.0) << y;
        }
    }
}

TEST(Verbosity, MonteCarloMeanScalesWithS) {
    const auto& conv = default_bundle().inference_groups.at(2).tokens;
    const double base = conv.mean();
    std::uint64_t seed = 500;
    for (double s : {0.5, 1.5, 2.0, 3.0}) {
        const auto d = apply_verbosity(conv, s);
        EXPECT_NEAR(std::accumulate(d.pmf().begin(), d.pmf().end(), 0.0), 1.0, 1e-9);
        Rng rng(seed++);
        const auto m = test::moments(1'000'000, [&] { return static_cast<double>(sample_tokens(d, rng)); });
        EXPECT_NEAR(m.mean, s * base, 0.05 * s * base) << "s=" << s;
    }
}

TEST(Verbosity, RejectsNonPositiveScale) {
    EXPECT_THROW(apply_verbosity(point_mass(1, 3), 0.0), DomainError);
}

TEST(SampleTokens, PointMassAlwaysSame) {
    const auto d = point_mass(500, 1200);
    Rng rng(1);
    for (int i = 0; i < 10'000; ++i) ASSERT_EQ(sample_tokens(d, rng), 500);
}

TEST(SampleTokens, UniformFrequencies) { expect_frequencies(TokenDistribution({0.25, 0.25, 0.25, 0.25}), 61); }

TEST(SampleTokens, PosteriorExampleFrequencies) {
    expect_frequencies(fit_group_pmf({3, 1}, {0.5, 0.5}, 4.0), 62);
}

TEST(SampleTokens, TrailingZeroMassNeverDrawn) {
    const TokenDistribution d({0.5, 0.5, 0.0, 0.0});
    Rng rng(3);
    for (int i = 0; i < 100'000; ++i) ASSERT_LE(sample_tokens(d, rng), 2);
}

TEST(TokenDistribution, RejectsBadMass) {
    EXPECT_THROW(TokenDistribution({0.5, 0.6}), ConfigError);
    EXPECT_THROW(TokenDistribution({1.5, -0.5}), ConfigError);
    EXPECT_THROW(TokenDistribution(std::vector<double>{}), ConfigError);
}

TEST(DefaultConfig, TokenSupportsMatchFamilies) {
    const auto& g = default_bundle().inference_groups;
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g[0].rates.group, "Code");
    EXPECT_EQ(g[0].tokens.support_max(), 5000);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_EQ(g[i].tokens.support_max(), 1200);
}

TEST(RequestStream, FixedSeedIsBitIdenticalAndArrivalsInMinute) {
    const auto& b = default_bundle();
    auto collect = [&](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<InferenceRequest> out;
        generate_inference_requests(b.inference_groups, b.kappa, 7, b.calendar, 100, 60, 1.0, rng,
                                    [&](const InferenceRequest& r) { out.push_back(r); });
        return out;
    };
    const auto a = collect(4), c = collect(4);
    ASSERT_EQ(a.size(), c.size());
    ASSERT_FALSE(a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].arrival_s, c[i].arrival_s);
        EXPECT_EQ(a[i].tokens, c[i].tokens);
        EXPECT_EQ(a[i].template_index, c[i].template_index);
        EXPECT_GE(a[i].arrival_s, 100 * 60.0);
        EXPECT_LT(a[i].arrival_s, 160 * 60.0);
    }
}

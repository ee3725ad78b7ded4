#pragma once

// Minute-level inference arrivals, variance-preserving template split, and
// generated-token distributions (smoothing, shrinkage, verbosity).

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hybridsim/calendar.hpp"
#include "hybridsim/core.hpp"

namespace hybridsim {

inline constexpr int kSlotsPerDay = 96;
inline constexpr int kMinutesPerSlot = 15;

/// Log mean arrivals per minute, by 15-minute slot and (weekday, weekend).
struct MinuteRateModel {
    std::string group;
    std::array<std::array<double, 2>, kSlotsPerDay> log_rate{};
    double dispersion = 0.0;
};

inline double minute_rate(const MinuteRateModel& model, int minute_of_day, bool weekend) {
    if (minute_of_day < 0 || minute_of_day >= kMinutesPerDay) {
        throw DomainError("minute_rate: minute of day out of range");
    }
    return std::exp(model.log_rate[static_cast<std::size_t>(minute_of_day / kMinutesPerSlot)][weekend ? 1 : 0]);
}

inline std::int64_t sample_minute_arrivals(double mu, double alpha_eff, Rng& rng) {
    return sample_nb2(mu, alpha_eff, rng);
}

struct TemplateStreamParams {
    double mean = 0.0;
    double dispersion = 0.0;
};

/// Equal split of an NB2 stream across `templates` independent streams.
/// Each gets mean mu/M and dispersion M*alpha so the superposed variance is
/// M (mu/M + M alpha (mu/M)^2) = mu + alpha mu^2.
inline TemplateStreamParams split_across_templates(double mu, double alpha, int templates) {
    if (templates < 1) throw DomainError("split_across_templates: need at least one template");
    const double m = static_cast<double>(templates);
    return {mu / m, m * alpha};
}

/// Probability mass over generated-token counts 1..support_max. pmf[i] is
/// the mass of y = i + 1.
class TokenDistribution {
public:
    TokenDistribution() = default;
    explicit TokenDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) { rebuild(); }

    int support_max() const { return static_cast<int>(pmf_.size()); }
    const std::vector<double>& pmf() const { return pmf_; }
    double prob(int y) const { return (y >= 1 && y <= support_max()) ? pmf_[static_cast<std::size_t>(y - 1)] : 0.0; }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < pmf_.size(); ++i) m += static_cast<double>(i + 1) * pmf_[i];
        return m;
    }

    /// Inverse-CDF draw.
    int sample(Rng& rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) it = std::prev(cdf_.end());
        return static_cast<int>(it - cdf_.begin()) + 1;
    }

private:
    void rebuild() {
        if (pmf_.empty()) throw ConfigError("token distribution: empty support");
        double total = 0.0;
        for (double p : pmf_) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("token distribution: negative or non-finite mass");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("token distribution: mass does not sum to 1");
        cdf_.resize(pmf_.size());
        std::partial_sum(pmf_.begin(), pmf_.end(), cdf_.begin());
        // Zero-mass tail entries share the final cumulative value; pin the
        // last positive one so u -> 1 never lands on a zero-mass cell.
        const double last = cdf_.back();
        for (auto it = cdf_.rbegin(); it != cdf_.rend() && *it >= last; ++it) *it = 1.0;
    }

    std::vector<double> pmf_;
    std::vector<double> cdf_;
};

inline int sample_tokens(const TokenDistribution& dist, Rng& rng) { return dist.sample(rng); }

inline std::vector<double> normalized(std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    if (!(total > 0.0)) throw DomainError("cannot normalize an all-zero histogram");
    for (auto& x : v) x /= total;
    return v;
}

/// Symmetric moving average of half-width `bandwidth`, each window divided
/// by the number of in-support cells it covers, then normalized.
inline std::vector<double> smooth_histogram(const std::vector<double>& raw, int bandwidth) {
    if (bandwidth < 0) throw DomainError("smooth_histogram: bandwidth must be >= 0");
    if (bandwidth == 0) return normalized(raw);
    const auto n = static_cast<long>(raw.size());
    std::vector<double> prefix(raw.size() + 1, 0.0);
    std::partial_sum(raw.begin(), raw.end(), prefix.begin() + 1);
    std::vector<double> out(raw.size());
    for (long i = 0; i < n; ++i) {
        const long lo = std::max(0L, i - bandwidth);
        const long hi = std::min(n - 1, i + bandwidth);
        out[static_cast<std::size_t>(i)] =
            (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) / static_cast<double>(hi - lo + 1);
    }
    return normalized(std::move(out));
}

/// Dirichlet posterior mean with prior mass tau spread as `pooled`.
inline TokenDistribution fit_group_pmf(const std::vector<double>& counts, const std::vector<double>& pooled,
                                       double tau) {
    if (counts.size() != pooled.size()) throw ConfigError("fit_group_pmf: histogram and prior supports differ");
    if (!(tau >= 0.0)) throw ConfigError("fit_group_pmf: pseudo-count must be >= 0");
    const double n = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (!(n + tau > 0.0)) throw ConfigError("fit_group_pmf: no observations and zero pseudo-count");
    std::vector<double> pmf(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) pmf[i] = (counts[i] + tau * pooled[i]) / (n + tau);
    // Absorb rounding so the mass sums to 1.
    return TokenDistribution(normalized(std::move(pmf)));
}

/// Stretches generated lengths by s via F_new(y) = F_old(floor(y / s)) on
/// the extended support 1..ceil(s * support_max).
inline TokenDistribution apply_verbosity(const TokenDistribution& dist, double s) {
    if (!(s > 0.0)) throw DomainError("apply_verbosity: scale must be > 0");
    if (s == 1.0) return dist;
    const int n_old = dist.support_max();
    std::vector<double> cdf_old(static_cast<std::size_t>(n_old) + 1, 0.0);
    for (int k = 1; k <= n_old; ++k) cdf_old[static_cast<std::size_t>(k)] = cdf_old[static_cast<std::size_t>(k - 1)] + dist.prob(k);
    auto f_old = [&](long k) {
        if (k <= 0) return 0.0;
        if (k >= n_old) return 1.0;
        return cdf_old[static_cast<std::size_t>(k)];
    };
    const int n_new = std::max(1, static_cast<int>(std::ceil(s * n_old - 1e-9)));
    std::vector<double> pmf(static_cast<std::size_t>(n_new));
    double prev = 0.0;
    for (int y = 1; y <= n_new; ++y) {
        const double cur = f_old(static_cast<long>(std::floor(y / s + 1e-9)));
        pmf[static_cast<std::size_t>(y - 1)] = std::max(0.0, cur - prev);
        prev = cur;
    }
    return TokenDistribution(normalized(std::move(pmf)));
}

struct InferenceRequest {
    double arrival_s = 0.0;
    int group = 0;
    int template_index = 0;
    int tokens = 0;
};

/// Per-group inputs to the request generator.
struct InferenceGroupModel {
    MinuteRateModel rates;
    TokenDistribution tokens;
};

/// Draws minute-level arrivals for every (minute, group, template) in that
/// loop order and hands each request to `sink`. Within a minute the
/// requests are emitted per group and template, not time-sorted.
///
/// `kappa` multiplies every group's dispersion; `rate_scale` multiplies
/// every mean (used for load targeting).
template <typename Sink>
void generate_inference_requests(const std::vector<InferenceGroupModel>& groups, double kappa, int templates,
                                 const Calendar& calendar, long first_minute, long minutes, double rate_scale,
                                 Rng& rng, Sink&& sink) {
    if (!(rate_scale > 0.0)) return;
    for (long t = first_minute; t < first_minute + minutes; ++t) {
        const bool weekend = calendar.is_weekend_minute(t);
        const int minute_of_day = static_cast<int>(((t % kMinutesPerDay) + kMinutesPerDay) % kMinutesPerDay);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const double mu = minute_rate(groups[g].rates, minute_of_day, weekend) * rate_scale;
            const auto split = split_across_templates(mu, kappa * groups[g].rates.dispersion, templates);
            for (int m = 0; m < templates; ++m) {
                const auto n = sample_minute_arrivals(split.mean, split.dispersion, rng);
                for (std::int64_t i = 0; i < n; ++i) {
                    InferenceRequest r;
                    r.arrival_s = (static_cast<double>(t) + rng.uniform()) * static_cast<double>(kMinute);
                    r.group = static_cast<int>(g);
                    r.template_index = m;
                    r.tokens = groups[g].tokens.sample(rng);
                    sink(r);
                }
            }
        }
    }
}

}  // namespace hybridsim

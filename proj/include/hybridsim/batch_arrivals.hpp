#pragma once

// Batch-job arrival generation: NB2 daily counts with calendar effects,
// logistic-normal intraday composition, and the multi-time-zone variant.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "hybridsim/calendar.hpp"
#include "hybridsim/core.hpp"

namespace hybridsim {

inline constexpr int kHoursPerDay = 24;
using HourlyProfile = std::array<double, kHoursPerDay>;

/// Log-link daily arrival model for one resource group. Week fixed effects
/// are already averaged into the daytype / week-of-month tables.
struct DailyCountModel {
    std::string group;
    double weekday_effect = 0.0;
    double weekend_effect = 0.0;
    std::vector<double> week_of_month_effects;
    double dispersion = 0.0;
};

struct IntradayProfile {
    std::array<double, kHoursPerDay - 1> alr_mean{};
    std::array<double, kHoursPerDay - 1> alr_var{};
    int reference_hour = 0;
    double shrinkage = 0.0;  // calibration provenance only
};

struct TimezonePlan {
    std::vector<Seconds> offsets;
    std::vector<double> shares;

    static TimezonePlan single() { return {{0}, {1.0}}; }

    static TimezonePlan equal(std::vector<Seconds> offsets) {
        const auto n = offsets.size();
        return {std::move(offsets), std::vector<double>(n, 1.0 / static_cast<double>(n))};
    }

    std::size_t zones() const { return offsets.size(); }
};

struct BatchArrival {
    Seconds timestamp = 0;
    std::string group;
};

inline void validate(const TimezonePlan& plan) {
    if (plan.offsets.empty() || plan.offsets.size() != plan.shares.size()) {
        throw ConfigError("timezone plan: need one share per zone and at least one zone");
    }
    double total = 0.0;
    for (double s : plan.shares) {
        if (!(s >= 0.0)) throw ConfigError("timezone plan: shares must be nonnegative");
        total += s;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("timezone plan: shares must sum to 1");
    auto sorted = plan.offsets;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ConfigError("timezone plan: offsets must be distinct");
    }
}

/// Expected arrivals on a calendar day: exp(daytype effect + week-of-month effect).
inline double daily_mean(const DailyCountModel& model, const Calendar& calendar, long day) {
    const int wom = calendar.week_of_month(day);
    if (wom < 0 || static_cast<std::size_t>(wom) >= model.week_of_month_effects.size()) {
        throw ConfigError("daily count model '" + model.group + "': no week-of-month effect for level " +
                          std::to_string(wom));
    }
    const double daytype =
        calendar.day_type(day) == DayType::Weekend ? model.weekend_effect : model.weekday_effect;
    return std::exp(daytype + model.week_of_month_effects[static_cast<std::size_t>(wom)]);
}

inline std::int64_t sample_daily_count(double mu, double alpha, Rng& rng) { return sample_nb2(mu, alpha, rng); }

/// Inverse additive log-ratio; logits are listed hour-ascending with the
/// reference hour (implicit logit 0) skipped.
inline HourlyProfile inverse_alr(const std::array<double, kHoursPerDay - 1>& logits, int reference_hour) {
    HourlyProfile w{};
    double total = 0.0;
    std::size_t k = 0;
    for (int h = 0; h < kHoursPerDay; ++h) {
        double z = 0.0;
        if (h != reference_hour) z = std::clamp(logits[k++], -700.0, 700.0);
        w[static_cast<std::size_t>(h)] = z;
    }
    // Shift by the maximum so the largest term is exp(0).
    const double top = *std::max_element(w.begin(), w.end());
    for (auto& v : w) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : w) v /= total;
    return w;
}

inline HourlyProfile sample_hourly_profile(const IntradayProfile& profile, Rng& rng) {
    if (profile.reference_hour < 0 || profile.reference_hour >= kHoursPerDay) {
        throw ConfigError("intraday profile: reference hour out of range");
    }
    std::array<double, kHoursPerDay - 1> z{};
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = profile.alr_mean[i] + std::sqrt(profile.alr_var[i]) * rng.normal();
    }
    return inverse_alr(z, profile.reference_hour);
}

/// Multinomial hour assignment then uniform placement within the hour; sorted.
inline std::vector<Seconds> place_arrivals(std::int64_t count, const HourlyProfile& profile, Seconds day_start,
                                           Rng& rng) {
    std::vector<Seconds> out;
    if (count <= 0) return out;
    out.reserve(static_cast<std::size_t>(count));
    std::discrete_distribution<int> hour_dist(profile.begin(), profile.end());
    std::uniform_int_distribution<Seconds> offset(0, kHour - 1);
    for (std::int64_t i = 0; i < count; ++i) {
        const int h = hour_dist(rng.engine());
        out.push_back(day_start + h * kHour + offset(rng.engine()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Multi-zone superposition for one resource group. Zone z draws its own
/// daily counts at mean x share_z, places them on its local clock, and is
/// shifted by its offset onto reference time. Arrivals outside
/// [0, days) are dropped. A single zone with offset 0 consumes the stream
/// exactly like the single-zone generator.
inline std::vector<Seconds> superpose_timezones(const TimezonePlan& plan, const DailyCountModel& model,
                                                const IntradayProfile& profile, const Calendar& calendar,
                                                long days, Rng& rng, double mean_scale = 1.0) {
    validate(plan);
    const Seconds horizon = days * kDay;
    std::vector<Seconds> merged;
    for (std::size_t z = 0; z < plan.zones(); ++z) {
        Seconds offset = plan.offsets[z] % kDay;
        if (offset < 0) offset += kDay;
        const long first_day = offset > 0 ? -1 : 0;
        for (long d = first_day; d < days; ++d) {
            const double mu = daily_mean(model, calendar, d) * plan.shares[z] * mean_scale;
            if (!(mu > 0.0)) continue;
            const auto n = sample_daily_count(mu, model.dispersion, rng);
            const auto hours = sample_hourly_profile(profile, rng);
            for (Seconds t : place_arrivals(n, hours, d * kDay, rng)) {
                const Seconds shifted = t + offset;
                if (shifted >= 0 && shifted < horizon) merged.push_back(shifted);
            }
        }
    }
    std::sort(merged.begin(), merged.end());
    return merged;
}

inline std::vector<Seconds> generate_group_arrivals(const DailyCountModel& model, const IntradayProfile& profile,
                                                    const Calendar& calendar, long days, Rng& rng,
                                                    double mean_scale = 1.0) {
    return superpose_timezones(TimezonePlan::single(), model, profile, calendar, days, rng, mean_scale);
}

/// Expected arrivals over [0, days) under the single-zone generator.
inline double expected_arrivals(const DailyCountModel& model, const Calendar& calendar, long days) {
    double total = 0.0;
    for (long d = 0; d < days; ++d) total += daily_mean(model, calendar, d);
    return total;
}

}  // namespace hybridsim

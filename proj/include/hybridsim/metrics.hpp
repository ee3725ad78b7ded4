#pragma once

// Grid-facing metrics: composition, utilization, COV, ramp rates, hourly
// profiles, and first-difference transmission diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

/// W_inf / (W_inf + W_batch).
inline double inference_share(double w_inf, double w_batch) {
    const double total = w_inf + w_batch;
    if (!(total > 0.0)) throw DomainError("inference_share: total offered work is zero");
    return w_inf / total;
}

/// Offered GPU-hours over capacity GPU-hours.
inline double utilization(double offered_gpu_hours, int total_gpus, double horizon_hours) {
    if (total_gpus <= 0 || !(horizon_hours > 0.0)) throw DomainError("utilization: need positive capacity and horizon");
    return offered_gpu_hours / (static_cast<double>(total_gpus) * horizon_hours);
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw DomainError("mean of an empty series");
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// Population standard deviation over mean.
inline double cov(std::span<const double> series) {
    const double m = mean(series);
    if (!(m > 0.0)) throw DomainError("cov: series mean must be > 0");
    return population_std(series) / m;
}

inline double median(std::vector<double> xs) {
    if (xs.empty()) throw DomainError("median of an empty sample");
    const auto mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
    const double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

/// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw DomainError("quantile of an empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= xs.size()) return xs.back();
    return xs[i] + (pos - static_cast<double>(i)) * (xs[i + 1] - xs[i]);
}

struct RampSummary {
    std::vector<double> ramps;
    double median = 0.0;
};

/// |P(t + dt) - P(t)| / mean(P) on the minute grid.
inline RampSummary ramp_rate(std::span<const double> series, std::size_t dt_minutes, double normalizer) {
    if (dt_minutes == 0 || series.size() <= dt_minutes) throw DomainError("ramp_rate: series too short for horizon");
    if (!(normalizer > 0.0)) throw DomainError("ramp_rate: normalizer must be > 0");
    RampSummary out;
    out.ramps.resize(series.size() - dt_minutes);
    for (std::size_t t = 0; t + dt_minutes < series.size(); ++t) {
        out.ramps[t] = std::abs(series[t + dt_minutes] - series[t]) / normalizer;
    }
    out.median = median(out.ramps);
    return out;
}

inline RampSummary ramp_rate(std::span<const double> series, std::size_t dt_minutes) {
    return ramp_rate(series, dt_minutes, mean(series));
}

/// Median over days of each day's median ramp (days fully covering the ramps).
inline double daily_median_ramp(const RampSummary& r) {
    std::vector<double> medians;
    for (std::size_t d = 0; (d + 1) * kMinutesPerDay <= r.ramps.size(); ++d) {
        const auto first = r.ramps.begin() + static_cast<std::ptrdiff_t>(d * kMinutesPerDay);
        medians.push_back(median(std::vector<double>(first, first + kMinutesPerDay)));
    }
    if (medians.empty()) return r.median;
    return median(std::move(medians));
}

inline constexpr std::array<double, 5> kProfileQuantiles{0.05, 0.25, 0.50, 0.75, 0.95};

struct HourlyQuantiles {
    std::array<std::array<double, 5>, 24> total{};
    std::array<std::array<double, 5>, 24> batch{};
    std::array<std::array<double, 5>, 24> inference{};
};

/// Per hour-of-day quantiles of power normalized by the mean total power.
/// Components share the total's normalizer so they add up.
inline HourlyQuantiles daily_profile(std::span<const double> total, std::span<const double> batch,
                                     std::span<const double> inference) {
    if (total.size() < static_cast<std::size_t>(kMinutesPerDay)) throw DomainError("daily_profile: need at least one day");
    if (batch.size() != total.size() || inference.size() != total.size()) throw DomainError("daily_profile: length mismatch");
    const double norm = mean(total);
    if (!(norm > 0.0)) throw DomainError("daily_profile: mean total power must be > 0");
    HourlyQuantiles out;
    auto fill = [&](std::span<const double> s, std::array<std::array<double, 5>, 24>& dst) {
        std::array<std::vector<double>, 24> by_hour;
        for (std::size_t t = 0; t < s.size(); ++t) by_hour[(t % kMinutesPerDay) / 60].push_back(s[t] / norm);
        for (std::size_t h = 0; h < 24; ++h) {
            for (std::size_t q = 0; q < kProfileQuantiles.size(); ++q) dst[h][q] = quantile(by_hour[h], kProfileQuantiles[q]);
        }
    };
    fill(total, out.total);
    fill(batch, out.batch);
    fill(inference, out.inference);
    return out;
}

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline OlsFit ols(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw DomainError("ols: need at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : points) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(points.size());
    my /= static_cast<double>(points.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (!(sxx > 0.0)) throw DomainError("ols: zero variance in x");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

struct TransmissionDiagnostic {
    OlsFit fit;
    std::vector<std::pair<double, double>> pairs;  // (dx, dy)
};

/// z-score each series over the run, average over consecutive
/// non-overlapping windows of `horizon` points, first-difference the window
/// means, and regress dy on dx.
inline TransmissionDiagnostic transmission_diagnostic(std::span<const double> x, std::span<const double> y,
                                                      std::size_t horizon) {
    if (x.size() != y.size()) throw DomainError("transmission_diagnostic: series on different grids");
    if (horizon == 0 || x.size() < 2 * horizon) throw DomainError("transmission_diagnostic: need at least two horizons");
    auto blocks = [&](std::span<const double> s) {
        const double m = mean(s);
        const double sd = population_std(s);
        if (!(sd > 0.0)) throw DomainError("transmission_diagnostic: zero variance series");
        std::vector<double> out;
        for (std::size_t b = 0; (b + 1) * horizon <= s.size(); ++b) {
            double acc = 0.0;
            for (std::size_t i = b * horizon; i < (b + 1) * horizon; ++i) acc += (s[i] - m) / sd;
            out.push_back(acc / static_cast<double>(horizon));
        }
        return out;
    };
    const auto bx = blocks(x);
    const auto by = blocks(y);
    TransmissionDiagnostic out;
    for (std::size_t i = 1; i < bx.size(); ++i) out.pairs.emplace_back(bx[i] - bx[i - 1], by[i] - by[i - 1]);
    out.fit = ols(out.pairs);
    return out;
}

}  // namespace hybridsim

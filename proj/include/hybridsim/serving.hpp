#pragma once

// Continuous-batching approximation: service windows on a fixed tick grid,
// minute-averaged concurrency, capped concurrency under per-template GPU
// budgets, and the resulting GPU use and power.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

enum class SpeedClass { F = 0, M = 1, S = 2 };

inline SpeedClass speed_class_from_string(const std::string& s) {
    if (s == "F") return SpeedClass::F;
    if (s == "M") return SpeedClass::M;
    if (s == "S") return SpeedClass::S;
    throw ConfigError("unknown speed class '" + s + "' (expected F, M or S)");
}

inline std::string to_string(SpeedClass c) { return c == SpeedClass::F ? "F" : c == SpeedClass::M ? "M" : "S"; }

/// One serving configuration of an LLM template at a given speed class.
struct LLMTemplate {
    std::string id;
    int gpus_per_instance = 1;
    int max_batch = 1;
    double tpot_s = 0.0;
    double rho_kw = 0.0;
    SpeedClass speed = SpeedClass::M;
};

inline void validate(const LLMTemplate& t) {
    const std::string name = "LLM template '" + t.id + "' (" + to_string(t.speed) + ")";
    if (t.gpus_per_instance < 1) throw ConfigError(name + ": g must be >= 1");
    if (t.max_batch < 1) throw ConfigError(name + ": B must be >= 1");
    if (!(t.tpot_s > 0.0)) throw ConfigError(name + ": tpot must be > 0");
    if (!(t.rho_kw > 0.0)) throw ConfigError(name + ": rho must be > 0");
}

/// The templates configured for `speed`, in order of first appearance of
/// each template id.
inline std::vector<LLMTemplate> templates_for(const std::vector<LLMTemplate>& all, SpeedClass speed) {
    std::vector<std::string> ids;
    for (const auto& t : all) {
        if (std::find(ids.begin(), ids.end(), t.id) == ids.end()) ids.push_back(t.id);
    }
    std::vector<LLMTemplate> out;
    for (const auto& id : ids) {
        auto it = std::find_if(all.begin(), all.end(), [&](const LLMTemplate& t) { return t.id == id && t.speed == speed; });
        if (it == all.end()) throw ConfigError("LLM template '" + id + "' has no configuration for speed class " + to_string(speed));
        out.push_back(*it);
    }
    return out;
}

// Tolerance for ceilings of quantities that are integral up to rounding
// (token * tpot / tick, concurrency / B).
inline constexpr double kCeilSlack = 1e-9;

inline double slack_ceil(double x) { return std::ceil(x - kCeilSlack); }

struct ServiceWindow {
    double start_s = 0.0;
    double duration_s = 0.0;
};

/// Service starts at the first tick at or after arrival and lasts
/// tokens * tpot rounded up to whole ticks.
inline ServiceWindow service_window(double arrival_s, int tokens, double tpot_s, double tick_s) {
    if (tokens < 1 || !(tpot_s > 0.0) || !(tick_s > 0.0)) {
        throw DomainError("service_window: need tokens >= 1, tpot > 0, tick > 0");
    }
    ServiceWindow w;
    w.start_s = slack_ceil(arrival_s / tick_s) * tick_s;
    w.duration_s = std::max(1.0, slack_ceil(tokens * tpot_s / tick_s)) * tick_s;
    return w;
}

/// Accumulates active request-seconds per minute; value() is the
/// minute-averaged concurrency.
class ConcurrencyAccumulator {
public:
    explicit ConcurrencyAccumulator(std::size_t minutes) : seconds_(minutes, 0.0) {}

    void add(double start_s, double end_s) {
        const double horizon = static_cast<double>(seconds_.size()) * kMinute;
        double t = std::max(0.0, start_s);
        end_s = std::min(end_s, horizon);
        while (t < end_s) {
            const auto m = static_cast<std::size_t>(t / kMinute);
            if (m >= seconds_.size()) break;
            const double next = std::min(end_s, static_cast<double>(m + 1) * kMinute);
            seconds_[m] += next - t;
            t = next;
        }
    }

    std::vector<double> values() const {
        std::vector<double> out(seconds_.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = seconds_[i] / kMinute;
        return out;
    }

private:
    std::vector<double> seconds_;
};

/// Minute-averaged concurrency from explicit windows.
inline std::vector<double> concurrency(const std::vector<ServiceWindow>& windows, std::size_t minutes) {
    ConcurrencyAccumulator acc(minutes);
    for (const auto& w : windows) acc.add(w.start_s, w.start_s + w.duration_s);
    return acc.values();
}

using Budget = std::optional<int>;  // nullopt = unbounded

struct BudgetAllocation {
    std::vector<Budget> budgets;
    std::vector<std::string> warnings;
};

/// Splits `total` GPUs across templates in proportion to offered GPU-hours.
/// Shares are floored to multiples of g; leftovers go in g-sized steps to
/// the largest fractional remainders (ties by template index).
inline BudgetAllocation allocate_budgets(Budget total, const std::vector<double>& offered_hours,
                                         const std::vector<int>& gpus_per_instance) {
    const auto n = offered_hours.size();
    if (gpus_per_instance.size() != n) throw DomainError("allocate_budgets: size mismatch");
    BudgetAllocation out;
    if (!total) {
        out.budgets.assign(n, std::nullopt);
        return out;
    }
    out.budgets.assign(n, 0);
    if (n == 0) return out;
    const int min_g = *std::min_element(gpus_per_instance.begin(), gpus_per_instance.end());
    if (*total < min_g) {
        out.warnings.push_back("inference budget " + std::to_string(*total) +
                               " is smaller than the smallest serving instance; all budgets are zero");
        return out;
    }
    const double hours = std::accumulate(offered_hours.begin(), offered_hours.end(), 0.0);
    if (!(hours > 0.0)) {
        if (*total > 0) throw DomainError("allocate_budgets: offered GPU-hours are all zero");
        return out;
    }
    std::vector<double> remainder(n);
    int assigned = 0;
    for (std::size_t m = 0; m < n; ++m) {
        const double ideal = *total * offered_hours[m] / hours;
        const int g = gpus_per_instance[m];
        const int base = static_cast<int>(std::floor(ideal / g + 1e-12)) * g;
        out.budgets[m] = base;
        remainder[m] = ideal - base;
        assigned += base;
    }
    int left = *total - assigned;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t m : order) {
        const int g = gpus_per_instance[m];
        if (offered_hours[m] > 0.0 && g <= left) {
            *out.budgets[m] += g;
            left -= g;
        }
    }
    return out;
}

/// min(C, B * G_max / g); an unbounded budget never binds.
inline double cap_concurrency(double conc, int max_batch, Budget budget, int gpus_per_instance) {
    if (!budget) return conc;
    return std::min(conc, static_cast<double>(max_batch) * *budget / gpus_per_instance);
}

/// sum_m g_m * ceil(C_cap_m / B_m)
inline int gpu_use(const std::vector<double>& capped, const std::vector<int>& max_batch,
                   const std::vector<int>& gpus_per_instance) {
    int total = 0;
    for (std::size_t m = 0; m < capped.size(); ++m) {
        total += gpus_per_instance[m] * static_cast<int>(slack_ceil(capped[m] / max_batch[m]));
    }
    return total;
}

/// sum_m rho_m * C_cap_m, kW.
inline double inference_power(const std::vector<double>& capped, const std::vector<double>& rho_kw) {
    double p = 0.0;
    for (std::size_t m = 0; m < capped.size(); ++m) p += rho_kw[m] * capped[m];
    return p;
}

struct ServingResult {
    // [template][minute]
    std::vector<std::vector<double>> conc;
    std::vector<std::vector<double>> conc_cap;
    std::vector<std::vector<int>> gpus;
    std::vector<std::vector<double>> power_kw;
    // [minute]
    std::vector<int> total_gpus;
    std::vector<double> total_power_kw;
    std::vector<double> unmet;
    std::vector<Budget> budgets;
};

/// Applies the serving model minute by minute to per-template concurrency.
inline ServingResult serve(const std::vector<std::vector<double>>& conc, const std::vector<LLMTemplate>& templates,
                           const std::vector<Budget>& budgets) {
    const std::size_t n = templates.size();
    if (conc.size() != n || budgets.size() != n) throw DomainError("serve: template count mismatch");
    const std::size_t minutes = n ? conc.front().size() : 0;
    ServingResult out;
    out.conc = conc;
    out.budgets = budgets;
    out.conc_cap.assign(n, std::vector<double>(minutes));
    out.gpus.assign(n, std::vector<int>(minutes));
    out.power_kw.assign(n, std::vector<double>(minutes));
    out.total_gpus.assign(minutes, 0);
    out.total_power_kw.assign(minutes, 0.0);
    out.unmet.assign(minutes, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        const auto& tpl = templates[m];
        for (std::size_t t = 0; t < minutes; ++t) {
            const double c = conc[m][t];
            const double cap = cap_concurrency(c, tpl.max_batch, budgets[m], tpl.gpus_per_instance);
            const int g = gpu_use({cap}, {tpl.max_batch}, {tpl.gpus_per_instance});
            const double p = inference_power({cap}, {tpl.rho_kw});
            out.conc_cap[m][t] = cap;
            out.gpus[m][t] = g;
            out.power_kw[m][t] = p;
            out.total_gpus[t] += g;
            out.total_power_kw[t] += p;
            out.unmet[t] += c - cap;
        }
    }
    return out;
}

}  // namespace hybridsim

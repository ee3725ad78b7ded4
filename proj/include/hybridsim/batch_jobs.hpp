#pragma once

// Factorized batch-job sampler (time limit, GPU count, runtime) and per-job
// per-minute power synthesis from hierarchical templates.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

inline constexpr int kQuantileGridSize = 99;  // probabilities 0.01 .. 0.99

/// Probability mass over a finite observed support with add-alpha smoothing.
template <typename Value>
struct SmoothedPmf {
    std::vector<Value> support;
    std::vector<double> prob;

    static SmoothedPmf from_counts(std::vector<Value> support, const std::vector<double>& counts, double add_alpha) {
        if (support.empty() || support.size() != counts.size()) {
            throw ConfigError("smoothed pmf: support and counts must be nonempty and the same length");
        }
        if (!(add_alpha >= 0.0)) throw ConfigError("smoothed pmf: add-alpha must be >= 0");
        double total = 0.0;
        for (double c : counts) {
            if (!(c >= 0.0)) throw ConfigError("smoothed pmf: negative count");
            total += c + add_alpha;
        }
        if (!(total > 0.0)) throw ConfigError("smoothed pmf: no mass");
        SmoothedPmf out{std::move(support), {}};
        for (double c : counts) out.prob.push_back((c + add_alpha) / total);
        return out;
    }

    Value sample(Rng& rng) const {
        std::discrete_distribution<std::size_t> d(prob.begin(), prob.end());
        return support[d(rng.engine())];
    }
};

struct QuantileCurve {
    std::array<double, kQuantileGridSize> log_runtime{};
    double support = 0.0;

    /// Linear interpolation in log-runtime between grid probabilities, flat
    /// beyond 1% / 99%.
    double log_quantile(double u) const {
        const double pos = u * 100.0 - 1.0;  // grid index of probability u
        if (pos <= 0.0) return log_runtime.front();
        if (pos >= kQuantileGridSize - 1) return log_runtime.back();
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return log_runtime[i] + frac * (log_runtime[i + 1] - log_runtime[i]);
    }
};

struct TimeLimitClass {
    SmoothedPmf<int> gpu;
};

/// P(tl | c) P(gpu | c, tl) P(log runtime | c, tl, gpu) for one group.
struct JobClassModel {
    std::string group;
    SmoothedPmf<Seconds> time_limit;
    std::map<Seconds, TimeLimitClass> per_time_limit;
    // Keys: (tl, gpu) leaves, (tl, 0) time-limit nodes, (0, 0) the group node.
    std::map<std::pair<Seconds, int>, QuantileCurve> quantiles;
    double quantile_gate = 0.0;  // minimum support to use a node directly

    const QuantileCurve& resolve_quantiles(Seconds tl, int gpu) const {
        for (auto key : {std::pair<Seconds, int>{tl, gpu}, {tl, 0}, {0, 0}}) {
            auto it = quantiles.find(key);
            if (it != quantiles.end() && it->second.support >= quantile_gate) return it->second;
        }
        throw ConfigError("job class '" + group + "': no runtime quantile curve resolvable for tl=" +
                          std::to_string(tl) + " gpu=" + std::to_string(gpu));
    }
};

struct SampledJob {
    Seconds time_limit = 0;
    int gpu = 0;
    Seconds runtime = 0;
};

inline Seconds runtime_from_log(double log_runtime, Seconds time_limit) {
    const double r = std::exp(log_runtime);
    const double clipped = std::min(r, static_cast<double>(time_limit));
    return std::max<Seconds>(1, static_cast<Seconds>(std::llround(clipped)));
}

inline SampledJob sample_job(const JobClassModel& model, Rng& rng) {
    SampledJob job;
    job.time_limit = model.time_limit.sample(rng);
    auto it = model.per_time_limit.find(job.time_limit);
    if (it == model.per_time_limit.end()) {
        throw ConfigError("job class '" + model.group + "': no GPU distribution for tl=" + std::to_string(job.time_limit));
    }
    job.gpu = it->second.gpu.sample(rng);
    const auto& curve = model.resolve_quantiles(job.time_limit, job.gpu);
    job.runtime = runtime_from_log(curve.log_quantile(rng.uniform()), job.time_limit);
    return job;
}

/// E[gpu * runtime] in GPU-seconds, integrating the truncated quantile
/// function with a fine midpoint rule.
inline double expected_job_work(const JobClassModel& model, int points = 4000) {
    double total = 0.0;
    for (std::size_t i = 0; i < model.time_limit.support.size(); ++i) {
        const Seconds tl = model.time_limit.support[i];
        const auto& gpus = model.per_time_limit.at(tl).gpu;
        for (std::size_t j = 0; j < gpus.support.size(); ++j) {
            const int gpu = gpus.support[j];
            const auto& curve = model.resolve_quantiles(tl, gpu);
            double mean_runtime = 0.0;
            for (int k = 0; k < points; ++k) {
                const double u = (k + 0.5) / points;
                mean_runtime += std::min(std::exp(curve.log_quantile(u)), static_cast<double>(tl));
            }
            mean_runtime /= points;
            total += model.time_limit.prob[i] * gpus.prob[j] * gpu * mean_runtime;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// Power templates

struct MinuteStats {
    double mean = 0.0;
    double std = 0.0;
    double p5 = 0.0;
    double p95 = 0.0;
};

/// Hierarchy node (c, tl, gpu, runtime-bin). Absent fields mark coarser levels.
struct TemplateKey {
    std::string group;
    std::optional<Seconds> time_limit{};
    std::optional<int> gpu{};
    std::optional<int> runtime_bin{};

    int level() const { return runtime_bin ? 3 : gpu ? 2 : time_limit ? 1 : 0; }

    std::string str() const {
        std::string s = group;
        s += "|" + (time_limit ? std::to_string(*time_limit) : std::string("*"));
        s += "|" + (gpu ? std::to_string(*gpu) : std::string("*"));
        s += "|" + (runtime_bin ? std::to_string(*runtime_bin) : std::string("*"));
        return s;
    }

    /// The backoff chain from this key to the group node, most specific first.
    std::vector<TemplateKey> chain() const {
        std::vector<TemplateKey> out;
        TemplateKey k = *this;
        out.push_back(k);
        while (k.level() > 0) {
            if (k.runtime_bin) k.runtime_bin.reset();
            else if (k.gpu) k.gpu.reset();
            else k.time_limit.reset();
            out.push_back(k);
        }
        return out;
    }
};

struct PowerTemplate {
    TemplateKey key;
    std::vector<MinuteStats> minutes;  // per-GPU kW
    double ar1_phi = 0.0;
    double support_count = 0.0;

    std::size_t length() const { return minutes.size(); }
};

/// Statistics for a job minute; minutes past the template's end hold the
/// final minute.
inline const MinuteStats& job_minutes_beyond_template(const PowerTemplate& tpl, std::size_t minute) {
    if (tpl.minutes.empty()) throw ConfigError("power template " + tpl.key.str() + " is empty");
    return tpl.minutes[std::min(minute, tpl.minutes.size() - 1)];
}

inline void validate(const PowerTemplate& tpl) {
    const std::string name = "power template " + tpl.key.str();
    if (tpl.minutes.empty()) throw ConfigError(name + ": no minutes");
    if (!(std::abs(tpl.ar1_phi) < 1.0)) throw ConfigError(name + ": |ar1_phi| must be < 1");
    for (std::size_t i = 0; i < tpl.minutes.size(); ++i) {
        const auto& m = tpl.minutes[i];
        if (m.std < 0.0 || m.p5 > m.mean + 1e-9 || m.mean > m.p95 + 1e-9) {
            throw ConfigError(name + ": minute " + std::to_string(i) + " violates p5 <= mean <= p95 or std >= 0");
        }
    }
}

struct PowerSynthesisConfig {
    double noise_factor = 1.0;
    double hw_factor = 1.0;
    double template_gate = 194.0;
};

/// Runtime-bin edges (seconds, ascending) per (c, tl, gpu) cell. A runtime
/// falls in bin = number of edges <= runtime.
struct RuntimeBins {
    std::map<std::string, std::vector<Seconds>> edges;

    static std::string cell(const std::string& group, Seconds tl, int gpu) {
        return group + "|" + std::to_string(tl) + "|" + std::to_string(gpu);
    }

    int bin(const std::string& group, Seconds tl, int gpu, Seconds runtime) const {
        auto it = edges.find(cell(group, tl, gpu));
        if (it == edges.end()) return 0;
        return static_cast<int>(std::upper_bound(it->second.begin(), it->second.end(), runtime) - it->second.begin());
    }
};

class TemplateStore {
public:
    void add(PowerTemplate tpl) {
        validate(tpl);
        auto k = tpl.key.str();
        templates_.insert_or_assign(std::move(k), std::move(tpl));
    }

    const PowerTemplate* find(const TemplateKey& key) const {
        auto it = templates_.find(key.str());
        return it == templates_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return templates_.size(); }

private:
    std::map<std::string, PowerTemplate> templates_;
};

struct TemplateSelection {
    const PowerTemplate* tpl = nullptr;
    int backoff_level = 0;  // hierarchy level that supplied the template (3 = leaf)
};

/// Most specific node on the backoff chain whose support meets the gate.
inline TemplateSelection select_template(const TemplateStore& store, const TemplateKey& key, double gate) {
    std::string inspected;
    for (const auto& k : key.chain()) {
        if (const auto* tpl = store.find(k)) {
            if (tpl->support_count >= gate) return {tpl, k.level()};
            inspected += " " + k.str() + "(n=" + std::to_string(static_cast<long long>(tpl->support_count)) + ")";
        } else {
            inspected += " " + k.str() + "(absent)";
        }
    }
    throw ConfigError("no power template meets the support gate " + std::to_string(gate) + "; inspected:" + inspected);
}

/// Unit-stationary-variance AR(1): e_0 ~ N(0,1), e_t = phi e_{t-1} + sqrt(1-phi^2) z_t.
inline std::vector<double> ar1_residuals(double phi, std::size_t n, Rng& rng) {
    std::vector<double> e(n);
    if (n == 0) return e;
    const double innov = std::sqrt(1.0 - phi * phi);
    e[0] = rng.normal();
    for (std::size_t t = 1; t < n; ++t) e[t] = phi * e[t - 1] + innov * rng.normal();
    return e;
}

/// Per-minute job power in kW, ceil(runtime / 60) entries.
inline std::vector<double> synthesize_job_power(const PowerTemplate& tpl, Seconds runtime, int gpu_count,
                                                const PowerSynthesisConfig& cfg, Rng& rng) {
    if (runtime <= 0 || gpu_count < 1) throw DomainError("synthesize_job_power: need runtime > 0 and gpu >= 1");
    const auto n = static_cast<std::size_t>((runtime + kMinute - 1) / kMinute);
    const auto eps = ar1_residuals(tpl.ar1_phi, n, rng);
    std::vector<double> out(n);
    const double scale = cfg.hw_factor * gpu_count;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& s = job_minutes_beyond_template(tpl, t);
        const double raw = s.mean + cfg.noise_factor * s.std * eps[t];
        out[t] = scale * std::clamp(raw, s.p5, s.p95);
    }
    return out;
}

}  // namespace hybridsim

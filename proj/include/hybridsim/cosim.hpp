#pragma once

// Shared-GPU co-simulation: inference is served first, batch jobs are
// scheduled on the residual capacity, and the two power streams are summed.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hybridsim/batch_arrivals.hpp"
#include "hybridsim/batch_jobs.hpp"
#include "hybridsim/calendar.hpp"
#include "hybridsim/core.hpp"
#include "hybridsim/inference_arrivals.hpp"
#include "hybridsim/metrics.hpp"
#include "hybridsim/scheduler.hpp"
#include "hybridsim/serving.hpp"

namespace hybridsim {

struct BatchGroupModel {
    DailyCountModel arrivals;
    IntradayProfile intraday;
    JobClassModel jobs;
};

/// Every calibrated input the simulator needs. Immutable once loaded.
struct ModelBundle {
    Calendar calendar;
    std::vector<BatchGroupModel> batch_groups;
    TimezonePlan timezones = TimezonePlan::single();
    TemplateStore power_templates;
    RuntimeBins runtime_bins;
    PowerSynthesisConfig power;
    std::vector<InferenceGroupModel> inference_groups;
    double kappa = 1.0;
    std::vector<LLMTemplate> llm_templates;  // every (template, speed class) entry
    double tick_s = 10.0;
};

struct Scenario {
    std::string id = "run";
    int total_gpus = 64;
    long horizon_days = 7;
    long warmup_days = 0;  // simulated before the reported window, then discarded
    double share = 0.5;
    double utilization = 0.8;
    Policy policy = Policy::FcfsBackfill;
    Seconds ckpt_s = kNoCheckpoint;
    std::optional<double> inference_cap_fraction;  // nullopt: inference may take the whole pool
    double verbosity = 1.0;
    SpeedClass speed = SpeedClass::M;
    std::optional<TimezonePlan> timezones;
    bool preempt_on_drop = true;
    std::uint64_t seed = 1;
};

inline void validate(const Scenario& s) {
    std::string errors;
    if (s.total_gpus < 1) errors += " total_gpus must be >= 1;";
    if (s.horizon_days < 0 || s.warmup_days < 0) errors += " horizon/warmup days must be >= 0;";
    if (!(s.share >= 0.0 && s.share <= 1.0)) errors += " share must lie in [0, 1];";
    if (!(s.utilization > 0.0)) errors += " utilization must be > 0;";
    if (s.ckpt_s <= 0) errors += " ckpt_s must be > 0;";
    if (!(s.verbosity > 0.0)) errors += " verbosity must be > 0;";
    if (s.inference_cap_fraction && !(*s.inference_cap_fraction >= 0.0 && *s.inference_cap_fraction <= 1.0)) {
        errors += " inference_cap_fraction must lie in [0, 1];";
    }
    if (!errors.empty()) throw ConfigError("scenario '" + s.id + "':" + errors);
}

struct HybridResult {
    std::size_t first_minute = 0;  // warm-up minutes dropped from the series below
    std::vector<double> p_total_kw;
    std::vector<double> p_batch_kw;
    std::vector<double> p_inf_kw;
    std::vector<int> g_inf;
    std::vector<double> g_batch;
    std::vector<double> unmet;
    std::vector<double> demand;  // uncapped inference concurrency, all templates
    ServingResult serving;       // full simulated span, per template
    std::vector<BatchJob> jobs;
    ScheduleTrace trace;
    std::vector<std::string> warnings;
    double w_inf_gpu_hours = 0.0;
    double w_batch_gpu_hours = 0.0;
    double share_realized = 0.0;
    double utilization_realized = 0.0;
    double batch_scale = 0.0;
    double inference_scale = 0.0;
};

/// Mean service duration (seconds) of a request drawn from `tokens` on a
/// template, after tick rounding.
inline double expected_service_seconds(const TokenDistribution& tokens, double tpot_s, double tick_s) {
    double e = 0.0;
    for (int y = 1; y <= tokens.support_max(); ++y) {
        const double p = tokens.prob(y);
        if (p > 0.0) e += p * service_window(0.0, y, tpot_s, tick_s).duration_s;
    }
    return e;
}

inline std::vector<InferenceGroupModel> with_verbosity(const std::vector<InferenceGroupModel>& groups, double s) {
    auto out = groups;
    for (auto& g : out) g.tokens = apply_verbosity(g.tokens, s);
    return out;
}

/// Offered inference GPU-hours over [0, minutes) at rate scale 1.
inline double expected_inference_work(const ModelBundle& b, const std::vector<InferenceGroupModel>& groups,
                                      const std::vector<LLMTemplate>& templates, long minutes) {
    const auto m_count = static_cast<double>(templates.size());
    std::vector<double> per_request(groups.size(), 0.0);  // GPU-seconds
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& tpl : templates) {
            per_request[g] += expected_service_seconds(groups[g].tokens, tpl.tpot_s, b.tick_s) *
                              tpl.gpus_per_instance / tpl.max_batch / m_count;
        }
    }
    double total = 0.0;
    for (long t = 0; t < minutes; ++t) {
        const bool weekend = b.calendar.is_weekend_minute(t);
        const int mod = static_cast<int>(t % kMinutesPerDay);
        for (std::size_t g = 0; g < groups.size(); ++g) total += minute_rate(groups[g].rates, mod, weekend) * per_request[g];
    }
    return total / kHour;
}

/// Offered batch GPU-hours over [0, days) at mean scale 1.
inline double expected_batch_work(const ModelBundle& b, long days) {
    double total = 0.0;
    for (const auto& g : b.batch_groups) total += expected_arrivals(g.arrivals, b.calendar, days) * expected_job_work(g.jobs);
    return total / kHour;
}

/// Batch jobs over [0, days), ids assigned in (arrival, group order).
inline std::vector<BatchJob> generate_batch_jobs(const ModelBundle& b, const TimezonePlan& plan, long days,
                                                 double scale, std::uint64_t seed) {
    std::vector<BatchJob> jobs;
    if (!(scale > 0.0)) return jobs;
    for (const auto& g : b.batch_groups) {
        Rng arrivals_rng(derive_seed(seed, {"batch-arrivals", g.arrivals.group}));
        Rng jobs_rng(derive_seed(seed, {"batch-jobs", g.arrivals.group}));
        for (Seconds t : superpose_timezones(plan, g.arrivals, g.intraday, b.calendar, days, arrivals_rng, scale)) {
            const auto s = sample_job(g.jobs, jobs_rng);
            jobs.push_back({0, t, s.gpu, s.runtime, s.time_limit, g.arrivals.group});
        }
    }
    std::stable_sort(jobs.begin(), jobs.end(), [](const BatchJob& a, const BatchJob& c) { return a.arrival < c.arrival; });
    for (std::size_t i = 0; i < jobs.size(); ++i) jobs[i].id = static_cast<std::int64_t>(i);
    return jobs;
}

/// Per-minute power of one job over its full runtime, from its own substream.
inline std::vector<double> job_power_trace(const ModelBundle& b, const BatchJob& job, std::uint64_t seed) {
    TemplateKey key{job.group, job.time_limit, job.gpu, b.runtime_bins.bin(job.group, job.time_limit, job.gpu, job.runtime)};
    const auto sel = select_template(b.power_templates, key, b.power.template_gate);
    Rng rng(derive_seed(seed, {"job-power", std::to_string(job.id)}));
    return synthesize_job_power(*sel.tpl, job.runtime, job.gpu, b.power, rng);
}

/// Minute-averaged batch power (kW) from executed segment runs; each job's
/// per-minute trace is synthesized once and indexed by job progress.
inline std::vector<double> batch_power_minutes(const ModelBundle& b, const std::vector<BatchJob>& jobs,
                                               const std::vector<SegmentRun>& runs, std::size_t minutes,
                                               std::uint64_t seed) {
    std::vector<double> power(minutes, 0.0);
    std::map<std::int64_t, std::vector<const SegmentRun*>> by_job;
    for (const auto& r : runs) by_job[r.job_id].push_back(&r);
    for (const auto& [id, job_runs] : by_job) {
        const auto trace = job_power_trace(b, jobs.at(static_cast<std::size_t>(id)), seed);
        for (const auto* r : job_runs) {
            Seconds tau = r->start;
            while (tau < r->end) {
                const Seconds jt = r->job_offset + (tau - r->start);
                const Seconds jm = jt / kMinute;
                const Seconds wm = tau / kMinute;
                if (wm >= static_cast<Seconds>(minutes)) break;
                const Seconds next = std::min({r->end, (wm + 1) * kMinute, tau + ((jm + 1) * kMinute - jt)});
                const auto idx = std::min<std::size_t>(static_cast<std::size_t>(jm), trace.size() - 1);
                power[static_cast<std::size_t>(wm)] += trace[idx] * static_cast<double>(next - tau) / kMinute;
                tau = next;
            }
        }
    }
    return power;
}

struct LoadScales {
    double batch = 0.0;
    double inference = 0.0;
};

/// Multipliers on the batch arrival means and inference minute rates such
/// that expected offered work over warm-up + horizon is
/// share * utilization * capacity for inference and (1 - share) * ... for batch.
inline LoadScales load_scales(const ModelBundle& b, const Scenario& s, const std::vector<InferenceGroupModel>& groups,
                              const std::vector<LLMTemplate>& templates) {
    LoadScales out;
    const long days = s.warmup_days + s.horizon_days;
    const double target = s.utilization * s.total_gpus * 24.0 * static_cast<double>(days);
    if (s.share > 0.0 && days > 0) {
        const double e = expected_inference_work(b, groups, templates, days * kMinutesPerDay);
        if (!(e > 0.0)) throw ConfigError("inference model offers no work at scale 1");
        out.inference = s.share * target / e;
    }
    if (s.share < 1.0 && days > 0) {
        const double e = expected_batch_work(b, days);
        if (!(e > 0.0)) throw ConfigError("batch model offers no work at scale 1");
        out.batch = (1.0 - s.share) * target / e;
    }
    return out;
}

template <typename T>
std::vector<T> tail(const std::vector<T>& v, std::size_t from) {
    return std::vector<T>(v.begin() + static_cast<std::ptrdiff_t>(std::min(from, v.size())), v.end());
}

inline HybridResult run_hybrid(const ModelBundle& b, const Scenario& s) {
    validate(s);
    HybridResult out;
    const long days = s.warmup_days + s.horizon_days;
    const long minutes = days * kMinutesPerDay;
    const auto n_minutes = static_cast<std::size_t>(minutes);
    out.first_minute = static_cast<std::size_t>(s.warmup_days * kMinutesPerDay);
    const Seconds report_start = s.warmup_days * kDay;
    const TimezonePlan& plan = s.timezones ? *s.timezones : b.timezones;

    const auto groups = with_verbosity(b.inference_groups, s.verbosity);
    const auto templates = templates_for(b.llm_templates, s.speed);
    const auto scales = load_scales(b, s, groups, templates);
    out.inference_scale = scales.inference;
    out.batch_scale = scales.batch;

    // 1. Inference demand and serving.
    const std::size_t n_tpl = templates.size();
    std::vector<ConcurrencyAccumulator> acc(n_tpl, ConcurrencyAccumulator(n_minutes));
    std::vector<double> offered_hours(n_tpl, 0.0);
    {
        Rng rng(derive_seed(s.seed, {"inference"}));
        generate_inference_requests(groups, b.kappa, static_cast<int>(n_tpl), b.calendar, 0, minutes, out.inference_scale,
                                    rng, [&](const InferenceRequest& r) {
                                        const auto& tpl = templates[static_cast<std::size_t>(r.template_index)];
                                        const auto w = service_window(r.arrival_s, r.tokens, tpl.tpot_s, b.tick_s);
                                        acc[static_cast<std::size_t>(r.template_index)].add(w.start_s, w.start_s + w.duration_s);
                                        const double gpu_h = w.duration_s * tpl.gpus_per_instance / tpl.max_batch / kHour;
                                        offered_hours[static_cast<std::size_t>(r.template_index)] += gpu_h;
                                        if (r.arrival_s >= static_cast<double>(report_start)) out.w_inf_gpu_hours += gpu_h;
                                    });
    }
    std::vector<std::vector<double>> conc;
    conc.reserve(n_tpl);
    for (const auto& a : acc) conc.push_back(a.values());
    const int inf_pool = s.inference_cap_fraction
                             ? static_cast<int>(std::floor(*s.inference_cap_fraction * s.total_gpus + 1e-9))
                             : s.total_gpus;
    std::vector<int> g_per(n_tpl);
    for (std::size_t m = 0; m < n_tpl; ++m) g_per[m] = templates[m].gpus_per_instance;
    std::vector<Budget> budgets(n_tpl, 0);
    if (std::any_of(offered_hours.begin(), offered_hours.end(), [](double h) { return h > 0.0; })) {
        auto alloc = allocate_budgets(inf_pool, offered_hours, g_per);
        budgets = alloc.budgets;
        out.warnings.insert(out.warnings.end(), alloc.warnings.begin(), alloc.warnings.end());
    }
    out.serving = serve(conc, templates, budgets);

    // 2. Residual capacity, observed by the batch scheduler minute by minute.
    std::vector<int> residual(n_minutes);
    for (std::size_t t = 0; t < n_minutes; ++t) residual[t] = std::max(0, s.total_gpus - out.serving.total_gpus[t]);
    const auto capacity = n_minutes ? CapacityTimeline::from_minutes(residual) : CapacityTimeline(s.total_gpus);

    // 3. Batch workload and scheduling.
    out.jobs = generate_batch_jobs(b, plan, days, out.batch_scale, s.seed);
    for (const auto& j : out.jobs) {
        if (j.arrival >= report_start) out.w_batch_gpu_hours += static_cast<double>(j.gpu) * j.runtime / kHour;
    }
    SchedulerOptions opt;
    opt.policy = s.policy;
    opt.ckpt = s.ckpt_s;
    opt.preempt_on_drop = s.preempt_on_drop;
    opt.horizon = minutes * kMinute;
    // Jobs larger than the pool are rejected up front; residual dips below a
    // job's size only delay it.
    std::vector<BatchJob> schedulable;
    for (const auto& j : out.jobs) {
        if (j.gpu > s.total_gpus) {
            out.trace.rejected.push_back({j.id, "gpu request " + std::to_string(j.gpu) + " exceeds total_gpus " +
                                                    std::to_string(s.total_gpus)});
        } else {
            schedulable.push_back(j);
        }
    }
    auto rejected = std::move(out.trace.rejected);
    out.trace = schedule(schedulable, capacity, opt);
    out.trace.rejected.insert(out.trace.rejected.begin(), rejected.begin(), rejected.end());

    // 4. Power.
    const auto p_batch = batch_power_minutes(b, out.jobs, out.trace.runs, n_minutes, s.seed);
    const auto busy = busy_gpu_minutes(out.trace.runs, n_minutes);
    std::vector<double> demand(n_minutes, 0.0);
    for (const auto& c : conc) {
        for (std::size_t t = 0; t < n_minutes; ++t) demand[t] += c[t];
    }

    // 5. Reported window.
    out.p_batch_kw = tail(p_batch, out.first_minute);
    out.p_inf_kw = tail(out.serving.total_power_kw, out.first_minute);
    out.g_inf = tail(out.serving.total_gpus, out.first_minute);
    out.g_batch = tail(busy, out.first_minute);
    out.unmet = tail(out.serving.unmet, out.first_minute);
    out.demand = tail(demand, out.first_minute);
    out.p_total_kw.resize(out.p_batch_kw.size());
    for (std::size_t t = 0; t < out.p_total_kw.size(); ++t) out.p_total_kw[t] = out.p_batch_kw[t] + out.p_inf_kw[t];

    const double offered = out.w_inf_gpu_hours + out.w_batch_gpu_hours;
    if (offered > 0.0) out.share_realized = inference_share(out.w_inf_gpu_hours, out.w_batch_gpu_hours);
    if (s.horizon_days > 0) {
        out.utilization_realized = utilization(offered, s.total_gpus, 24.0 * static_cast<double>(s.horizon_days));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct MetricsOptions {
    std::vector<std::size_t> ramp_horizons{1, 5, 15};
    bool daily_median_ramp = false;
};

struct RunMetrics {
    double cov = 0.0;
    std::vector<double> ramp_medians;  // per MetricsOptions::ramp_horizons
    double unmet_frac = 0.0;
    // Component ramps at the last horizon, normalized by mean total power.
    double batch_ramp_med = 0.0;
    double inf_ramp_med = 0.0;
};

inline RunMetrics compute_metrics(const std::vector<double>& total, const std::vector<double>& batch,
                                  const std::vector<double>& inf, double unmet_sum, double demand_sum,
                                  const MetricsOptions& opt) {
    RunMetrics m;
    m.cov = cov(total);
    const double norm = mean(total);
    for (auto dt : opt.ramp_horizons) {
        const auto r = ramp_rate(total, dt, norm);
        m.ramp_medians.push_back(opt.daily_median_ramp ? daily_median_ramp(r) : r.median);
    }
    if (!opt.ramp_horizons.empty() && !batch.empty()) {
        const auto dt = opt.ramp_horizons.back();
        const auto rb = ramp_rate(batch, dt, norm);
        const auto ri = ramp_rate(inf, dt, norm);
        m.batch_ramp_med = opt.daily_median_ramp ? daily_median_ramp(rb) : rb.median;
        m.inf_ramp_med = opt.daily_median_ramp ? daily_median_ramp(ri) : ri.median;
    }
    m.unmet_frac = demand_sum > 0.0 ? unmet_sum / demand_sum : 0.0;
    return m;
}

inline RunMetrics compute_metrics(const HybridResult& r, const MetricsOptions& opt) {
    double unmet = 0.0, demand = 0.0;
    for (double u : r.unmet) unmet += u;
    for (double d : r.demand) demand += d;
    return compute_metrics(r.p_total_kw, r.p_batch_kw, r.p_inf_kw, unmet, demand, opt);
}

struct SweepRow {
    Scenario scenario;
    double share_realized = 0.0;
    double utilization_realized = 0.0;
    RunMetrics metrics;
    std::string error;  // empty on success
};

/// Runs every scenario (optionally on `parallel` worker threads) and returns
/// rows in input order. `on_result` is called from the worker that finished
/// the run; it must only touch run-specific outputs.
inline std::vector<SweepRow> sweep(const ModelBundle& b, const std::vector<Scenario>& scenarios,
                                   const MetricsOptions& opt, unsigned parallel = 1,
                                   const std::function<void(std::size_t, const HybridResult&)>& on_result = {}) {
    std::vector<SweepRow> rows(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < scenarios.size(); i = next++) {
            auto& row = rows[i];
            row.scenario = scenarios[i];
            try {
                const auto r = run_hybrid(b, scenarios[i]);
                row.share_realized = r.share_realized;
                row.utilization_realized = r.utilization_realized;
                row.metrics = compute_metrics(r, opt);
                if (on_result) on_result(i, r);
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(parallel, static_cast<unsigned>(scenarios.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

}  // namespace hybridsim

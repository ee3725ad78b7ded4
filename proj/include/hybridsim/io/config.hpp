#pragma once

// JSON configuration documents: model bundle, scenario, sweep. Loading
// collects every violation before failing.

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybridsim/cosim.hpp"

namespace hybridsim::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr int kConversationSupport = 1200;
inline constexpr int kCodeSupport = 5000;

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

/// Stable 64-bit hash of a document's canonical dump (keys sorted).
inline std::uint64_t config_hash(const json& doc) { return detail::fnv1a(detail::kFnvOffset, doc.dump()); }

/// Typed field access that records problems instead of throwing, so one
/// pass reports every violation.
class Reader {
public:
    void fail(const std::string& path, const std::string& msg) { errors_.push_back(path + ": " + msg); }

    const json* field(const json& obj, const std::string& key, const std::string& path, bool required = true) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return nullptr;
        }
        auto it = obj.find(key);
        if (it == obj.end() || it->is_null()) {
            if (required) fail(path + "." + key, "missing");
            return nullptr;
        }
        return &*it;
    }

    double number(const json& obj, const std::string& key, const std::string& path, std::optional<double> fallback = {}) {
        const json* v = field(obj, key, path, !fallback.has_value());
        if (!v) return fallback.value_or(0.0);
        if (!v->is_number()) {
            fail(path + "." + key, "expected a number");
            return fallback.value_or(0.0);
        }
        return v->get<double>();
    }

    long integer(const json& obj, const std::string& key, const std::string& path, std::optional<long> fallback = {}) {
        const json* v = field(obj, key, path, !fallback.has_value());
        if (!v) return fallback.value_or(0);
        if (!v->is_number_integer()) {
            fail(path + "." + key, "expected an integer");
            return fallback.value_or(0);
        }
        return v->get<long>();
    }

    std::string string(const json& obj, const std::string& key, const std::string& path,
                       std::optional<std::string> fallback = {}) {
        const json* v = field(obj, key, path, !fallback.has_value());
        if (!v) return fallback.value_or("");
        if (!v->is_string()) {
            fail(path + "." + key, "expected a string");
            return fallback.value_or("");
        }
        return v->get<std::string>();
    }

    std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path,
                                std::optional<std::size_t> expected_size = {}, bool required = true) {
        std::vector<double> out;
        const json* v = field(obj, key, path, required);
        if (!v) return out;
        if (!v->is_array()) {
            fail(path + "." + key, "expected an array");
            return out;
        }
        for (const auto& x : *v) {
            if (!x.is_number()) {
                fail(path + "." + key, "expected only numbers");
                return {};
            }
            out.push_back(x.get<double>());
        }
        if (expected_size && out.size() != *expected_size) {
            fail(path + "." + key, "expected " + std::to_string(*expected_size) + " entries, got " + std::to_string(out.size()));
        }
        return out;
    }

    const json& array(const json& obj, const std::string& key, const std::string& path) {
        static const json empty = json::array();
        const json* v = field(obj, key, path);
        if (!v) return empty;
        if (!v->is_array()) {
            fail(path + "." + key, "expected an array");
            return empty;
        }
        return *v;
    }

    void check(bool ok, const std::string& path, const std::string& msg) {
        if (!ok) fail(path, msg);
    }

    void throw_if_errors(const std::string& what) const {
        if (errors_.empty()) return;
        std::ostringstream os;
        os << what << ": " << errors_.size() << " problem(s)";
        for (const auto& e : errors_) os << "\n  - " << e;
        throw ConfigError(os.str());
    }

    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

inline void check_schema(Reader& r, const json& doc, const std::string& what) {
    const long v = r.integer(doc, "schema_version", what);
    r.check(v == kSchemaVersion, what + ".schema_version",
            "unsupported version " + std::to_string(v) + " (expected " + std::to_string(kSchemaVersion) + ")");
}

inline TimezonePlan read_timezones(Reader& r, const json& j, const std::string& path) {
    TimezonePlan plan;
    for (double o : r.numbers(j, "offsets_s", path)) plan.offsets.push_back(static_cast<Seconds>(o));
    plan.shares = r.numbers(j, "shares", path, plan.offsets.size(), false);
    if (plan.shares.empty() && !plan.offsets.empty()) plan = TimezonePlan::equal(plan.offsets);
    try {
        validate(plan);
    } catch (const ConfigError& e) {
        r.fail(path, e.what());
    }
    return plan;
}

template <std::size_t N>
std::array<double, N> to_array(const std::vector<double>& v) {
    std::array<double, N> a{};
    for (std::size_t i = 0; i < std::min(N, v.size()); ++i) a[i] = v[i];
    return a;
}

inline BatchGroupModel read_batch_group(Reader& r, const json& g, const std::string& path) {
    BatchGroupModel m;
    const auto name = r.string(g, "group", path);
    m.arrivals.group = name;
    m.jobs.group = name;

    if (const json* a = r.field(g, "arrivals", path)) {
        const auto p = path + ".arrivals";
        m.arrivals.weekday_effect = r.number(*a, "weekday_effect", p);
        m.arrivals.weekend_effect = r.number(*a, "weekend_effect", p);
        m.arrivals.week_of_month_effects = r.numbers(*a, "week_of_month_effects", p);
        m.arrivals.dispersion = r.number(*a, "dispersion", p);
        r.check(m.arrivals.dispersion >= 0.0, p + ".dispersion", "must be >= 0");
        r.check(!m.arrivals.week_of_month_effects.empty(), p + ".week_of_month_effects", "needs at least one level");
        for (double e : m.arrivals.week_of_month_effects) {
            r.check(std::isfinite(std::exp(m.arrivals.weekday_effect + e)) && std::isfinite(std::exp(m.arrivals.weekend_effect + e)),
                    p, "effects overflow the log link");
        }
    }
    if (const json* a = r.field(g, "intraday", path)) {
        const auto p = path + ".intraday";
        m.intraday.alr_mean = to_array<kHoursPerDay - 1>(r.numbers(*a, "alr_mean", p, kHoursPerDay - 1));
        m.intraday.alr_var = to_array<kHoursPerDay - 1>(r.numbers(*a, "alr_var", p, kHoursPerDay - 1));
        m.intraday.reference_hour = static_cast<int>(r.integer(*a, "reference_hour", p));
        m.intraday.shrinkage = r.number(*a, "shrinkage", p, 0.0);
        r.check(m.intraday.reference_hour >= 0 && m.intraday.reference_hour < kHoursPerDay, p + ".reference_hour", "must lie in [0, 24)");
        for (double v : m.intraday.alr_var) r.check(v >= 0.0, p + ".alr_var", "variances must be >= 0");
    }
    if (const json* jm = r.field(g, "jobs", path)) {
        const auto p = path + ".jobs";
        const double add_alpha = r.number(*jm, "add_alpha", p, 1.0);
        m.jobs.quantile_gate = r.number(*jm, "quantile_gate", p, 0.0);
        std::vector<Seconds> tls;
        std::vector<double> tl_counts;
        const auto& tl_list = r.array(*jm, "time_limits", p);
        for (std::size_t i = 0; i < tl_list.size(); ++i) {
            const auto ip = p + ".time_limits[" + std::to_string(i) + "]";
            const auto tl = static_cast<Seconds>(r.integer(tl_list[i], "tl_s", ip));
            r.check(tl > 0, ip + ".tl_s", "must be > 0");
            tls.push_back(tl);
            tl_counts.push_back(r.number(tl_list[i], "count", ip));
            std::vector<int> gpus;
            std::vector<double> gpu_counts;
            const auto& gl = r.array(tl_list[i], "gpus", ip);
            for (std::size_t k = 0; k < gl.size(); ++k) {
                const auto kp = ip + ".gpus[" + std::to_string(k) + "]";
                gpus.push_back(static_cast<int>(r.integer(gl[k], "gpu", kp)));
                r.check(gpus.back() >= 1, kp + ".gpu", "must be >= 1");
                gpu_counts.push_back(r.number(gl[k], "count", kp));
            }
            try {
                m.jobs.per_time_limit[tl].gpu = SmoothedPmf<int>::from_counts(gpus, gpu_counts, add_alpha);
            } catch (const ConfigError& e) {
                r.fail(ip, e.what());
            }
        }
        try {
            m.jobs.time_limit = SmoothedPmf<Seconds>::from_counts(tls, tl_counts, add_alpha);
        } catch (const ConfigError& e) {
            r.fail(p + ".time_limits", e.what());
        }
        const auto& ql = r.array(*jm, "quantiles", p);
        for (std::size_t i = 0; i < ql.size(); ++i) {
            const auto ip = p + ".quantiles[" + std::to_string(i) + "]";
            const Seconds tl = static_cast<Seconds>(r.integer(ql[i], "tl_s", ip, 0));
            const int gpu = static_cast<int>(r.integer(ql[i], "gpu", ip, 0));
            QuantileCurve c;
            c.support = r.number(ql[i], "support", ip);
            const auto q = r.numbers(ql[i], "log_runtime", ip, kQuantileGridSize);
            c.log_runtime = to_array<kQuantileGridSize>(q);
            for (std::size_t k = 1; k < q.size(); ++k) r.check(q[k] >= q[k - 1], ip + ".log_runtime", "must be nondecreasing");
            r.check(gpu == 0 || tl != 0, ip, "a gpu-level curve needs tl_s");
            m.jobs.quantiles[{tl, gpu}] = c;
        }
        if (r.errors().empty()) {
            for (Seconds tl : tls) {
                for (int gpu : m.jobs.per_time_limit[tl].gpu.support) {
                    try {
                        (void)m.jobs.resolve_quantiles(tl, gpu);
                    } catch (const ConfigError& e) {
                        r.fail(p, e.what());
                    }
                }
            }
        }
    }
    return m;
}

inline std::vector<double> sparse_histogram(Reader& r, const json& j, const std::string& key, const std::string& path,
                                            int support) {
    std::vector<double> h(static_cast<std::size_t>(support), 0.0);
    const auto& list = r.array(j, key, path);
    for (const auto& e : list) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number()) {
            r.fail(path + "." + key, "entries must be [token_count, frequency]");
            continue;
        }
        const long y = e[0].get<long>();
        if (y < 1 || y > support) {
            r.fail(path + "." + key, "token count " + std::to_string(y) + " outside 1.." + std::to_string(support));
            continue;
        }
        const double c = e[1].get<double>();
        if (!(c >= 0.0)) r.fail(path + "." + key, "negative frequency");
        h[static_cast<std::size_t>(y - 1)] += c;
    }
    return h;
}

inline void read_inference(Reader& r, const json& inf, ModelBundle& b) {
    const std::string path = "inference";
    b.kappa = r.number(inf, "kappa", path, 1.0);
    r.check(b.kappa > 0.0, path + ".kappa", "must be > 0");
    b.tick_s = r.number(inf, "tick_s", path, 10.0);
    r.check(b.tick_s > 0.0, path + ".tick_s", "must be > 0");

    int bandwidth = 0;
    double tau = 0.0;
    if (const json* ts = r.field(inf, "token_smoothing", path, false)) {
        bandwidth = static_cast<int>(r.integer(*ts, "bandwidth", path + ".token_smoothing", 0));
        tau = r.number(*ts, "tau", path + ".token_smoothing", 0.0);
        r.check(bandwidth >= 0, path + ".token_smoothing.bandwidth", "must be >= 0");
        r.check(tau >= 0.0, path + ".token_smoothing.tau", "must be >= 0");
    }

    struct Pending {
        std::string family;
        std::vector<double> histogram;
        std::optional<TokenDistribution> fitted;
    };
    std::vector<Pending> pending;
    std::vector<double> pooled_conversation(kConversationSupport, 0.0);
    const auto& groups = r.array(inf, "groups", path);
    std::set<std::string> names;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto gp = path + ".groups[" + std::to_string(i) + "]";
        const auto& g = groups[i];
        InferenceGroupModel m;
        m.rates.group = r.string(g, "group", gp);
        r.check(names.insert(m.rates.group).second, gp + ".group", "duplicate group '" + m.rates.group + "'");
        m.rates.dispersion = r.number(g, "dispersion", gp);
        r.check(m.rates.dispersion >= 0.0, gp + ".dispersion", "must be >= 0");
        if (const json* lr = r.field(g, "log_rate", gp)) {
            const auto wd = r.numbers(*lr, "weekday", gp + ".log_rate", kSlotsPerDay);
            const auto we = r.numbers(*lr, "weekend", gp + ".log_rate", kSlotsPerDay);
            for (std::size_t k = 0; k < kSlotsPerDay && k < wd.size() && k < we.size(); ++k) {
                r.check(std::isfinite(wd[k]) && std::isfinite(we[k]), gp + ".log_rate", "entries must be finite");
                m.rates.log_rate[k] = {wd[k], we[k]};
            }
        }
        Pending p;
        p.family = r.string(g, "family", gp);
        r.check(p.family == "code" || p.family == "conversation", gp + ".family", "must be 'code' or 'conversation'");
        const int support = p.family == "code" ? kCodeSupport : kConversationSupport;
        if (const json* tok = r.field(g, "tokens", gp)) {
            const auto tp = gp + ".tokens";
            if (tok->contains("pmf")) {
                auto pmf = r.numbers(*tok, "pmf", tp, static_cast<std::size_t>(support));
                try {
                    if (pmf.size() == static_cast<std::size_t>(support)) p.fitted = TokenDistribution(std::move(pmf));
                } catch (const ConfigError& e) {
                    r.fail(tp + ".pmf", e.what());
                }
            } else {
                p.histogram = sparse_histogram(r, *tok, "histogram", tp, support);
                if (p.family == "conversation") {
                    for (std::size_t k = 0; k < p.histogram.size(); ++k) pooled_conversation[k] += p.histogram[k];
                }
            }
        }
        b.inference_groups.push_back(std::move(m));
        pending.push_back(std::move(p));
    }
    // Fitting needs clean inputs; with earlier problems, skip it and keep
    // collecting the remaining ones.
    const bool clean = r.errors().empty();
    std::optional<std::vector<double>> pooled_smoothed;
    for (std::size_t i = 0; clean && i < pending.size(); ++i) {
        auto& p = pending[i];
        const auto gp = path + ".groups[" + std::to_string(i) + "].tokens";
        try {
            if (p.fitted) {
                b.inference_groups[i].tokens = *p.fitted;
            } else if (p.family == "code") {
                b.inference_groups[i].tokens = TokenDistribution(smooth_histogram(p.histogram, bandwidth));
            } else {
                if (!pooled_smoothed) pooled_smoothed = smooth_histogram(pooled_conversation, bandwidth);
                b.inference_groups[i].tokens = fit_group_pmf(p.histogram, *pooled_smoothed, tau);
            }
        } catch (const std::exception& e) {
            r.fail(gp, e.what());
        }
    }

    const auto& tl = r.array(inf, "llm_templates", path);
    for (std::size_t i = 0; i < tl.size(); ++i) {
        const auto tp = path + ".llm_templates[" + std::to_string(i) + "]";
        LLMTemplate t;
        t.id = r.string(tl[i], "template_id", tp);
        t.gpus_per_instance = static_cast<int>(r.integer(tl[i], "g", tp));
        t.max_batch = static_cast<int>(r.integer(tl[i], "B", tp));
        t.tpot_s = r.number(tl[i], "tpot_s", tp);
        t.rho_kw = r.number(tl[i], "rho_kw", tp);
        try {
            t.speed = speed_class_from_string(r.string(tl[i], "speed_class", tp));
            validate(t);
        } catch (const ConfigError& e) {
            r.fail(tp, e.what());
        }
        b.llm_templates.push_back(t);
    }
    r.check(!b.llm_templates.empty(), path + ".llm_templates", "needs at least one template");
    std::set<std::pair<std::string, int>> seen;
    for (const auto& t : b.llm_templates) {
        r.check(seen.insert({t.id, static_cast<int>(t.speed)}).second, path + ".llm_templates",
                "duplicate entry for '" + t.id + "' speed class " + to_string(t.speed));
    }
}

inline void read_power(Reader& r, const json& pw, ModelBundle& b) {
    const std::string path = "power";
    b.power.noise_factor = r.number(pw, "noise_factor", path, 1.0);
    b.power.hw_factor = r.number(pw, "hw_factor", path, 1.0);
    b.power.template_gate = r.number(pw, "template_gate", path, 194.0);
    r.check(b.power.noise_factor >= 0.0, path + ".noise_factor", "must be >= 0");
    r.check(b.power.hw_factor > 0.0, path + ".hw_factor", "must be > 0");
    r.check(b.power.template_gate >= 1.0, path + ".template_gate", "must be >= 1");
    if (const json* bins = r.field(pw, "runtime_bins", path, false)) {
        for (std::size_t i = 0; i < bins->size(); ++i) {
            const auto bp = path + ".runtime_bins[" + std::to_string(i) + "]";
            const auto& e = (*bins)[i];
            std::vector<Seconds> edges;
            for (double x : r.numbers(e, "edges_s", bp)) edges.push_back(static_cast<Seconds>(x));
            r.check(std::is_sorted(edges.begin(), edges.end()), bp + ".edges_s", "must be ascending");
            b.runtime_bins.edges[RuntimeBins::cell(r.string(e, "group", bp), r.integer(e, "tl_s", bp),
                                                   static_cast<int>(r.integer(e, "gpu", bp)))] = edges;
        }
    }
    const auto& list = r.array(pw, "templates", path);
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto tp = path + ".templates[" + std::to_string(i) + "]";
        const auto& e = list[i];
        PowerTemplate t;
        t.key.group = r.string(e, "group", tp);
        if (e.contains("tl_s")) t.key.time_limit = r.integer(e, "tl_s", tp);
        if (e.contains("gpu")) t.key.gpu = static_cast<int>(r.integer(e, "gpu", tp));
        if (e.contains("runtime_bin")) t.key.runtime_bin = static_cast<int>(r.integer(e, "runtime_bin", tp));
        r.check(!(t.key.runtime_bin && !t.key.gpu) && !(t.key.gpu && !t.key.time_limit), tp,
                "hierarchy keys must be nested (group > tl_s > gpu > runtime_bin)");
        t.support_count = r.number(e, "support_count", tp);
        t.ar1_phi = r.number(e, "ar1_phi", tp);
        const auto mean = r.numbers(e, "mean", tp);
        const auto sd = r.numbers(e, "std", tp, mean.size());
        const auto p5 = r.numbers(e, "p5", tp, mean.size());
        const auto p95 = r.numbers(e, "p95", tp, mean.size());
        if (sd.size() == mean.size() && p5.size() == mean.size() && p95.size() == mean.size()) {
            for (std::size_t k = 0; k < mean.size(); ++k) t.minutes.push_back({mean[k], sd[k], p5[k], p95[k]});
        }
        try {
            b.power_templates.add(std::move(t));
        } catch (const ConfigError& ex) {
            r.fail(tp, ex.what());
        }
    }
}

/// Loads and validates a complete model bundle document.
inline ModelBundle load_bundle(const json& doc) {
    Reader r;
    ModelBundle b;
    check_schema(r, doc, "config");
    if (const json* cal = r.field(doc, "calendar", "config", false)) {
        try {
            b.calendar = Calendar::from_iso(r.string(*cal, "epoch", "config.calendar", "2024-01-01"));
        } catch (const ConfigError& e) {
            r.fail("config.calendar.epoch", e.what());
        }
    }
    if (const json* batch = r.field(doc, "batch", "config")) {
        const auto& groups = r.array(*batch, "groups", "batch");
        std::set<std::string> names;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto gp = "batch.groups[" + std::to_string(i) + "]";
            b.batch_groups.push_back(read_batch_group(r, groups[i], gp));
            r.check(names.insert(b.batch_groups.back().arrivals.group).second, gp + ".group", "duplicate group");
        }
        if (const json* tz = r.field(*batch, "timezones", "batch", false)) b.timezones = read_timezones(r, *tz, "batch.timezones");
    }
    if (const json* pw = r.field(doc, "power", "config")) read_power(r, *pw, b);
    if (const json* inf = r.field(doc, "inference", "config")) read_inference(r, *inf, b);
    // Every job class must reach a group-level power template.
    for (const auto& g : b.batch_groups) {
        r.check(b.power_templates.find(TemplateKey{g.arrivals.group, {}, {}, {}}) != nullptr, "power.templates",
                "no group-level template for batch group '" + g.arrivals.group + "'");
    }
    r.throw_if_errors("configuration");
    return b;
}

inline Scenario read_scenario(Reader& r, const json& j, const std::string& path, Scenario s = {}) {
    s.id = r.string(j, "id", path, s.id);
    s.total_gpus = static_cast<int>(r.integer(j, "total_gpus", path, s.total_gpus));
    s.horizon_days = r.integer(j, "horizon_days", path, s.horizon_days);
    s.warmup_days = r.integer(j, "warmup_days", path, s.warmup_days);
    s.share = r.number(j, "share", path, s.share);
    s.utilization = r.number(j, "utilization", path, s.utilization);
    try {
        s.policy = policy_from_string(r.string(j, "policy", path, to_string(s.policy)));
        s.speed = speed_class_from_string(r.string(j, "speed_class", path, to_string(s.speed)));
    } catch (const ConfigError& e) {
        r.fail(path, e.what());
    }
    if (j.contains("ckpt_s")) s.ckpt_s = j["ckpt_s"].is_null() ? kNoCheckpoint : static_cast<Seconds>(r.integer(j, "ckpt_s", path));
    if (j.contains("inference_cap_fraction")) {
        if (j["inference_cap_fraction"].is_null()) s.inference_cap_fraction.reset();
        else s.inference_cap_fraction = r.number(j, "inference_cap_fraction", path);
    }
    s.verbosity = r.number(j, "verbosity", path, s.verbosity);
    if (j.contains("preempt_on_drop")) {
        if (j["preempt_on_drop"].is_boolean()) s.preempt_on_drop = j["preempt_on_drop"].get<bool>();
        else r.fail(path + ".preempt_on_drop", "expected a boolean");
    }
    if (j.contains("seed")) {
        if (j["seed"].is_number_unsigned() || j["seed"].is_number_integer()) s.seed = j["seed"].get<std::uint64_t>();
        else r.fail(path + ".seed", "expected a nonnegative integer");
    }
    if (const json* tz = r.field(j, "timezones", path, false)) s.timezones = read_timezones(r, *tz, path + ".timezones");
    try {
        validate(s);
    } catch (const ConfigError& e) {
        r.fail(path, e.what());
    }
    return s;
}

inline Scenario load_scenario(const json& doc) {
    Reader r;
    check_schema(r, doc, "scenario");
    auto s = read_scenario(r, doc, "scenario");
    r.throw_if_errors("scenario");
    return s;
}

struct SweepDoc {
    std::vector<Scenario> scenarios;
    std::vector<std::size_t> ramp_horizons{1, 5, 15};
};

/// Either an explicit "scenarios" list, or "base" + "grid" expanded as the
/// cartesian product in the order utilization, share, policy, ckpt_s, seed.
inline SweepDoc load_sweep(const json& doc) {
    Reader r;
    SweepDoc out;
    check_schema(r, doc, "sweep");
    if (doc.contains("ramp_horizons")) {
        out.ramp_horizons.clear();
        for (double h : r.numbers(doc, "ramp_horizons", "sweep")) out.ramp_horizons.push_back(static_cast<std::size_t>(h));
    }
    Scenario base;
    if (const json* bj = r.field(doc, "base", "sweep", false)) base = read_scenario(r, *bj, "sweep.base");
    if (doc.contains("scenarios")) {
        const auto& list = r.array(doc, "scenarios", "sweep");
        for (std::size_t i = 0; i < list.size(); ++i) {
            out.scenarios.push_back(read_scenario(r, list[i], "sweep.scenarios[" + std::to_string(i) + "]", base));
        }
    } else if (const json* grid = r.field(doc, "grid", "sweep")) {
        auto axis = [&](const char* key, json fallback) {
            if (!grid->contains(key)) return json::array({fallback});
            const auto& a = (*grid)[key];
            if (!a.is_array() || a.empty()) {
                r.fail(std::string("sweep.grid.") + key, "expected a nonempty array");
                return json::array({fallback});
            }
            return a;
        };
        const json utils = axis("utilization", base.utilization);
        const json shares = axis("share", base.share);
        const json policies = axis("policy", to_string(base.policy));
        const json ckpts = axis("ckpt_s", base.ckpt_s == kNoCheckpoint ? json(nullptr) : json(base.ckpt_s));
        const json seeds = axis("seed", base.seed);
        std::size_t index = 0;
        for (const auto& u : utils) {
            for (const auto& sh : shares) {
                for (const auto& pol : policies) {
                    for (const auto& ck : ckpts) {
                        for (const auto& sd : seeds) {
                            json cell = {{"utilization", u}, {"share", sh}, {"policy", pol}, {"ckpt_s", ck}, {"seed", sd}};
                            char id[32];
                            std::snprintf(id, sizeof id, "s%03zu", index++);
                            cell["id"] = id;
                            out.scenarios.push_back(read_scenario(r, cell, std::string("sweep.grid[") + id + "]", base));
                        }
                    }
                }
            }
        }
    }
    r.check(!out.scenarios.empty(), "sweep", "no scenarios");
    std::set<std::string> ids;
    for (const auto& s : out.scenarios) r.check(ids.insert(s.id).second, "sweep", "duplicate scenario id '" + s.id + "'");
    r.throw_if_errors("sweep");
    return out;
}

inline json scenario_to_json(const Scenario& s) {
    json j = {{"id", s.id},
              {"total_gpus", s.total_gpus},
              {"horizon_days", s.horizon_days},
              {"warmup_days", s.warmup_days},
              {"share", s.share},
              {"utilization", s.utilization},
              {"policy", to_string(s.policy)},
              {"ckpt_s", s.ckpt_s == kNoCheckpoint ? json(nullptr) : json(s.ckpt_s)},
              {"inference_cap_fraction", s.inference_cap_fraction ? json(*s.inference_cap_fraction) : json(nullptr)},
              {"verbosity", s.verbosity},
              {"speed_class", to_string(s.speed)},
              {"preempt_on_drop", s.preempt_on_drop},
              {"seed", s.seed}};
    if (s.timezones) j["timezones"] = {{"offsets_s", s.timezones->offsets}, {"shares", s.timezones->shares}};
    return j;
}

}  // namespace hybridsim::io

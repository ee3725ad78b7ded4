#pragma once

// Subcommand implementations behind the `hybridsim` executable. Each command
// validates every input before writing anything, builds all outputs in
// memory, then writes them together with a manifest.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridsim/cosim.hpp"
#include "hybridsim/io/config.hpp"
#include "hybridsim/io/csv.hpp"

namespace hybridsim::cli {

inline constexpr const char* kToolVersion = "hybridsim 0.1.0";
inline constexpr const char* kUtilizationDefinition = "offered_gpu_hours / (total_gpus * horizon_hours), v1";
inline constexpr const char* kOutEnv = "HYBRIDSIM_OUT";

enum ExitCode { kOk = 0, kConfigError = 1, kPartialSweep = 2 };

struct Options {
    std::string config;
    std::string scenario;  // scenario doc, or sweep doc for `sweep`
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned parallel = 1;
    std::optional<std::string> policy;
    std::optional<Seconds> ckpt_s;
    std::optional<double> share;
    std::optional<double> utilization;
    std::optional<std::string> speed_class;
    std::optional<double> verbosity;
    std::vector<std::size_t> ramp_horizons;  // empty: document or default
    bool daily_median = false;
    // generate
    std::string kind = "batch";
    std::optional<long> days;
    // metrics / diagnose
    std::string series;
    std::string x = "p_inf_kw";
    std::string y = "p_batch_kw";
    std::size_t horizon = 15;
};

inline std::filesystem::path output_dir(const Options& o) {
    if (!o.out.empty()) return o.out;
    if (const char* env = std::getenv(kOutEnv); env && *env) return env;
    return "out";
}

inline std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline Scenario apply_overrides(Scenario s, const Options& o) {
    if (o.seed) s.seed = *o.seed;
    if (o.policy) s.policy = policy_from_string(*o.policy);
    if (o.ckpt_s) s.ckpt_s = *o.ckpt_s;
    if (o.share) s.share = *o.share;
    if (o.utilization) s.utilization = *o.utilization;
    if (o.speed_class) s.speed = speed_class_from_string(*o.speed_class);
    if (o.verbosity) s.verbosity = *o.verbosity;
    if (o.days) s.horizon_days = *o.days;
    validate(s);
    return s;
}

struct LoadedConfig {
    io::json doc;
    ModelBundle bundle;
};

inline LoadedConfig load_config(const Options& o) {
    if (o.config.empty()) throw ConfigError("--config is required");
    LoadedConfig c;
    c.doc = io::read_json_file(o.config);
    c.bundle = io::load_bundle(c.doc);
    return c;
}

inline io::json derived_seeds(const ModelBundle& b, std::uint64_t root) {
    io::json j = io::json::object();
    for (const auto& g : b.batch_groups) {
        j["batch-arrivals/" + g.arrivals.group] = hex(derive_seed(root, {"batch-arrivals", g.arrivals.group}));
        j["batch-jobs/" + g.arrivals.group] = hex(derive_seed(root, {"batch-jobs", g.arrivals.group}));
    }
    j["inference"] = hex(derive_seed(root, {"inference"}));
    j["job-power/<job_id>"] = "derive_seed(root, [\"job-power\", decimal job_id])";
    return j;
}

using Outputs = std::map<std::string, std::string>;  // relative path -> content

inline void write_outputs(const std::filesystem::path& dir, const Outputs& files, io::json manifest) {
    io::json list = io::json::array();
    for (const auto& [name, content] : files) {
        list.push_back({{"path", name}, {"bytes", content.size()}, {"fnv1a64", hex(detail::fnv1a(detail::kFnvOffset, content))}});
    }
    manifest["tool_version"] = kToolVersion;
    manifest["files"] = list;
    for (const auto& [name, content] : files) io::write_file(dir / name, content);
    io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline io::json base_manifest(const std::string& command, const LoadedConfig& c, const Options& o) {
    return {{"command", command},
            {"config_path", o.config},
            {"config_hash", hex(io::config_hash(c.doc))},
            {"utilization_definition", kUtilizationDefinition}};
}

inline Scenario scenario_from(const Options& o) {
    Scenario s;
    if (!o.scenario.empty()) s = io::load_scenario(io::read_json_file(o.scenario));
    return apply_overrides(s, o);
}

/// Synthetic streams without scheduling. Without --scenario the model means
/// are used as-is; with one, they are scaled to the scenario's load targets.
inline int cmd_generate(const Options& o) {
    const auto c = load_config(o);
    const auto s = scenario_from(o);
    if (o.kind != "batch" && o.kind != "inference") throw ConfigError("--kind must be 'batch' or 'inference'");
    const auto& b = c.bundle;
    const long days = s.horizon_days;
    const auto groups = with_verbosity(b.inference_groups, s.verbosity);
    const auto templates = templates_for(b.llm_templates, s.speed);
    LoadScales scales{1.0, 1.0};
    if (!o.scenario.empty()) {
        Scenario t = s;
        t.warmup_days = 0;
        scales = load_scales(b, t, groups, templates);
    }
    Outputs files;
    if (o.kind == "batch") {
        const auto& plan = s.timezones ? *s.timezones : b.timezones;
        const auto jobs = generate_batch_jobs(b, plan, days, scales.batch, s.seed);
        files["batch_arrivals.csv"] = io::batch_arrivals_csv(jobs);
        files["jobs.csv"] = io::job_list_csv(jobs);
        io::CsvWriter power({"job_id", "minute_index", "power_kw"});
        for (const auto& j : jobs) {
            const auto trace = job_power_trace(b, j, s.seed);
            for (std::size_t m = 0; m < trace.size(); ++m) {
                power.cell(j.id).cell(m).cell(trace[m]);
                power.end_row();
            }
        }
        files["job_power.csv"] = power.str();
    } else {
        std::vector<InferenceRequest> reqs;
        Rng rng(derive_seed(s.seed, {"inference"}));
        generate_inference_requests(groups, b.kappa, static_cast<int>(templates.size()), b.calendar, 0,
                                    days * kMinutesPerDay, scales.inference, rng,
                                    [&](const InferenceRequest& r) { reqs.push_back(r); });
        std::stable_sort(reqs.begin(), reqs.end(),
                         [](const InferenceRequest& a, const InferenceRequest& r) { return a.arrival_s < r.arrival_s; });
        io::CsvWriter w({"timestamp_s", "group", "template", "tokens"});
        for (const auto& r : reqs) {
            w.cell(r.arrival_s).cell(groups[static_cast<std::size_t>(r.group)].rates.group);
            w.cell(templates[static_cast<std::size_t>(r.template_index)].id).cell(r.tokens);
            w.end_row();
        }
        files["inference_requests.csv"] = w.str();
    }
    auto manifest = base_manifest("generate", c, o);
    manifest["kind"] = o.kind;
    manifest["scenario"] = io::scenario_to_json(s);
    manifest["root_seed"] = s.seed;
    manifest["derived_seeds"] = derived_seeds(b, s.seed);
    manifest["scales"] = {{"batch", scales.batch}, {"inference", scales.inference}};
    write_outputs(output_dir(o), files, manifest);
    return kOk;
}

inline MetricsOptions metrics_options(const Options& o, std::vector<std::size_t> fallback = {1, 5, 15}) {
    MetricsOptions m;
    m.ramp_horizons = o.ramp_horizons.empty() ? std::move(fallback) : o.ramp_horizons;
    m.daily_median_ramp = o.daily_median;
    for (auto h : m.ramp_horizons) {
        if (h == 0) throw ConfigError("ramp horizons must be >= 1 minute");
    }
    return m;
}

inline io::json metrics_json(const RunMetrics& m, const MetricsOptions& opt) {
    io::json j = {{"cov", m.cov}, {"unmet_frac", m.unmet_frac}};
    for (std::size_t i = 0; i < opt.ramp_horizons.size(); ++i) j[io::ramp_column(opt.ramp_horizons[i])] = m.ramp_medians[i];
    return j;
}

inline int cmd_simulate(const Options& o) {
    const auto c = load_config(o);
    const auto s = scenario_from(o);
    const auto opt = metrics_options(o);
    const auto r = run_hybrid(c.bundle, s);
    Outputs files;
    files["series.csv"] = io::series_csv(r);
    files["jobs.csv"] = io::job_list_csv(r.jobs);
    files["segments.csv"] = io::segment_trace_csv(r.trace);
    files["busy_gpus.csv"] = io::busy_gpus_csv(r.g_batch, r.first_minute);
    files["inference.csv"] = io::serving_csv(r.serving, templates_for(c.bundle.llm_templates, s.speed), r.first_minute);
    auto manifest = base_manifest("simulate", c, o);
    manifest["scenario"] = io::scenario_to_json(s);
    manifest["root_seed"] = s.seed;
    manifest["derived_seeds"] = derived_seeds(c.bundle, s.seed);
    manifest["scales"] = {{"batch", r.batch_scale}, {"inference", r.inference_scale}};
    manifest["realized"] = {{"w_inf_gpu_hours", r.w_inf_gpu_hours},
                            {"w_batch_gpu_hours", r.w_batch_gpu_hours},
                            {"share", r.share_realized},
                            {"utilization", r.utilization_realized}};
    if (!r.p_total_kw.empty() && mean(r.p_total_kw) > 0.0) manifest["metrics"] = metrics_json(compute_metrics(r, opt), opt);
    io::json rejected = io::json::array();
    for (const auto& x : r.trace.rejected) rejected.push_back({{"job_id", x.job_id}, {"reason", x.reason}});
    manifest["rejected_jobs"] = rejected;
    manifest["warnings"] = r.warnings;
    write_outputs(output_dir(o), files, manifest);
    return kOk;
}

inline int cmd_sweep(const Options& o) {
    const auto c = load_config(o);
    if (o.scenario.empty()) throw ConfigError("sweep needs a sweep document via --scenario");
    auto doc = io::load_sweep(io::read_json_file(o.scenario));
    for (auto& s : doc.scenarios) s = apply_overrides(s, o);
    const auto opt = metrics_options(o, doc.ramp_horizons);
    std::vector<std::string> series(doc.scenarios.size());
    const auto rows = sweep(c.bundle, doc.scenarios, opt, o.parallel,
                            [&](std::size_t i, const HybridResult& r) { series[i] = io::series_csv(r); });
    Outputs files;
    files["results.csv"] = io::sweep_results_csv(rows, opt);
    files["sweep_components.csv"] = io::sweep_components_csv(rows, opt);
    io::json runs = io::json::array();
    bool failed = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& s = rows[i].scenario;
        io::json run = {{"scenario", io::scenario_to_json(s)}, {"derived_seeds", derived_seeds(c.bundle, s.seed)}};
        if (rows[i].error.empty()) {
            files["runs/" + s.id + "/series.csv"] = series[i];
        } else {
            failed = true;
            run["error"] = rows[i].error;
        }
        runs.push_back(run);
    }
    auto manifest = base_manifest("sweep", c, o);
    manifest["sweep_path"] = o.scenario;
    manifest["sweep_hash"] = hex(io::config_hash(io::read_json_file(o.scenario)));
    manifest["runs"] = runs;
    write_outputs(output_dir(o), files, manifest);
    if (failed) {
        std::cerr << "sweep: some scenarios failed; see the error column of results.csv\n";
        return kPartialSweep;
    }
    return kOk;
}

/// Recomputes metrics and hourly profiles from a stored series CSV.
inline int cmd_metrics(const Options& o) {
    if (o.series.empty()) throw ConfigError("--series is required");
    const auto table = io::read_numeric_csv(o.series);
    const auto opt = metrics_options(o);
    const auto& total = table.column("p_total_kw");
    const bool has_parts = table.columns.count("p_batch_kw") && table.columns.count("p_inf_kw");
    const std::vector<double> none;
    const auto& batch = has_parts ? table.column("p_batch_kw") : none;
    const auto& inf = has_parts ? table.column("p_inf_kw") : none;
    const auto m = compute_metrics(total, batch, inf, 0.0, 0.0, opt);

    std::vector<std::string> header{"cov"};
    for (auto h : opt.ramp_horizons) header.push_back(io::ramp_column(h));
    io::CsvWriter w(header);
    w.cell(m.cov);
    for (double r : m.ramp_medians) w.cell(r);
    w.end_row();
    Outputs files;
    files["metrics.csv"] = w.str();
    std::cout << w.str();

    if (total.size() >= static_cast<std::size_t>(kMinutesPerDay)) {
        const std::vector<double> zeros(total.size(), 0.0);
        const auto prof = daily_profile(total, has_parts ? batch : zeros, has_parts ? inf : zeros);
        io::CsvWriter p({"hour", "component", "p05", "p25", "p50", "p75", "p95"});
        auto emit = [&](const char* name, const auto& q) {
            for (int h = 0; h < 24; ++h) {
                p.cell(h).cell(name);
                for (double v : q[static_cast<std::size_t>(h)]) p.cell(v);
                p.end_row();
            }
        };
        emit("total", prof.total);
        if (has_parts) {
            emit("batch", prof.batch);
            emit("inference", prof.inference);
        }
        files["hourly_profile.csv"] = p.str();
    }
    write_outputs(output_dir(o), files, {{"command", "metrics"}, {"series_path", o.series}});
    return kOk;
}

/// First-difference transmission diagnostic between two stored columns.
inline int cmd_diagnose(const Options& o) {
    if (o.series.empty()) throw ConfigError("--series is required");
    const auto table = io::read_numeric_csv(o.series);
    const auto d = transmission_diagnostic(table.column(o.x), table.column(o.y), o.horizon);
    io::CsvWriter pairs({"dx", "dy"});
    for (const auto& [dx, dy] : d.pairs) {
        pairs.cell(dx).cell(dy);
        pairs.end_row();
    }
    io::CsvWriter fit({"x", "y", "horizon_min", "slope", "intercept", "n_pairs"});
    fit.cell(o.x).cell(o.y).cell(o.horizon).cell(d.fit.slope).cell(d.fit.intercept).cell(d.pairs.size());
    fit.end_row();
    std::cout << fit.str();
    write_outputs(output_dir(o), {{"diagnose_pairs.csv", pairs.str()}, {"diagnose_fit.csv", fit.str()}},
                  {{"command", "diagnose"}, {"series_path", o.series}});
    return kOk;
}

/// Runs `fn`, mapping configuration and input problems to exit code 1.
template <typename Fn>
int guarded(Fn&& fn, const Options& o) {
    try {
        return fn(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}

}  // namespace hybridsim::cli

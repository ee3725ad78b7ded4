// hybridsim: synthetic batch + inference workloads on a shared GPU pool.

#include <iostream>

#include "CLI11.hpp"

#include "hybridsim/cli.hpp"

namespace {

void add_common(CLI::App* app, hybridsim::cli::Options& o) {
    app->add_option("--out", o.out, "Output directory (default: $HYBRIDSIM_OUT, else ./out)");
}

void add_run_flags(CLI::App* app, hybridsim::cli::Options& o) {
    app->add_option("--config", o.config, "Model bundle JSON")->required();
    app->add_option("--seed", o.seed, "Root seed (overrides the scenario)");
    app->add_option("--policy", o.policy, "FCFS_BACKFILL or SWF");
    app->add_option("--ckpt-seconds", o.ckpt_s, "Checkpoint segment length in seconds");
    app->add_option("--share", o.share, "Inference share target in [0, 1]");
    app->add_option("--utilization", o.utilization, "Utilization target");
    app->add_option("--speed-class", o.speed_class, "Serving speed class")->check(CLI::IsMember({"F", "M", "S"}));
    app->add_option("--verbosity-scale", o.verbosity, "Token-length stretch factor s");
}

void add_metric_flags(CLI::App* app, hybridsim::cli::Options& o) {
    app->add_option("--ramp-horizons", o.ramp_horizons, "Ramp horizons in minutes")->delimiter(',');
    app->add_flag("--daily-median", o.daily_median, "Median of daily ramp medians instead of the pooled median");
}

}  // namespace

int main(int argc, char** argv) {
    namespace cli = hybridsim::cli;
    CLI::App app{"Shared-GPU batch/inference co-simulation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", cli::kToolVersion);
    cli::Options o;

    auto* gen = app.add_subcommand("generate", "Write synthetic arrival and job/request streams");
    add_run_flags(gen, o);
    add_common(gen, o);
    gen->add_option("--scenario", o.scenario, "Scenario JSON (scales the streams to its load targets)");
    gen->add_option("--kind", o.kind, "batch or inference")->check(CLI::IsMember({"batch", "inference"}));
    gen->add_option("--days", o.days, "Horizon in days (overrides the scenario)");

    auto* sim = app.add_subcommand("simulate", "Run one hybrid scenario");
    add_run_flags(sim, o);
    add_common(sim, o);
    add_metric_flags(sim, o);
    sim->add_option("--scenario", o.scenario, "Scenario JSON");

    auto* sw = app.add_subcommand("sweep", "Run a scenario grid");
    add_run_flags(sw, o);
    add_common(sw, o);
    add_metric_flags(sw, o);
    sw->add_option("--scenario", o.scenario, "Sweep JSON")->required();
    sw->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);

    auto* met = app.add_subcommand("metrics", "Recompute metrics from a stored series CSV");
    add_common(met, o);
    add_metric_flags(met, o);
    met->add_option("--series", o.series, "series.csv from simulate or sweep")->required();

    auto* diag = app.add_subcommand("diagnose", "Transmission diagnostic between two stored columns");
    add_common(diag, o);
    diag->add_option("--series", o.series, "series.csv from simulate or sweep")->required();
    diag->add_option("--x", o.x, "Driver column");
    diag->add_option("--y", o.y, "Response column");
    diag->add_option("--horizon", o.horizon, "Differencing interval in minutes")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kConfigError;
    }

    if (*gen) return cli::guarded(cli::cmd_generate, o);
    if (*sim) return cli::guarded(cli::cmd_simulate, o);
    if (*sw) return cli::guarded(cli::cmd_sweep, o);
    if (*met) return cli::guarded(cli::cmd_metrics, o);
    return cli::guarded(cli::cmd_diagnose, o);
}

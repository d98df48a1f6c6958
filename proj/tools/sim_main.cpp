// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include <CLI11.hpp>

#include "servesim/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"servesim: discrete-event simulator for LLM serving schedulers"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        sub->add_option("--config", config_path, "experiment config JSON")
            ->required(config_required);
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--jobs", jobs, "worker threads for independent simulations");
    };

    auto* sim = app.add_subcommand("simulate", "run one simulation and write reports");
    add_common(sim);
    auto* cap = app.add_subcommand("capacity", "search sustainable load per scheduler and SLO");
    add_common(cap);
    auto* sweep = app.add_subcommand("sweep", "sweep one knob, one simulation per value");
    add_common(sweep);
    auto* cal = app.add_subcommand("calibrate", "fit cost-model params to timing anchors");
    add_common(cal);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    servesim::CommandOptions opts;
    opts.out_dir_override = out_dir;
    if (seed_set) opts.seed_override = seed;
    opts.jobs = jobs;

    if (sim->parsed()) return servesim::cmd_simulate(config_path, opts);
    if (cap->parsed()) return servesim::cmd_capacity(config_path, opts);
    if (sweep->parsed()) return servesim::cmd_sweep(config_path, opts);
    if (cal->parsed()) return servesim::cmd_calibrate(config_path, opts);
    return 2;
}

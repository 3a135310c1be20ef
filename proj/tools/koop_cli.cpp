// Command-line pipeline driver: generate / train / evaluate / cycle / sweep.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <string>

#include "koop/experiment.hpp"
#include "koop/util.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericError = 3, kIoError = 4 };

struct Args {
    std::string config;
    koop::CliOverrides overrides;
    std::string model;  // cycle only
};

int dispatch(const std::string& verb, const Args& args) {
    const koop::ExperimentConfig cfg = koop::load_experiment_config(args.config, args.overrides);
    if (verb == "generate") {
        koop::cmd_generate(cfg);
    } else if (verb == "train") {
        koop::cmd_train(cfg);
    } else if (verb == "evaluate") {
        koop::cmd_evaluate(cfg);
    } else if (verb == "cycle") {
        koop::cmd_cycle(cfg, args.model);
    } else if (verb == "sweep") {
        koop::cmd_sweep(cfg);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman/eDMD identification pipeline for an AC + cabin plant"};
    app.require_subcommand(1);

    Args args;
    std::uint64_t seed_flag = 0;
    std::string out_flag;

    std::vector<CLI::App*> subs;
    for (const char* verb : {"generate", "train", "evaluate", "cycle", "sweep"}) {
        CLI::App* sub = app.add_subcommand(verb);
        sub->add_option("--config", args.config, "experiment config JSON")->required();
        sub->add_option("--seed", seed_flag, "override the config seed");
        sub->add_option("--out", out_flag, "override the config output directory");
        subs.push_back(sub);
    }
    subs[0]->add_flag("--paper-scale", args.overrides.paper_scale,
                      "use the full 200-trajectory protocol instead of desk scale");
    subs[3]->add_option("--model", args.model, "model JSON path (defaults to the config's cycle_model)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    const std::string verb = app.get_subcommands().front()->get_name();
    if (app.get_subcommands().front()->count("--seed") > 0) args.overrides.seed = seed_flag;
    if (app.get_subcommands().front()->count("--out") > 0) args.overrides.out_dir = out_flag;

    try {
        return dispatch(verb, args);
    } catch (const koop::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const koop::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIoError;
    } catch (const koop::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumericError;
    }
}

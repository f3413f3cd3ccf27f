// dimest: run experiment recipes, analyze Ising sweeps, print default configs.
//
//   dimest run <recipe> [--seed N] [--scale desk|paper] [--out DIR] [--override k=v ...] [--config FILE]
//   dimest analyze ising --in DIR
//   dimest export-config <recipe> [--scale desk|paper] [--seed N]
//
// Exit codes: 0 success, 2 usage, 3 numerical failure.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dimest/experiment.hpp"
#include "dimest/recipes.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct RunArgs {
    std::string recipe;
    std::uint64_t seed = 1;
    std::string scale = "desk";
    std::string out;
    std::vector<std::string> overrides;
    std::string config;
    bool quiet = false;
};

int do_run(const RunArgs& a) {
    dimest::ExperimentConfig cfg;
    if (!a.config.empty()) {
        cfg = dimest::ExperimentConfig::from_json(dimest::read_json(a.config));
        if (cfg.recipe != a.recipe)
            throw dimest::UsageError("config file is for recipe '" + cfg.recipe + "', not '" + a.recipe + "'");
    } else {
        cfg = dimest::default_config(a.recipe, dimest::scale_from_string(a.scale), a.seed);
    }
    for (const auto& o : a.overrides) dimest::apply_override(cfg, o);
    const std::string out = a.out.empty() ? "out/" + a.recipe : a.out;
    const auto result = dimest::run_recipe(cfg, out, a.quiet ? nullptr : &std::cerr);
    std::cout << "config_hash " << cfg.hash() << '\n';
    for (const auto& f : result.files)
        if (f.extension() == ".csv") std::cout << f.string() << '\n';
    return 0;
}

int do_analyze(const std::string& what, const std::string& dir) {
    if (what != "ising") throw dimest::UsageError("analyze: unknown target '" + what + "' (expected ising)");
    const auto a = dimest::analyze_ising_dir(dir);
    for (const auto& s : a.fit.sizes)
        std::cout << "L=" << s.L << " I_max=" << dimest::format_number(s.i_max) << " +- "
                  << dimest::format_number(s.i_max_std) << " bits  T_max=" << dimest::format_number(s.t_max) << " +- "
                  << dimest::format_number(s.t_max_std) << '\n';
    std::cout << "I_max = " << dimest::format_number(a.fit.a) << " log2 L + " << dimest::format_number(a.fit.b) << '\n'
              << "T_max - Tc = " << dimest::format_number(a.fit.c) << " / L\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Task-relevant dimensionality from paired views"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a named recipe and write its CSV/JSON outputs");
    run_cmd->add_option("recipe", run.recipe, "Recipe name")->required();
    run_cmd->add_option("--seed", run.seed, "Master seed");
    run_cmd->add_option("--scale", run.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    run_cmd->add_option("--out", run.out, "Output directory (default out/<recipe>)");
    run_cmd->add_option("--override", run.overrides, "key=value on the params document (dotted keys)");
    run_cmd->add_option("--config", run.config, "Resolved config.json to re-run")->check(CLI::ExistingFile);
    run_cmd->add_flag("--quiet", run.quiet, "No progress lines on stderr");

    std::string analyze_what;
    std::string analyze_dir;
    auto* an_cmd = app.add_subcommand("analyze", "Post-process a finished recipe output directory");
    an_cmd->add_option("target", analyze_what, "What to analyze (ising)")->required();
    an_cmd->add_option("--in", analyze_dir, "Directory written by `run fig6a_ising`")->required();

    std::string export_recipe;
    std::string export_scale = "desk";
    std::uint64_t export_seed = 1;
    auto* ex_cmd = app.add_subcommand("export-config", "Print the resolved default config of a recipe");
    ex_cmd->add_option("recipe", export_recipe, "Recipe name")->required();
    ex_cmd->add_option("--scale", export_scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    ex_cmd->add_option("--seed", export_seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*run_cmd) return do_run(run);
        if (*an_cmd) return do_analyze(analyze_what, analyze_dir);
        if (*ex_cmd) {
            auto cfg = dimest::default_config(export_recipe, dimest::scale_from_string(export_scale), export_seed);
            std::cout << cfg.to_json().dump(2) << '\n';
            return 0;
        }
    } catch (const dimest::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const dimest::InvalidInput& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kExitUsage;
    } catch (const dimest::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}

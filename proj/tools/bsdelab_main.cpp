// Batch front-end: scenario configs in, reproducible reports out.
// Exit codes: 0 all checks pass, 1 any FAIL, 2 config error.

#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bsdelab/errors.hpp"
#include "bsdelab/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"bsdelab: scalar BSDE laboratory at the critical integrability threshold"};
    app.require_subcommand(1);

    bsdelab::RunConfig run;
    std::string config_path;
    std::vector<std::string> overrides;
    std::string output_dir = "out";
    std::int64_t seed = -1;
    bool check_only = false;
    bool negative_controls = false;

    auto add_common = [&](CLI::App* cmd, bool wants_config) {
        if (wants_config) cmd->add_option("--config", config_path, "scenario config file");
        cmd->add_option("--set", overrides, "override a config key (key=value, repeatable)");
        cmd->add_option("--output,-o", output_dir, "output directory");
        cmd->add_option("--seed", seed, "seed for stochastic checks / scenario override");
        cmd->add_flag("--check", check_only, "verify the manifest of a previous run");
        cmd->add_flag("--negative-controls", negative_controls,
                      "inject faulty variants that must FAIL (exit 1 proves test power)");
    };

    add_common(app.add_subcommand("verify-functions",
                                  "grid and random sweeps of the analytic inequalities"),
               true);
    add_common(app.add_subcommand("solve", "backward solve; writes solution.csv + sidecar"), true);
    add_common(app.add_subcommand("estimate",
                                  "supermartingale, a priori bound and class-(D) diagnostics"),
               true);
    add_common(app.add_subcommand("uniqueness",
                                  "two-route agreement across the subinterval cascade"),
               true);
    add_common(app.add_subcommand("report", "summarize report_*.json files in an output dir"),
               false);

    CLI11_PARSE(app, argc, argv);

    run.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) run.config_path = config_path;
    run.output_dir = output_dir;
    if (seed >= 0) run.seed = static_cast<std::uint64_t>(seed);
    run.check_only = check_only;
    run.negative_controls = negative_controls;
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "config error: --set expects key=value, got '%s'\n", kv.c_str());
            return 2;
        }
        run.overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }

    return bsdelab::run_command(run);
}

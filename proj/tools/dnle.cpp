#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dnle/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Numerical experiments for u_t = Δ_p u^m"};
    app.require_subcommand(1);

    std::string config, out = "out";
    bool assert_checks = false;
    for (const auto& kind : dnle::cli::experiment_kinds()) {
        auto* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
        sub->add_option("--config", config, "flat key = value config file")->required();
        sub->add_option("--out", out, "output directory");
        sub->add_flag("--assert", assert_checks, "exit 4 when a built-in check fails");
    }

    std::vector<std::string> configs;
    auto* sweep = app.add_subcommand("sweep", "run several configs in parallel (DNLE_THREADS caps workers)");
    sweep->add_option("--config", configs, "config files")->required();
    sweep->add_option("--out", out, "output directory; one subdirectory per config");
    sweep->add_flag("--assert", assert_checks, "exit 4 when a built-in check fails");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dnle::cli::kConfigError;
    }

    if (sweep->parsed()) {
        std::vector<std::string> messages;
        const auto codes = dnle::cli::run_sweep(configs, out, assert_checks, &messages);
        int worst = 0;
        for (std::size_t k = 0; k < codes.size(); ++k) {
            if (codes[k] != 0) std::fprintf(stderr, "%s: %s\n", configs[k].c_str(), messages[k].c_str());
            worst = std::max(worst, codes[k]);
        }
        return worst;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    std::string message;
    const int code = dnle::cli::run_file(config, kind, out, assert_checks, &message);
    if (code != 0) std::fprintf(stderr, "%s\n", message.c_str());
    return code;
}

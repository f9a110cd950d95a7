#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "bsde/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"BSDE experiment runner"};
    std::string config_path, out_dir = ".", task;
    std::uint64_t seed = 0;
    bool have_seed = false;

    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--task", task,
                   "one of simulate|solve|verify|malliavin|hlimit|pdie")
        ->required();
    app.add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        have_seed = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : bsde::cli::kExitConfig;
    }

    const std::optional<std::uint64_t> seed_override =
        have_seed ? std::optional<std::uint64_t>(seed) : std::nullopt;
    return bsde::cli::run_task(config_path, out_dir, seed_override, task);
}

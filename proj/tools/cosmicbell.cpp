// Batch CLI: cosmicbell {analyze|simulate|spacetime|rng} --config FILE [--out DIR] [--seed N]
//
// The report goes to DIR/report.json when --out (or "out" in the config) is
// given, otherwise to stdout. Exit codes: 0 ok, 2 invalid input, 3 solver
// did not converge.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cosmicbell/pipeline/commands.hpp"

namespace cb = cosmicbell;
namespace pl = cosmicbell::pipeline;

int main(int argc, char** argv) {
    CLI::App app{"Cosmic-photon Bell test analysis"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    const std::map<std::string, std::function<pl::json(const pl::RunContext&)>> commands{
        {"analyze", pl::cmd_analyze}, {"simulate", pl::cmd_simulate}, {"spacetime", pl::cmd_spacetime}, {"rng", pl::cmd_rng}};
    const std::map<std::string, std::string> help{
        {"analyze", "CH statistic, no-signaling tests, bias bounds and PBR p-value"},
        {"simulate", "Sample trials from a behavior or quantum model"},
        {"spacetime", "Star geometry, spacelike margins and lookback times"},
        {"rng", "Digitize photon time tags into random bits"}};

    std::map<std::string, CLI::Option*> seed_opts, out_opts;
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
        out_opts[name] = sub->add_option("--out", out, "Output directory");
        seed_opts[name] = sub->add_option("--seed", seed, "Seed override");
    }

    CLI11_PARSE(app, argc, argv);

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        std::optional<pl::fs::path> out_dir;
        std::optional<std::uint64_t> seed_override;
        if (*out_opts.at(name)) out_dir = out;
        if (*seed_opts.at(name)) seed_override = seed;
        const auto ctx = pl::load_context(config, out_dir, seed_override);
        const bool to_file = out_dir.has_value() || ctx.config.contains("out");
        const auto report = commands.at(name)(ctx);
        const auto body = pl::render(report);
        if (to_file) {
            pl::write_file(ctx.out_dir / "report.json", body);
        } else {
            std::cout << body;
        }
        return 0;
    } catch (const cb::ValidationError& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return 2;
    } catch (const pl::json::exception& e) {
        std::cerr << name << ": config error: " << e.what() << "\n";
        return 2;
    } catch (const cb::ConvergenceError& e) {
        std::cerr << name << ": did not converge: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return 2;
    }
}

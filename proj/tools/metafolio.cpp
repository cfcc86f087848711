// metafolio command-line entry point.
//
// Exit codes: 0 ok, 1 validation findings, 2 config error, 3 data error,
// 4 internal error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "metafolio/config.hpp"
#include "metafolio/report_io.hpp"
#include "metafolio/runner.hpp"
#include "metafolio/synth_spec.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

void print_summary(const metafolio::RunArtifacts& art) {
    std::printf("%-10s %10s %10s %10s\n", "", "HRP", "NRP", "MPM");
    std::printf("Sharpe Ratio\n");
    for (const auto& r : art.reports)
        std::printf("  %-8d %10.2f %10.2f %10.2f\n", r.universe_id,
                    r.hrp_metrics.sharpe, r.nrp_metrics.sharpe, r.mpm_metrics.sharpe);
    std::printf("Cumulative Return (%%)\n");
    for (const auto& r : art.reports)
        std::printf("  %-8d %10.2f %10.2f %10.2f\n", r.universe_id,
                    100.0 * r.hrp_metrics.cumulative_return,
                    100.0 * r.nrp_metrics.cumulative_return,
                    100.0 * r.mpm_metrics.cumulative_return);
    if (!art.significance.comparisons.empty()) {
        std::printf("Significance (paired one-sided t-test)\n");
        for (const auto& c : art.significance.comparisons)
            std::printf("  %-20s t=%8.3f  p=%.3g\n", c.name.c_str(), c.t_statistic,
                        c.p_value);
    }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<std::string> out_dir, bool verbose) {
    metafolio::RunConfig cfg;
    try {
        cfg = metafolio::load_config(config_path);
        auto findings = metafolio::validate_config(cfg);
        if (!findings.empty()) {
            for (const auto& f : findings) std::cerr << "config: " << f << '\n';
            return kExitConfig;
        }
    } catch (const metafolio::ConfigError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfig;
    }
    if (seed) cfg.backtest.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;

    try {
        metafolio::RunArtifacts art = metafolio::run_all_universes(cfg);
        metafolio::write_all_outputs(art, cfg, cfg.output_dir);
        print_summary(art);
        if (verbose)
            for (const auto& r : art.reports)
                for (const auto& line : r.log)
                    std::cerr << "universe " << r.universe_id << ": " << line << '\n';
        return kExitOk;
    } catch (const std::runtime_error& e) {
        std::cerr << "data: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal: " << e.what() << '\n';
        return kExitInternal;
    }
}

int cmd_validate(const std::string& config_path) {
    metafolio::RunConfig cfg;
    try {
        cfg = metafolio::load_config(config_path);
    } catch (const metafolio::ConfigError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kExitConfig;
    }
    auto findings = metafolio::validate_config(cfg);
    if (findings.empty()) {
        std::cout << "config ok\n";
        return kExitOk;
    }
    for (const auto& f : findings) std::cout << f << '\n';
    return kExitValidation;
}

int cmd_synth(const std::string& spec_path, std::uint64_t seed,
              const std::string& out_path) {
    try {
        metafolio::MarketSpec spec = metafolio::load_market_spec(spec_path);
        metafolio::PricePanel panel = metafolio::generate_synthetic_market(spec, seed);
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "data: cannot write " << out_path << '\n';
            return kExitData;
        }
        metafolio::write_prices_csv(panel, out);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "spec: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metafolio: meta portfolio backtesting"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run all universes and emit reports");
    std::string run_config;
    std::optional<std::uint64_t> run_seed;
    std::optional<std::string> run_out;
    bool verbose = false;
    run->add_option("--config", run_config, "config file path")->required();
    run->add_option("--seed", run_seed, "seed override");
    run->add_option("--out", run_out, "output directory override");
    run->add_flag("-v,--verbose", verbose, "print fallback/error log");

    auto* validate = app.add_subcommand("validate", "check a config without running");
    std::string val_config;
    validate->add_option("--config", val_config, "config file path")->required();

    auto* synth = app.add_subcommand("synth", "generate a synthetic price CSV");
    std::string synth_spec, synth_out;
    std::uint64_t synth_seed = 0;
    synth->add_option("--spec", synth_spec, "market spec (JSON)")->required();
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--out", synth_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (run->parsed()) return cmd_run(run_config, run_seed, run_out, verbose);
    if (validate->parsed()) return cmd_validate(val_config);
    if (synth->parsed()) return cmd_synth(synth_spec, synth_seed, synth_out);
    return kExitConfig;
}

// Multi-universe orchestration: loads data, runs backtests (parallel
// across universes, merged in universe order) and computes significance.
#pragma once

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "metafolio/backtest.hpp"
#include "metafolio/config.hpp"
#include "metafolio/report_io.hpp"

namespace metafolio {

inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("METAFOLIO_THREADS")) {
        try {
            long v = std::stol(env);
            if (v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
        } catch (const std::exception&) {
        }
    }
    return hw;
}

inline RunArtifacts run_all_universes(const RunConfig& cfg) {
    const size_t n = cfg.universes.size();
    RunArtifacts art;
    art.reports.resize(n);
    art.densities.resize(n);
    std::vector<std::string> errors(n);

    auto run_one = [&](size_t i) {
        try {
            const UniverseSpec& u = cfg.universes[i];
            PricePanel prices = load_prices(cfg.data_path, u.tickers);
            ReturnPanel returns = compute_returns(prices);
            art.reports[i] = run_backtest(returns, cfg.backtest, u.universe_id);
            auto& dens = art.densities[i];
            if (static_cast<long>(art.reports[i].hrp_returns.size()) >=
                cfg.density_bucket) {
                dens.emplace_back(StrategyChoice::HRP,
                                  strategy_density_surface(art.reports[i].hrp_returns,
                                                           cfg.density_bucket));
                dens.emplace_back(StrategyChoice::NRP,
                                  strategy_density_surface(art.reports[i].nrp_returns,
                                                           cfg.density_bucket));
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(n));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    run_one(i);
            });
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("universe " +
                                     std::to_string(cfg.universes[i].universe_id) +
                                     ": " + errors[i]);

    if (n >= 2) art.significance = compare_strategies(art.reports);
    return art;
}

}  // namespace metafolio

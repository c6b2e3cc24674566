#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace c3 {

struct RegretRow {
    long step = 0;
    std::uint64_t seed = 0;
    std::size_t arm = 0;
    int reward = 0;
    double mu_chosen = 0.0;
    double mu_best = 0.0;
    double cum_regret = 0.0;
};

/// Rows of one agent, grouped by seed in run order and by step within a seed.
struct RegretLog {
    std::string agent;
    std::vector<RegretRow> rows;

    std::vector<std::uint64_t> seeds() const;
    /// Cumulative regret at the last row of each seed, in seeds() order.
    std::vector<double> final_regrets() const;
};

/// Prefix sums of the per-step gaps.
std::vector<double> cumulative_regret(std::span<const double> gaps);

/// Prefix sums of mu_best - mu_chosen, restarting at each new seed.
std::vector<double> cumulative_regret(std::span<const RegretRow> rows);

struct SummaryStats {
    double mean = 0.0;
    double sd = 0.0;          // sample standard deviation (n - 1)
    double half_width = 0.0;  // 1.96 sd / sqrt(n)
    std::size_t n = 0;
};

SummaryStats summarize(std::span<const double> values);

struct MetricsOptions {
    /// Also write regret relative to the best agent (lowest mean final regret).
    bool relative = false;
};

/// Writes <dir>/<agent>_steps.csv for each log, <dir>/summary.csv, and with
/// `relative` set <dir>/relative_regret.csv.
void emit_metrics(std::span<const RegretLog> logs, const std::filesystem::path& dir,
                  const MetricsOptions& options = {});

/// Shortest round-trip decimal form used in every CSV.
std::string format_number(double v);

}  // namespace c3

#include "c3/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace c3 {

std::vector<std::uint64_t> RegretLog::seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& r : rows)
        if (out.empty() || out.back() != r.seed) out.push_back(r.seed);
    return out;
}

std::vector<double> RegretLog::final_regrets() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (i + 1 == rows.size() || rows[i + 1].seed != rows[i].seed) out.push_back(rows[i].cum_regret);
    return out;
}

std::vector<double> cumulative_regret(std::span<const double> gaps) {
    std::vector<double> out(gaps.size());
    double total = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) out[i] = total += gaps[i];
    return out;
}

std::vector<double> cumulative_regret(std::span<const RegretRow> rows) {
    std::vector<double> out(rows.size());
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].seed != rows[i - 1].seed) total = 0.0;
        out[i] = total += rows[i].mu_best - rows[i].mu_chosen;
    }
    return out;
}

SummaryStats summarize(std::span<const double> values) {
    SummaryStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / double(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / double(s.n - 1));
        s.half_width = 1.96 * s.sd / std::sqrt(double(s.n));
    }
    return s;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void check(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void emit_metrics(std::span<const RegretLog> logs, const std::filesystem::path& dir, const MetricsOptions& options) {
    std::filesystem::create_directories(dir);
    for (const auto& log : logs) {
        const auto path = dir / (log.agent + "_steps.csv");
        auto out = open_csv(path);
        out << "step,seed,arm,reward,mu_chosen,mu_best,cum_regret\n";
        for (const auto& r : log.rows)
            out << r.step << ',' << r.seed << ',' << r.arm << ',' << r.reward << ',' << format_number(r.mu_chosen)
                << ',' << format_number(r.mu_best) << ',' << format_number(r.cum_regret) << '\n';
        check(out, path);
    }

    const auto summary_path = dir / "summary.csv";
    auto summary = open_csv(summary_path);
    summary << "agent,seed,final_regret,mean_final_regret,half_width\n";
    for (const auto& log : logs) {
        const auto seeds = log.seeds();
        const auto finals = log.final_regrets();
        const auto stats = summarize(finals);
        for (std::size_t i = 0; i < seeds.size(); ++i)
            summary << log.agent << ',' << seeds[i] << ',' << format_number(finals[i]) << ','
                    << format_number(stats.mean) << ',' << format_number(stats.half_width) << '\n';
    }
    check(summary, summary_path);

    if (!options.relative || logs.empty()) return;
    std::size_t best = 0;
    double best_mean = summarize(logs[0].final_regrets()).mean;
    for (std::size_t i = 1; i < logs.size(); ++i) {
        const double m = summarize(logs[i].final_regrets()).mean;
        if (m < best_mean) {
            best_mean = m;
            best = i;
        }
    }
    const auto& ref = logs[best].rows;
    const auto rel_path = dir / "relative_regret.csv";
    auto rel = open_csv(rel_path);
    rel << "agent,seed,step,relative_regret\n";
    for (const auto& log : logs) {
        if (log.rows.size() != ref.size())
            throw std::runtime_error("relative regret: agents '" + log.agent + "' and '" + logs[best].agent +
                                     "' logged different step counts");
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const auto& r = log.rows[i];
            if (r.seed != ref[i].seed || r.step != ref[i].step)
                throw std::runtime_error("relative regret: step grids of the agents differ");
            rel << log.agent << ',' << r.seed << ',' << r.step << ',' << format_number(r.cum_regret - ref[i].cum_regret)
                << '\n';
        }
    }
    check(rel, rel_path);
}

}  // namespace c3

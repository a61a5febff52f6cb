#include "duelforge/metrics.hpp"

#include "duelforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>

namespace duelforge::metrics {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// ddof = 0, matching the population spread the snapshot table reports.
double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

std::vector<double> runningAverage(const std::vector<double>& series, int window) {
    if (series.empty()) throw std::invalid_argument("runningAverage: empty series");
    if (window < 1) throw std::invalid_argument("runningAverage: window must be >= 1");
    std::vector<double> out(series.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        sum += series[i];
        if (i >= static_cast<std::size_t>(window)) sum -= series[i - static_cast<std::size_t>(window)];
        const auto count = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
        out[i] = sum / static_cast<double>(count);
    }
    return out;
}

std::pair<double, double> winsorBounds(const std::vector<double>& values, double level) {
    if (values.empty()) throw std::invalid_argument("winsorize: empty input");
    if (level <= 0.0 || level > 1.0) throw std::invalid_argument("winsorize: level in (0, 1]");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    const auto rankOf = [&](double q) {
        const auto rank = static_cast<long>(std::ceil(q * n));
        return static_cast<std::size_t>(std::clamp<long>(rank, 1, static_cast<long>(n)) - 1);
    };
    const double tail = (1.0 - level) / 2.0;
    return {sorted[rankOf(tail)], sorted[rankOf(1.0 - tail)]};
}

std::vector<double> winsorize(const std::vector<double>& values, double level) {
    const auto [lo, hi] = winsorBounds(values, level);
    std::vector<double> out = values;
    for (double& v : out) v = std::clamp(v, lo, hi);
    return out;
}

std::vector<double> minMaxNormalize(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("minMaxNormalize: empty input");
    const auto [itLo, itHi] = std::minmax_element(values.begin(), values.end());
    const double lo = *itLo, hi = *itHi;
    std::vector<double> out(values.size(), 0.0);
    if (hi == lo) return out;  // degenerate range maps to zeros
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / (hi - lo);
    return out;
}

double normalizedDiffOfMeans(const std::vector<double>& transferredLast100,
                             const std::vector<double>& scratchLast100, double winsorLevel) {
    if (transferredLast100.empty() || scratchLast100.empty()) {
        throw std::invalid_argument("normalizedDiffOfMeans: empty pool");
    }
    // One clamp range and one min-max range per game, shared by both
    // variants, so the difference lives on a single scale.
    std::vector<double> joint = transferredLast100;
    joint.insert(joint.end(), scratchLast100.begin(), scratchLast100.end());
    joint = minMaxNormalize(winsorize(joint, winsorLevel));

    const auto nT = transferredLast100.size();
    const std::vector<double> t(joint.begin(), joint.begin() + static_cast<long>(nT));
    const std::vector<double> s(joint.begin() + static_cast<long>(nT), joint.end());
    return mean(t) - mean(s);
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace {

struct RunLog {
    std::uint64_t seed;
    std::vector<double> rewards;
    long wallMillis;
};

using VariantLogs = std::map<std::string, std::vector<RunLog>>;  // variant -> runs
using GameLogs = std::map<std::string, VariantLogs>;             // game -> variants

GameLogs collectLogs(const std::filesystem::path& logsDir) {
    GameLogs games;
    if (!std::filesystem::exists(logsDir)) return games;
    const std::regex pattern(R"(log_([a-z0-9]+)_(scratch|transferred)_seed(\d+)\.csv)");
    for (const auto& entry : std::filesystem::recursive_directory_iterator(logsDir)) {
        if (!entry.is_regular_file()) continue;
        std::smatch match;
        const std::string name = entry.path().filename().string();
        if (!std::regex_match(name, match, pattern)) continue;
        const auto records = train::readEpisodeLog(entry.path());
        RunLog run;
        run.seed = std::stoull(match[3].str());
        run.wallMillis = 0;
        for (const auto& r : records) {
            run.rewards.push_back(r.totalRewardP1);
            run.wallMillis += r.wallMillis;
        }
        games[match[1].str()][match[2].str()].push_back(std::move(run));
    }
    for (auto& [game, variants] : games) {
        for (auto& [variant, runs] : variants) {
            std::sort(runs.begin(), runs.end(),
                      [](const RunLog& a, const RunLog& b) { return a.seed < b.seed; });
        }
    }
    return games;
}

std::optional<double> readComplexity(const std::filesystem::path& profilesDir,
                                     const std::string& game) {
    const auto path = profilesDir / (game + ".complexity.txt");
    std::ifstream in(path);
    double v;
    if (in >> v) return v;
    return std::nullopt;
}

// Seed-mean curve truncated to the shortest run, then smoothed.
std::vector<double> averagedCurve(const std::vector<RunLog>& runs, int window) {
    std::size_t minLen = runs.front().rewards.size();
    for (const auto& r : runs) minLen = std::min(minLen, r.rewards.size());
    std::vector<double> avg(minLen, 0.0);
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < minLen; ++i) avg[i] += r.rewards[i];
    }
    for (double& v : avg) v /= static_cast<double>(runs.size());
    return minLen == 0 ? avg : runningAverage(avg, window);
}

std::vector<double> lastEpisodePool(const std::vector<RunLog>& runs, int lastEpisodes) {
    std::vector<double> pool;
    for (const auto& r : runs) {
        const auto n = r.rewards.size();
        const auto take = std::min<std::size_t>(n, static_cast<std::size_t>(lastEpisodes));
        pool.insert(pool.end(), r.rewards.end() - static_cast<long>(take), r.rewards.end());
    }
    return pool;
}

}  // namespace

int buildReport(const std::filesystem::path& logsDir, const std::filesystem::path& profilesDir,
                const std::filesystem::path& outDir, const ReportOptions& options) {
    std::filesystem::create_directories(outDir);
    const GameLogs games = collectLogs(logsDir);

    std::ofstream snapshots(outDir / "snapshots.csv", std::ios::trunc);
    snapshots << "game,variant";
    for (long ep : options.checkpoints) snapshots << ",ep" << ep << "_mean,ep" << ep << "_std";
    snapshots << "\n";

    std::ofstream walltime(outDir / "walltime.csv", std::ios::trunc);
    walltime << "game,variant,runs,mean_wall_ms\n";

    std::ofstream correlation(outDir / "correlation.csv", std::ios::trunc);
    correlation << "game,ram_complexity,norm_diff_means,pearson_r,pearson_r_loo_min,"
                   "pearson_r_loo_max\n";

    std::vector<ComparisonRow> rows;
    for (const auto& [game, variants] : games) {
        const bool complete = variants.count("transferred") && variants.count("scratch");
        if (!complete) {
            correlation << "# skipped " << game << ": missing "
                        << (variants.count("scratch") ? "transferred" : "scratch") << " logs\n";
            continue;
        }
        const auto& transferred = variants.at("transferred");
        const auto& scratch = variants.at("scratch");

        // Figure-1 analogue: smoothed seed-averaged curves.
        const auto curveT = averagedCurve(transferred, options.runningWindow);
        const auto curveS = averagedCurve(scratch, options.runningWindow);
        std::ofstream curves(outDir / ("curves_" + game + ".csv"), std::ios::trunc);
        curves << "episode,transferred,scratch\n";
        const auto curveLen = std::min(curveT.size(), curveS.size());
        for (std::size_t i = 0; i < curveLen; ++i) {
            curves << (i + 1) << "," << fmt(curveT[i]) << "," << fmt(curveS[i]) << "\n";
        }

        // Table-2 analogue: smoothed reward at fixed episodes, across seeds.
        for (const auto* variantRuns : {&transferred, &scratch}) {
            const std::string variantLabel = variantRuns == &transferred ? "transferred" : "scratch";
            snapshots << game << "," << variantLabel;
            for (long ep : options.checkpoints) {
                std::vector<double> at;
                for (const auto& run : *variantRuns) {
                    if (static_cast<long>(run.rewards.size()) >= ep && ep >= 1) {
                        const auto smoothed = runningAverage(run.rewards, options.runningWindow);
                        at.push_back(smoothed[static_cast<std::size_t>(ep - 1)]);
                    }
                }
                if (at.empty()) snapshots << ",,";
                else snapshots << "," << fmt(mean(at)) << "," << fmt(stddev(at));
            }
            snapshots << "\n";

            long wallSum = 0;
            for (const auto& run : *variantRuns) wallSum += run.wallMillis;
            walltime << game << "," << variantLabel << "," << variantRuns->size() << ","
                     << fmt(static_cast<double>(wallSum) /
                            static_cast<double>(variantRuns->size()))
                     << "\n";
        }

        const auto complexity = readComplexity(profilesDir, game);
        if (!complexity) {
            correlation << "# skipped " << game << ": no complexity profile\n";
            continue;
        }
        const double diff =
            normalizedDiffOfMeans(lastEpisodePool(transferred, options.lastEpisodes),
                                  lastEpisodePool(scratch, options.lastEpisodes),
                                  options.winsorLevel);
        rows.push_back({game, *complexity, diff});
    }

    for (const auto& row : rows) {
        correlation << row.game << "," << fmt(row.ramComplexity) << ","
                    << fmt(row.normalizedDiffOfMeans) << ",,,\n";
    }
    if (rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& row : rows) {
            xs.push_back(row.ramComplexity);
            ys.push_back(row.normalizedDiffOfMeans);
        }
        std::string r = "nan", looMin = "", looMax = "";
        try {
            r = fmt(pearson(xs, ys));
        } catch (const std::invalid_argument&) {
        }
        if (rows.size() >= 3) {
            double lo = 1.0, hi = -1.0;
            bool any = false;
            for (std::size_t drop = 0; drop < rows.size(); ++drop) {
                std::vector<double> x2, y2;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (i == drop) continue;
                    x2.push_back(xs[i]);
                    y2.push_back(ys[i]);
                }
                try {
                    const double ri = pearson(x2, y2);
                    lo = std::min(lo, ri);
                    hi = std::max(hi, ri);
                    any = true;
                } catch (const std::invalid_argument&) {
                }
            }
            if (any) {
                looMin = fmt(lo);
                looMax = fmt(hi);
            }
        }
        correlation << "summary,,," << r << "," << looMin << "," << looMax << "\n";
    } else if (rows.empty()) {
        correlation << "# warning: no complete game data found\n";
    }
    return static_cast<int>(rows.size());
}

}  // namespace duelforge::metrics

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace duelforge::metrics {

// Per-episode total rewards for one (game, variant, seed) run.
struct RewardSeries {
    std::string game;
    std::string variant;
    std::uint64_t seed = 0;
    std::vector<double> rewards;
};

struct ComparisonRow {
    std::string game;
    double ramComplexity = 0.0;
    double normalizedDiffOfMeans = 0.0;
};

// Sliding mean with prefix warm-up: element i averages the last
// min(i+1, window) values, so output length equals input length.
std::vector<double> runningAverage(const std::vector<double>& series, int window = 10);

// Nearest-rank percentile bounds at the two tails of `level` coverage
// (5th/95th for 0.90); values outside are set to the bound.
std::vector<double> winsorize(const std::vector<double>& values, double level = 0.90);

// The [lower, upper] clamp bounds winsorize uses.
std::pair<double, double> winsorBounds(const std::vector<double>& values, double level);

// (v - min) / (max - min); a constant input maps to all zeros.
std::vector<double> minMaxNormalize(const std::vector<double>& values);

// Joint 90% winsorization and joint min-max scaling over both pools, then
// mean(transferred) - mean(scratch).
double normalizedDiffOfMeans(const std::vector<double>& transferredLast100,
                             const std::vector<double>& scratchLast100,
                             double winsorLevel = 0.90);

// Sample Pearson correlation, 64-bit. Throws on length mismatch, length
// < 2, or zero variance.
double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct ReportOptions {
    std::vector<long> checkpoints = {1, 500, 1000, 1500, 2000};
    int runningWindow = 10;
    double winsorLevel = 0.90;
    int lastEpisodes = 100;
};

// Assembles the curves / snapshots / wall-time / correlation report from a
// directory of episode logs and a directory of complexity profiles.
// Returns the number of games that made it into the correlation table.
int buildReport(const std::filesystem::path& logsDir, const std::filesystem::path& profilesDir,
                const std::filesystem::path& outDir, const ReportOptions& options = {});

}  // namespace duelforge::metrics

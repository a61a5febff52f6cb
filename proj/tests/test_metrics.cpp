#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "duelforge/metrics.hpp"
#include "duelforge/rng.hpp"
#include "duelforge/trainer.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace duelforge;
using namespace duelforge::metrics;

namespace {

std::vector<double> randomValues(Rng& rng, std::size_t n, double lo = -50.0, double hi = 50.0) {
    std::vector<double> out(n);
    for (auto& v : out) v = rng.uniformReal(lo, hi);
    return out;
}

// Table-4 data: (RAM complexity, normalized difference of means), the
// Surround pair last.
const std::vector<double> kComplexity = {454.15, 394.42, 328.22, 285.66, 217.84,
                                         142.73, 112.35, 126.85, 127.54, 65.31};
const std::vector<double> kDiffs = {0.646, 0.255, 0.468, 0.518, 0.588,
                                    -0.075, 0.148, 0.081, 0.121, 0.613};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("runningAverage: examples") {
    CHECK(runningAverage({3.0, 3.0, 3.0}, 10) == std::vector<double>{3.0, 3.0, 3.0});
    CHECK(runningAverage({0.0, 10.0}, 10) == std::vector<double>{0.0, 5.0});
    CHECK(runningAverage({1.0, 2.0, 3.0, 4.0}, 2) == std::vector<double>{1.0, 1.5, 2.5, 3.5});
    CHECK_THROWS_AS(runningAverage({}, 10), std::invalid_argument);
    CHECK_THROWS_AS(runningAverage({1.0}, 0), std::invalid_argument);
}

TEST_CASE("runningAverage stays inside the prefix min/max envelope") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const auto series = randomValues(rng, 1 + rng.uniformInt(200));
        const int window = 1 + static_cast<int>(rng.uniformInt(20));
        const auto smoothed = runningAverage(series, window);
        REQUIRE(smoothed.size() == series.size());
        double lo = series[0], hi = series[0];
        for (std::size_t i = 0; i < series.size(); ++i) {
            lo = std::min(lo, series[i]);
            hi = std::max(hi, series[i]);
            CHECK(smoothed[i] >= lo - 1e-12);
            CHECK(smoothed[i] <= hi + 1e-12);
        }
    }
}

TEST_CASE("runningAverage matches the slow reference") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto series = randomValues(rng, 1 + rng.uniformInt(100));
        const int window = 1 + static_cast<int>(rng.uniformInt(15));
        const auto fast = runningAverage(series, window);
        const auto slow = oracle::slowRunningAverage(series, window);
        for (std::size_t i = 0; i < series.size(); ++i) {
            CHECK(std::abs(fast[i] - slow[i]) <= 1e-12);
        }
    }
}

TEST_CASE("winsorize: degenerate, level-1 and the 0..99 case") {
    const std::vector<double> same(20, 4.5);
    CHECK(winsorize(same, 0.9) == same);

    std::vector<double> values(100);
    for (int i = 0; i < 100; ++i) values[static_cast<std::size_t>(i)] = i;
    CHECK(winsorize(values, 1.0) == values);

    const auto clamped = winsorize(values, 0.9);
    CHECK(clamped == oracle::sortClampWinsorize(values, 0.9));
    CHECK(clamped[0] == 4.0);    // 5th-smallest bound
    CHECK(clamped[99] == 94.0);  // 95th bound
    CHECK(clamped[50] == 50.0);  // interior untouched

    CHECK_THROWS_AS(winsorize({}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(winsorize({1.0}, 0.0), std::invalid_argument);
}

TEST_CASE("winsorize matches the sort-and-clamp oracle and is idempotent") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto values = randomValues(rng, 1 + rng.uniformInt(300));
        const double level = 0.5 + 0.5 * rng.uniformReal();
        const auto once = winsorize(values, level);
        const auto expected = oracle::sortClampWinsorize(values, level);
        REQUIRE(once.size() == expected.size());
        for (std::size_t i = 0; i < once.size(); ++i) {
            CHECK(std::abs(once[i] - expected[i]) <= 1e-12);
        }
        CHECK(winsorize(once, level) == once);
    }
}

TEST_CASE("minMaxNormalize: endpoints and degenerate input") {
    CHECK(minMaxNormalize({2.0, 4.0, 6.0}) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(minMaxNormalize({5.0, 5.0, 5.0}) == std::vector<double>{0.0, 0.0, 0.0});
    const auto out = minMaxNormalize({-1.0, 0.0, 3.0});
    CHECK(out[0] == 0.0);
    CHECK(out[1] == doctest::Approx(0.25));
    CHECK(out[2] == 1.0);
    CHECK_THROWS_AS(minMaxNormalize({}), std::invalid_argument);
}

TEST_CASE("normalizedDiffOfMeans: identity, extremes, antisymmetry, oracle") {
    const std::vector<double> pool = {1.0, 2.0, 3.0, 4.0, 5.0};
    CHECK(normalizedDiffOfMeans(pool, pool) == doctest::Approx(0.0));

    const std::vector<double> top(50, 10.0);
    const std::vector<double> bottom(50, -3.0);
    CHECK(normalizedDiffOfMeans(top, bottom) == doctest::Approx(1.0));
    CHECK(normalizedDiffOfMeans(bottom, top) == doctest::Approx(-1.0));

    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = randomValues(rng, 20 + rng.uniformInt(200));
        const auto b = randomValues(rng, 20 + rng.uniformInt(200));
        const double fast = normalizedDiffOfMeans(a, b);
        const double slow = oracle::slowDiffOfMeans(a, b, 0.9);
        CHECK(std::abs(fast - slow) <= 1e-12);
        CHECK(std::abs(fast + normalizedDiffOfMeans(b, a)) <= 1e-12);
        CHECK(fast >= -1.0);
        CHECK(fast <= 1.0);
    }
    CHECK_THROWS_AS(normalizedDiffOfMeans({}, pool), std::invalid_argument);
}

TEST_CASE("pearson reproduces the published correlation values") {
    const double r = pearson(kComplexity, kDiffs);
    CHECK(std::abs(r - 0.44) <= 0.01);

    std::vector<double> cNoSurround(kComplexity.begin(), kComplexity.end() - 1);
    std::vector<double> dNoSurround(kDiffs.begin(), kDiffs.end() - 1);
    const double rStrong = pearson(cNoSurround, dNoSurround);
    CHECK(std::abs(rStrong - 0.71) <= 0.01);
}

TEST_CASE("pearson: linearity, symmetry, affine invariance, errors") {
    Rng rng(7);
    const auto xs = randomValues(rng, 40);
    std::vector<double> linear(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) linear[i] = 2.0 * xs[i] + 3.0;
    CHECK(pearson(xs, linear) == doctest::Approx(1.0));

    const auto ys = randomValues(rng, 40);
    CHECK(std::abs(pearson(xs, ys) - pearson(ys, xs)) <= 1e-12);

    std::vector<double> scaled(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) scaled[i] = 0.37 * xs[i] - 11.0;
    CHECK(std::abs(pearson(xs, ys) - pearson(scaled, ys)) <= 1e-12);

    CHECK_THROWS_AS(pearson({1.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(pearson({1.0, 2.0}, {2.0}), std::invalid_argument);
    CHECK_THROWS_AS(pearson({1.0, 1.0}, {2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("buildReport assembles curves, snapshots, walltime and correlation") {
    const auto dir = std::filesystem::temp_directory_path() / "duelforge_report_test";
    std::filesystem::remove_all(dir);
    const auto logs = dir / "logs";
    const auto profiles = dir / "profiles";
    const auto out = dir / "report";
    std::filesystem::create_directories(logs);
    std::filesystem::create_directories(profiles);

    Rng rng(8);
    const auto writeRun = [&](const std::string& game, const std::string& variant,
                              std::uint64_t seed, double level) {
        std::vector<train::EpisodeRecord> records;
        for (long e = 0; e < 150; ++e) {
            train::EpisodeRecord r;
            r.seed = seed;
            r.episodeIndex = e;
            r.stepsTaken = 100;
            r.totalRewardP1 = level + rng.uniformReal(-1.0, 1.0);
            r.totalRewardP2 = -r.totalRewardP1;
            r.rawScoreP1 = r.totalRewardP1;
            r.epsilonAtEnd = 0.05;
            r.wallMillis = 5;
            records.push_back(r);
        }
        train::writeEpisodeLog(
            logs / ("log_" + game + "_" + variant + "_seed" + std::to_string(seed) + ".csv"),
            records);
    };
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        writeRun("duelpong", "transferred", seed, 2.0);
        writeRun("duelpong", "scratch", seed, 0.0);
        writeRun("coopcatch", "transferred", seed, 1.0);
        writeRun("coopcatch", "scratch", seed, 1.0);
    }
    for (const auto& [game, complexity] : {std::pair{"duelpong", 150.0}, {"coopcatch", 80.0}}) {
        std::ofstream c(profiles / (std::string(game) + ".complexity.txt"));
        c << complexity << "\n";
    }

    ReportOptions options;
    options.checkpoints = {1, 50, 150};
    const int games = buildReport(logs, profiles, out, options);
    CHECK(games == 2);
    CHECK(std::filesystem::exists(out / "curves_duelpong.csv"));
    CHECK(std::filesystem::exists(out / "curves_coopcatch.csv"));
    CHECK(std::filesystem::exists(out / "snapshots.csv"));
    CHECK(std::filesystem::exists(out / "walltime.csv"));

    const std::string correlation = slurp(out / "correlation.csv");
    CHECK(correlation.find("duelpong,150,") != std::string::npos);
    CHECK(correlation.find("coopcatch,80,") != std::string::npos);
    CHECK(correlation.find("summary,,,") != std::string::npos);

    const std::string snapshots = slurp(out / "snapshots.csv");
    CHECK(snapshots.find("game,variant,ep1_mean,ep1_std,ep50_mean,ep50_std,ep150_mean,ep150_std") == 0);

    // transferred is clearly better on duelpong and a wash on coopcatch
    const std::string curveHeader = "episode,transferred,scratch";
    CHECK(slurp(out / "curves_duelpong.csv").rfind(curveHeader, 0) == 0);

    SUBCASE("regeneration is byte-identical") {
        const std::string before = slurp(out / "correlation.csv") + slurp(out / "snapshots.csv") +
                                   slurp(out / "curves_duelpong.csv");
        buildReport(logs, profiles, out, options);
        const std::string after = slurp(out / "correlation.csv") + slurp(out / "snapshots.csv") +
                                  slurp(out / "curves_duelpong.csv");
        CHECK(before == after);
    }

    SUBCASE("missing variant skips the game with a warning") {
        std::filesystem::remove(logs / "log_coopcatch_scratch_seed1.csv");
        std::filesystem::remove(logs / "log_coopcatch_scratch_seed2.csv");
        std::filesystem::remove(logs / "log_coopcatch_scratch_seed3.csv");
        const int remaining = buildReport(logs, profiles, out, options);
        CHECK(remaining == 1);
        const std::string corr = slurp(out / "correlation.csv");
        CHECK(corr.find("# skipped coopcatch: missing scratch logs") != std::string::npos);
    }

    SUBCASE("empty logs directory produces an empty report") {
        const auto emptyDir = dir / "empty";
        std::filesystem::create_directories(emptyDir);
        const int none = buildReport(emptyDir, profiles, out, options);
        CHECK(none == 0);
        CHECK(slurp(out / "correlation.csv").find("# warning: no complete game data") !=
              std::string::npos);
    }

    std::filesystem::remove_all(dir);
}

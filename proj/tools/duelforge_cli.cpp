#include "duelforge/config.hpp"
#include "duelforge/dqn.hpp"
#include "duelforge/envcore.hpp"
#include "duelforge/metrics.hpp"
#include "duelforge/neuralnet.hpp"
#include "duelforge/ramscope.hpp"
#include "duelforge/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace duelforge;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Shared flag values; std::optional keeps "not given" distinguishable so
// config-file values survive unless overridden.
struct Flags {
    std::optional<std::string> configFile;
    std::optional<std::string> game;
    std::optional<std::string> variant;
    std::optional<std::string> from;
    std::optional<std::string> out;
    std::optional<std::string> logs;
    std::optional<std::string> profiles;
    std::optional<long> steps;
    std::optional<long> episodes;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> seeds;
    std::optional<int> workers;
    std::optional<std::string> checkpoints;
};

int usageError(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kExitUsage;
}

// Config file first, then flags on top.
bool resolve(cli::AppConfig& config, const Flags& flags, const std::string& command,
             std::string& error) {
    try {
        if (flags.configFile) cli::applyConfigFile(config, *flags.configFile);
        const auto setKey = [&config](const std::string& section, const std::string& key,
                                      const std::string& value) {
            cli::applyConfigText(config, "[" + section + "]\n" + key + " = " + value, "<flag>");
        };
        if (flags.game) setKey("experiment", "game", *flags.game);
        if (flags.variant) setKey("experiment", "variant", *flags.variant);
        if (flags.seeds) setKey("experiment", "seeds", *flags.seeds);
        if (flags.episodes) {
            setKey("experiment", "two_player_episode_budget", std::to_string(*flags.episodes));
        }
        if (flags.workers) setKey("experiment", "workers", std::to_string(*flags.workers));
        if (flags.steps) {
            if (command == "analyze-ram") {
                setKey("ramscope", "rollout_steps", std::to_string(*flags.steps));
            } else {
                setKey("experiment", "single_player_steps", std::to_string(*flags.steps));
            }
        }
        if (flags.seed) {
            if (command == "analyze-ram") {
                setKey("ramscope", "rollout_seed", std::to_string(*flags.seed));
            } else {
                setKey("experiment", "pretrain_seed", std::to_string(*flags.seed));
            }
        }
        if (flags.from) setKey("paths", "from", *flags.from);
        if (flags.out) setKey("paths", "out", *flags.out);
        if (flags.logs) setKey("paths", "logs", *flags.logs);
        if (flags.profiles) setKey("paths", "profiles", *flags.profiles);
        if (flags.checkpoints) setKey("metrics", "checkpoints", *flags.checkpoints);
    } catch (const std::exception& e) {
        error = e.what();
        return false;
    }
    return true;
}

// --out, or DUELFORGE_OUT/<command>_<game> as a fallback root.
std::optional<std::filesystem::path> resolveOutDir(const cli::AppConfig& config,
                                                   const std::string& command) {
    if (!config.out.empty()) return std::filesystem::path(config.out);
    if (const char* root = std::getenv("DUELFORGE_OUT"); root && *root) {
        return std::filesystem::path(root) /
               (command + "_" + envs::gameName(config.experiment.game));
    }
    return std::nullopt;
}

int cmdPretrain(const Flags& flags) {
    cli::AppConfig config;
    std::string error;
    if (!resolve(config, flags, "pretrain", error)) return usageError(error);
    if (!config.has("experiment.game")) return usageError("pretrain: --game is required");
    const auto outDir = resolveOutDir(config, "pretrain");
    if (!outDir) return usageError("pretrain: --out is required (or set DUELFORGE_OUT)");
    config.out = outDir->string();

    try {
        std::filesystem::create_directories(*outDir);
        cli::writeConfigEcho(*outDir, config);
        const train::PretrainResult result = train::pretrainSinglePlayer(config.experiment);
        nn::saveCheckpoint(*outDir / "checkpoint.dfck", result.params);
        train::writeEpisodeLog(*outDir / "curve.csv", result.episodes);
        std::printf("pretrain %s: %ld env steps, %ld gradient steps, %zu episodes, %.1f s\n",
                    envs::gameName(config.experiment.game).c_str(), result.envSteps,
                    result.gradientSteps, result.episodes.size(),
                    static_cast<double>(result.wallMillis) / 1000.0);
        std::printf("checkpoint: %s\n", (*outDir / "checkpoint.dfck").c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "pretrain failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmdSelfplay(const Flags& flags) {
    cli::AppConfig config;
    std::string error;
    if (!resolve(config, flags, "selfplay", error)) return usageError(error);
    if (!config.has("experiment.game")) return usageError("selfplay: --game is required");
    const bool needsCheckpoint = config.variant == "transferred" || config.variant == "both";
    if (needsCheckpoint && config.from.empty()) {
        return usageError("selfplay: --variant " + config.variant +
                          " requires --from <checkpoint>");
    }
    const auto outDir = resolveOutDir(config, "selfplay");
    if (!outDir) return usageError("selfplay: --out is required (or set DUELFORGE_OUT)");
    config.out = outDir->string();

    try {
        std::filesystem::create_directories(*outDir);
        cli::writeConfigEcho(*outDir, config);

        std::optional<nn::NetworkParameters> pretrained;
        if (needsCheckpoint) pretrained = nn::loadCheckpoint(config.from);

        std::vector<train::Variant> variants;
        if (config.variant == "both") {
            variants = {train::Variant::Transferred, train::Variant::Scratch};
        } else {
            variants = {train::parseVariant(config.variant)};
        }

        const long long started = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::system_clock::now().time_since_epoch())
                                      .count();
        const auto summaries =
            train::runSeedMatrix(config.experiment, variants, pretrained ? &*pretrained : nullptr,
                                 *outDir, config.experiment.workers);
        const long long finished = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       std::chrono::system_clock::now().time_since_epoch())
                                       .count();
        train::writeManifest(*outDir / "manifest.json", config.experiment, summaries,
                             cli::configHash(config), started, finished);

        bool allOk = true;
        for (const auto& s : summaries) {
            if (s.ok) {
                std::printf("%s seed %llu: %ld episodes, %ld env steps%s, %.1f s\n",
                            s.variant.c_str(), static_cast<unsigned long long>(s.seed),
                            s.episodes, s.envSteps, s.stepCapped ? " (step cap)" : "",
                            static_cast<double>(s.wallMillis) / 1000.0);
            } else {
                allOk = false;
                std::fprintf(stderr, "%s seed %llu FAILED: %s\n", s.variant.c_str(),
                             static_cast<unsigned long long>(s.seed), s.error.c_str());
            }
        }
        return allOk ? kExitOk : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "selfplay failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmdAnalyzeRam(const Flags& flags) {
    cli::AppConfig config;
    std::string error;
    if (!resolve(config, flags, "analyze-ram", error)) return usageError(error);
    if (!config.has("experiment.game")) return usageError("analyze-ram: --game is required");
    if (config.rolloutSteps < 2) {
        return usageError("analyze-ram: temporal variation needs at least 2 steps");
    }
    const auto outDir = resolveOutDir(config, "analyze-ram");
    if (!outDir) return usageError("analyze-ram: --out is required (or set DUELFORGE_OUT)");
    config.out = outDir->string();

    try {
        std::filesystem::create_directories(*outDir);
        cli::writeConfigEcho(*outDir, config);
        const std::string game = envs::gameName(config.experiment.game);

        auto env = envs::makeEnvironment(
            config.experiment.envConfig(envs::Mode::TwoPlayer, deriveSeed(config.rolloutSeed, 1)));
        const RamTrace trace =
            envs::randomRollout(*env, config.rolloutSteps, deriveSeed(config.rolloutSeed, 2));
        envs::saveRamTrace(*outDir / (game + ".dftr"), trace);

        const auto profile = ramscope::temporalVariation(trace, config.variation);
        ramscope::renderHeatmap(profile, *outDir / game);
        const double complexity = ramscope::ramComplexity(profile);
        {
            std::ofstream out(*outDir / (game + ".complexity.txt"), std::ios::trunc);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.10g\n", complexity);
            out << buf;
            if (!out.flush()) throw std::runtime_error("cannot write complexity value");
        }
        std::printf("%s ram complexity: %.10g (%ld steps)\n", game.c_str(), complexity,
                    config.rolloutSteps);
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "analyze-ram failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmdReport(const Flags& flags) {
    cli::AppConfig config;
    std::string error;
    if (!resolve(config, flags, "report", error)) return usageError(error);
    if (config.logs.empty()) return usageError("report: --logs is required");
    const auto outDir = resolveOutDir(config, "report");
    if (!outDir) return usageError("report: --out is required (or set DUELFORGE_OUT)");
    config.out = outDir->string();

    try {
        std::filesystem::create_directories(*outDir);
        cli::writeConfigEcho(*outDir, config);
        const int games = metrics::buildReport(config.logs,
                                               config.profiles.empty()
                                                   ? std::filesystem::path(config.logs)
                                                   : std::filesystem::path(config.profiles),
                                               *outDir, config.report);
        if (games == 0) {
            std::cerr << "warning: no complete game data found; report is empty\n";
        }
        std::printf("report written to %s (%d game%s)\n", outDir->c_str(), games,
                    games == 1 ? "" : "s");
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "report failed: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duelforge: single-player to two-player transfer laboratory on byte-state games"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "duelforge 1.0.0");

    Flags flags;

    auto* pretrain = app.add_subcommand("pretrain", "train the single-player value network");
    pretrain->add_option("--config", flags.configFile, "config file");
    pretrain->add_option("--game", flags.game, "duelpong or coopcatch");
    pretrain->add_option("--steps", flags.steps, "environment step budget");
    pretrain->add_option("--seed", flags.seed, "training seed");
    pretrain->add_option("--out", flags.out, "output directory");

    auto* selfplay = app.add_subcommand("selfplay", "two-player self-play training");
    selfplay->add_option("--config", flags.configFile, "config file");
    selfplay->add_option("--game", flags.game, "duelpong or coopcatch");
    selfplay->add_option("--variant", flags.variant, "scratch, transferred or both");
    selfplay->add_option("--from", flags.from, "pretraining checkpoint (.dfck)");
    selfplay->add_option("--episodes", flags.episodes, "episode budget per seed");
    selfplay->add_option("--seeds", flags.seeds, "comma-separated seed list");
    selfplay->add_option("--workers", flags.workers, "parallel runs (1 = fully sequential)");
    selfplay->add_option("--out", flags.out, "output directory");

    auto* analyze = app.add_subcommand("analyze-ram", "random-agent trace and RAM complexity");
    analyze->add_option("--config", flags.configFile, "config file");
    analyze->add_option("--game", flags.game, "duelpong or coopcatch");
    analyze->add_option("--steps", flags.steps, "trace length (default 50000)");
    analyze->add_option("--seed", flags.seed, "rollout seed");
    analyze->add_option("--out", flags.out, "output directory");

    auto* report = app.add_subcommand("report", "assemble curves, snapshots and correlation");
    report->add_option("--config", flags.configFile, "config file");
    report->add_option("--logs", flags.logs, "directory with episode logs");
    report->add_option("--profiles", flags.profiles, "directory with complexity profiles");
    report->add_option("--checkpoints", flags.checkpoints, "snapshot episodes, comma-separated");
    report->add_option("--out", flags.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (pretrain->parsed()) return cmdPretrain(flags);
    if (selfplay->parsed()) return cmdSelfplay(flags);
    if (analyze->parsed()) return cmdAnalyzeRam(flags);
    if (report->parsed()) return cmdReport(flags);
    return kExitUsage;
}

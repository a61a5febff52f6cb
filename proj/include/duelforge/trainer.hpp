#pragma once

#include "duelforge/dqn.hpp"
#include "duelforge/envcore.hpp"
#include "duelforge/neuralnet.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace duelforge::train {

enum class Variant { Scratch, Transferred };

std::string variantName(Variant variant);
Variant parseVariant(const std::string& name);

// Everything a full experiment needs. Defaults follow the two-player
// hyperparameter column; the step budgets are desk-scale, with the
// published budgets one config edit away.
struct ExperimentConfig {
    envs::GameId game = envs::GameId::DuelPong;
    std::vector<std::uint64_t> seeds = {24, 42, 56, 99, 3000};
    std::uint64_t pretrainSeed = 99;
    long singlePlayerSteps = 300'000;
    long twoPlayerEpisodeBudget = 2'000;
    long twoPlayerStepCap = 4'000'000;
    long selfPlaySyncPeriod = 50'000;  // env steps between opponent refreshes
    double opponentEpsilon = 0.05;
    int freezeLayers = 2;
    int parallelEnvs = 10;  // single-player collection round-robin width
    long epsilonDecaySteps = 150'000;
    double epsilonFloor = 0.05;
    double epsilonDecayRate = 0.9999985;
    int workers = 2;

    // learner
    double discount = 0.99;
    double learningRateSingle = 1e-4;
    double learningRateTwo = 1e-3;
    int batchSizeSingle = 32;
    int batchSizeTwo = 256;
    std::size_t bufferSingle = 100'000;
    std::size_t bufferTwo = 500'000;
    long targetSyncPeriod = 1'000;
    double huberDelta = 1.0;
    int warmupFactor = 10;  // learning starts at warmupFactor * batch transitions
    double perAlpha = 0.6;
    double perBetaStart = 0.4;
    double perPriorityFloor = 1e-5;

    // environment
    int frameSkip = 4;
    double stickyProb = 0.25;
    int maxEpisodeSteps = 200;
    int noopMax = 0;

    envs::EnvConfig envConfig(envs::Mode mode, std::uint64_t seed) const;
    dqn::LearnerConfig learnerConfig(envs::Mode mode) const;
};

struct EpisodeRecord {
    std::uint64_t seed = 0;
    long episodeIndex = 0;
    int stepsTaken = 0;
    double totalRewardP1 = 0.0;  // clipped per-step rewards, summed
    double totalRewardP2 = 0.0;
    double rawScoreP1 = 0.0;  // pre-clip rewards, summed
    double epsilonAtEnd = 0.0;
    long wallMillis = 0;
};

// CSV header: seed,episode,steps,reward_p1,reward_p2,raw_score_p1,epsilon,wall_ms
void writeEpisodeLog(const std::filesystem::path& path, const std::vector<EpisodeRecord>& records);
std::vector<EpisodeRecord> readEpisodeLog(const std::filesystem::path& path);

// Test instrumentation points; all optional.
struct TrainHooks {
    // Fired right after each opponent refresh, with the env step count.
    std::function<void(long, const nn::NetworkParameters&, const nn::NetworkParameters&)>
        onOpponentSync;
    // Fired after each gradient step.
    std::function<void(long, const dqn::LearnDiagnostics&)> onLearnStep;
    // Fired for every transition entering the replay buffer.
    std::function<void(const replay::Transition&)> onPush;
    // Fired at the end of every env step with (step, online, opponent);
    // two-player only.
    std::function<void(long, const nn::NetworkParameters&, const nn::NetworkParameters&)>
        onEnvStep;
};

struct PretrainResult {
    nn::NetworkParameters params;
    std::vector<EpisodeRecord> episodes;
    long envSteps = 0;
    long gradientSteps = 0;
    long wallMillis = 0;
};

// Single-player pretraining: round-robin over parallelEnvs seeded
// environment instances feeding one learner, linear epsilon decay. Fully
// deterministic for a fixed config.
PretrainResult pretrainSinglePlayer(const ExperimentConfig& config,
                                    const TrainHooks* hooks = nullptr);

// Copies checkpoint weights, freezes the first freezeLayers layers, and
// leaves optimizer state and replay to be rebuilt by the caller.
nn::NetworkParameters transferCheckpoint(const nn::NetworkParameters& checkpoint,
                                         int freezeLayers, int expectedActionCount);

struct TwoPlayerResult {
    nn::NetworkParameters finalParams;
    std::vector<EpisodeRecord> episodes;
    long envSteps = 0;
    long gradientSteps = 0;
    long wallMillis = 0;
    bool stepCapped = false;  // step cap hit before the episode budget
};

// Self-play training of player 1 against a periodically synchronized
// snapshot of itself. startParams == nullptr trains from scratch.
TwoPlayerResult trainTwoPlayer(const ExperimentConfig& config, std::uint64_t seed,
                               const nn::NetworkParameters* startParams,
                               const TrainHooks* hooks = nullptr);

struct RunSummary {
    std::string game;
    std::string variant;
    std::uint64_t seed = 0;
    long episodes = 0;
    long envSteps = 0;
    long gradientSteps = 0;
    long wallMillis = 0;
    bool stepCapped = false;
    bool ok = false;
    std::string error;
    std::string logFile;
    std::string checkpointFile;
};

// Runs trainTwoPlayer for every (variant, seed) pair, writing one episode
// log and one checkpoint per run plus a manifest. Failed runs are recorded
// and do not abort the rest. Runs execute on `workers` threads; each run
// is single-threaded and bitwise deterministic regardless of workers.
std::vector<RunSummary> runSeedMatrix(const ExperimentConfig& config,
                                      const std::vector<Variant>& variants,
                                      const nn::NetworkParameters* pretrained,
                                      const std::filesystem::path& outDir, int workers);

void writeManifest(const std::filesystem::path& path, const ExperimentConfig& config,
                   const std::vector<RunSummary>& runs, std::uint64_t configHash,
                   long long startedMs, long long finishedMs);

// Mean raw (pre-clip) episode score of the greedy policy over `episodes`
// single-player episodes.
double evaluateGreedy(const ExperimentConfig& config, const nn::NetworkParameters& params,
                      int episodes, std::uint64_t seed);

// Same, acting uniformly at random: the baseline.
double randomPolicyScore(const ExperimentConfig& config, int episodes, std::uint64_t seed);

}  // namespace duelforge::train

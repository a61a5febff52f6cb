#include "duelforge/trainer.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace duelforge::train {

namespace {

using Clock = std::chrono::steady_clock;

long long nowMs() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// RNG stream tags, one per independent consumer of an experiment seed.
enum Stream : std::uint64_t {
    kStreamActorP1 = 1,
    kStreamSampler = 2,
    kStreamInit = 3,
    kStreamActorP2 = 4,
    kStreamEnvBase = 1000,
    kStreamEval = 2000,
};

double betaAt(double betaStart, long step, long horizon) {
    if (horizon <= 0) return 1.0;
    const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(horizon));
    return betaStart + (1.0 - betaStart) * frac;
}

}  // namespace

std::string variantName(Variant variant) {
    return variant == Variant::Scratch ? "scratch" : "transferred";
}

Variant parseVariant(const std::string& name) {
    if (name == "scratch") return Variant::Scratch;
    if (name == "transferred") return Variant::Transferred;
    throw std::invalid_argument("unknown variant: " + name);
}

envs::EnvConfig ExperimentConfig::envConfig(envs::Mode mode, std::uint64_t seed) const {
    envs::EnvConfig env;
    env.gameId = game;
    env.mode = mode;
    env.seed = seed;
    env.frameSkip = frameSkip;
    env.stickyProb = stickyProb;
    env.maxEpisodeSteps = maxEpisodeSteps;
    env.noopMax = noopMax;
    return env;
}

dqn::LearnerConfig ExperimentConfig::learnerConfig(envs::Mode mode) const {
    dqn::LearnerConfig learner;
    learner.discount = discount;
    learner.learningRate =
        mode == envs::Mode::SinglePlayer ? learningRateSingle : learningRateTwo;
    learner.batchSize = mode == envs::Mode::SinglePlayer ? batchSizeSingle : batchSizeTwo;
    learner.targetSyncPeriod = targetSyncPeriod;
    learner.huberDelta = huberDelta;
    return learner;
}

void writeEpisodeLog(const std::filesystem::path& path,
                     const std::vector<EpisodeRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write episode log: " + path.string());
    out << "seed,episode,steps,reward_p1,reward_p2,raw_score_p1,epsilon,wall_ms\n";
    for (const auto& r : records) {
        out << r.seed << "," << r.episodeIndex << "," << r.stepsTaken << ","
            << fmt(r.totalRewardP1) << "," << fmt(r.totalRewardP2) << "," << fmt(r.rawScoreP1)
            << "," << fmt(r.epsilonAtEnd) << "," << r.wallMillis << "\n";
    }
    if (!out.flush()) throw std::runtime_error("episode log write failed: " + path.string());
}

std::vector<EpisodeRecord> readEpisodeLog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open episode log: " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        line != "seed,episode,steps,reward_p1,reward_p2,raw_score_p1,epsilon,wall_ms") {
        throw std::runtime_error("episode log " + path.string() + ": bad header");
    }
    std::vector<EpisodeRecord> records;
    long lineNo = 1;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        std::istringstream ss(line);
        EpisodeRecord r;
        char c;
        if (!(ss >> r.seed >> c >> r.episodeIndex >> c >> r.stepsTaken >> c >> r.totalRewardP1 >>
              c >> r.totalRewardP2 >> c >> r.rawScoreP1 >> c >> r.epsilonAtEnd >> c >>
              r.wallMillis)) {
            throw std::runtime_error("episode log " + path.string() + ": malformed row at line " +
                                     std::to_string(lineNo));
        }
        records.push_back(r);
    }
    return records;
}

PretrainResult pretrainSinglePlayer(const ExperimentConfig& config, const TrainHooks* hooks) {
    const auto start = Clock::now();
    const std::uint64_t seed = config.pretrainSeed;

    std::vector<std::unique_ptr<envs::Environment>> workers;
    std::vector<ByteObservation> current;
    std::vector<double> episodeClipped, episodeRaw;
    std::vector<int> episodeSteps;
    workers.reserve(static_cast<std::size_t>(config.parallelEnvs));
    for (int i = 0; i < config.parallelEnvs; ++i) {
        workers.push_back(envs::makeEnvironment(config.envConfig(
            envs::Mode::SinglePlayer, deriveSeed(seed, kStreamEnvBase + static_cast<std::uint64_t>(i)))));
        current.push_back(workers.back()->reset()[0]);
        episodeClipped.push_back(0.0);
        episodeRaw.push_back(0.0);
        episodeSteps.push_back(0);
    }
    const int actionCount = workers.front()->actionCount();

    PretrainResult result;
    result.params = nn::initNetwork(actionCount, deriveSeed(seed, kStreamInit));
    if (config.singlePlayerSteps <= 0) {
        result.wallMillis = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                                  start)
                                .count();
        return result;
    }

    nn::NetworkParameters target = nn::copyWeights(result.params);
    const dqn::LearnerConfig learner = config.learnerConfig(envs::Mode::SinglePlayer);
    nn::OptimizerState opt = nn::initOptimizer(result.params, learner.learningRate);
    replay::PrioritizedBuffer buffer(config.bufferSingle, config.perAlpha,
                                     config.perPriorityFloor);
    const auto warmup = static_cast<std::size_t>(config.warmupFactor * learner.batchSize);

    Rng actRng(deriveSeed(seed, kStreamActorP1));
    Rng sampleRng(deriveSeed(seed, kStreamSampler));
    const auto schedule = dqn::EpsilonSchedule::linear(1.0, config.epsilonFloor,
                                                       config.epsilonDecaySteps);

    long envSteps = 0;
    long episodeIndex = 0;
    while (envSteps < config.singlePlayerSteps) {
        for (std::size_t w = 0; w < workers.size() && envSteps < config.singlePlayerSteps; ++w) {
            auto& env = *workers[w];
            const double epsilon = dqn::epsilonAt(schedule, envSteps);
            const int action =
                dqn::selectAction(result.params, normalizeObservation<float>(current[w]),
                                  epsilon, actRng);
            const envs::StepResult stepResult = env.step(std::span<const int>(&action, 1));
            ++envSteps;

            replay::Transition transition;
            transition.obs = current[w];
            transition.action = action;
            transition.reward = envs::clipReward(stepResult.reward[0]);
            transition.nextObs = stepResult.obs[0];
            transition.terminal = stepResult.terminal[0];
            buffer.push(transition);
            if (hooks && hooks->onPush) hooks->onPush(transition);

            episodeClipped[w] += transition.reward;
            episodeRaw[w] += stepResult.reward[0];
            episodeSteps[w] += 1;
            current[w] = stepResult.obs[0];

            if (buffer.size() >= warmup) {
                const double beta =
                    betaAt(config.perBetaStart, envSteps, config.singlePlayerSteps);
                const auto diag = dqn::learnStep(result.params, target, opt, buffer, learner,
                                                 beta, sampleRng);
                ++result.gradientSteps;
                if (hooks && hooks->onLearnStep) hooks->onLearnStep(result.gradientSteps, diag);
            }

            if (stepResult.terminal[0] || stepResult.truncated) {
                EpisodeRecord record;
                record.seed = seed;
                record.episodeIndex = episodeIndex++;
                record.stepsTaken = episodeSteps[w];
                record.totalRewardP1 = episodeClipped[w];
                record.totalRewardP2 = 0.0;
                record.rawScoreP1 = episodeRaw[w];
                record.epsilonAtEnd = dqn::epsilonAt(schedule, envSteps);
                record.wallMillis = std::chrono::duration_cast<std::chrono::milliseconds>(
                                        Clock::now() - start)
                                        .count();
                result.episodes.push_back(record);
                episodeClipped[w] = 0.0;
                episodeRaw[w] = 0.0;
                episodeSteps[w] = 0;
                current[w] = env.reset()[0];
            }
        }
    }
    result.envSteps = envSteps;
    result.wallMillis =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    return result;
}

nn::NetworkParameters transferCheckpoint(const nn::NetworkParameters& checkpoint,
                                         int freezeLayers, int expectedActionCount) {
    if (freezeLayers < 0 || freezeLayers > nn::kLayerCount) {
        throw std::invalid_argument("transferCheckpoint: freezeLayers must be in [0, 3]");
    }
    if (checkpoint.actionCount() != expectedActionCount) {
        throw std::invalid_argument(
            "transferCheckpoint: checkpoint has " + std::to_string(checkpoint.actionCount()) +
            " actions but the game needs " + std::to_string(expectedActionCount));
    }
    nn::NetworkParameters params = nn::copyWeights(checkpoint);
    for (int l = 0; l < nn::kLayerCount; ++l) {
        params.freezeMask[static_cast<std::size_t>(l)] = l < freezeLayers;
    }
    return params;
}

TwoPlayerResult trainTwoPlayer(const ExperimentConfig& config, std::uint64_t seed,
                               const nn::NetworkParameters* startParams,
                               const TrainHooks* hooks) {
    const auto start = Clock::now();
    auto env = envs::makeEnvironment(
        config.envConfig(envs::Mode::TwoPlayer, deriveSeed(seed, kStreamEnvBase)));
    const int actionCount = env->actionCount();

    TwoPlayerResult result;
    result.finalParams = startParams
                             ? nn::copyWeights(*startParams)
                             : nn::initNetwork(actionCount, deriveSeed(seed, kStreamInit));
    if (startParams && startParams->actionCount() != actionCount) {
        throw std::invalid_argument("trainTwoPlayer: start parameters do not fit the game");
    }
    nn::NetworkParameters& online = result.finalParams;
    nn::NetworkParameters target = nn::copyWeights(online);
    nn::NetworkParameters opponent = nn::copyWeights(online);

    const dqn::LearnerConfig learner = config.learnerConfig(envs::Mode::TwoPlayer);
    nn::OptimizerState opt = nn::initOptimizer(online, learner.learningRate);
    replay::PrioritizedBuffer buffer(config.bufferTwo, config.perAlpha, config.perPriorityFloor);
    const auto warmup = static_cast<std::size_t>(config.warmupFactor * learner.batchSize);

    Rng p1Rng(deriveSeed(seed, kStreamActorP1));
    Rng p2Rng(deriveSeed(seed, kStreamActorP2));
    Rng sampleRng(deriveSeed(seed, kStreamSampler));
    const auto schedule = dqn::EpsilonSchedule::multiplicative(1.0, config.epsilonFloor,
                                                               config.epsilonDecayRate);
    const long betaHorizon =
        std::min(config.twoPlayerStepCap,
                 config.twoPlayerEpisodeBudget * static_cast<long>(config.maxEpisodeSteps));

    std::array<ByteObservation, 2> current = env->reset();
    double episodeClipped1 = 0.0, episodeClipped2 = 0.0, episodeRaw1 = 0.0;
    int episodeSteps = 0;
    long envSteps = 0;
    long episodeIndex = 0;

    while (episodeIndex < config.twoPlayerEpisodeBudget && envSteps < config.twoPlayerStepCap) {
        const double eps1 = dqn::epsilonAt(schedule, envSteps);
        const std::array<int, 2> actions = {
            dqn::selectAction(online, normalizeObservation<float>(current[0]), eps1, p1Rng),
            dqn::selectAction(opponent, normalizeObservation<float>(current[1]),
                              config.opponentEpsilon, p2Rng)};
        const envs::StepResult stepResult = env->step(std::span<const int>(actions.data(), 2));
        ++envSteps;

        // Only the player's own experience feeds the learner.
        replay::Transition transition;
        transition.obs = current[0];
        transition.action = actions[0];
        transition.reward = envs::clipReward(stepResult.reward[0]);
        transition.nextObs = stepResult.obs[0];
        transition.terminal = stepResult.terminal[0];
        transition.sourcePlayer = 0;
        buffer.push(transition);
        if (hooks && hooks->onPush) hooks->onPush(transition);

        episodeClipped1 += transition.reward;
        episodeClipped2 += envs::clipReward(stepResult.reward[1]);
        episodeRaw1 += stepResult.reward[0];
        episodeSteps += 1;
        current = stepResult.obs;

        if (buffer.size() >= warmup) {
            const double beta = betaAt(config.perBetaStart, envSteps, betaHorizon);
            const auto diag =
                dqn::learnStep(online, target, opt, buffer, learner, beta, sampleRng);
            ++result.gradientSteps;
            if (hooks && hooks->onLearnStep) hooks->onLearnStep(result.gradientSteps, diag);
        }

        if (config.selfPlaySyncPeriod > 0 && envSteps % config.selfPlaySyncPeriod == 0) {
            opponent = nn::copyWeights(online);
            if (hooks && hooks->onOpponentSync) hooks->onOpponentSync(envSteps, online, opponent);
        }
        if (hooks && hooks->onEnvStep) hooks->onEnvStep(envSteps, online, opponent);

        if (stepResult.terminal[0] || stepResult.truncated) {
            EpisodeRecord record;
            record.seed = seed;
            record.episodeIndex = episodeIndex++;
            record.stepsTaken = episodeSteps;
            record.totalRewardP1 = episodeClipped1;
            record.totalRewardP2 = episodeClipped2;
            record.rawScoreP1 = episodeRaw1;
            record.epsilonAtEnd = dqn::epsilonAt(schedule, envSteps);
            record.wallMillis =
                std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start)
                    .count();
            result.episodes.push_back(record);
            episodeClipped1 = episodeClipped2 = episodeRaw1 = 0.0;
            episodeSteps = 0;
            current = env->reset();
        }
    }
    result.envSteps = envSteps;
    result.stepCapped = episodeIndex < config.twoPlayerEpisodeBudget;
    result.wallMillis =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    return result;
}

std::vector<RunSummary> runSeedMatrix(const ExperimentConfig& config,
                                      const std::vector<Variant>& variants,
                                      const nn::NetworkParameters* pretrained,
                                      const std::filesystem::path& outDir, int workers) {
    std::filesystem::create_directories(outDir);
    const std::string game = envs::gameName(config.game);

    struct Task {
        Variant variant;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (Variant variant : variants) {
        if (variant == Variant::Transferred && pretrained == nullptr) {
            throw std::invalid_argument("runSeedMatrix: transferred variant needs a checkpoint");
        }
        for (std::uint64_t seed : config.seeds) tasks.push_back({variant, seed});
    }

    std::vector<RunSummary> summaries(tasks.size());
    std::atomic<std::size_t> next{0};
    const int threadCount = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));

    const auto runOne = [&](std::size_t taskIndex) {
        const Task& task = tasks[taskIndex];
        RunSummary& summary = summaries[taskIndex];
        summary.game = game;
        summary.variant = variantName(task.variant);
        summary.seed = task.seed;
        try {
            std::optional<nn::NetworkParameters> startParams;
            if (task.variant == Variant::Transferred) {
                auto probe = envs::makeEnvironment(config.envConfig(envs::Mode::TwoPlayer, 0));
                startParams = transferCheckpoint(*pretrained, config.freezeLayers,
                                                 probe->actionCount());
            }
            const TwoPlayerResult run = trainTwoPlayer(
                config, task.seed, startParams ? &*startParams : nullptr, nullptr);

            const std::string stem =
                game + "_" + summary.variant + "_seed" + std::to_string(task.seed);
            summary.logFile = "log_" + stem + ".csv";
            summary.checkpointFile = "ckpt_" + stem + ".dfck";
            writeEpisodeLog(outDir / summary.logFile, run.episodes);
            nn::saveCheckpoint(outDir / summary.checkpointFile, run.finalParams);
            summary.episodes = static_cast<long>(run.episodes.size());
            summary.envSteps = run.envSteps;
            summary.gradientSteps = run.gradientSteps;
            summary.wallMillis = run.wallMillis;
            summary.stepCapped = run.stepCapped;
            summary.ok = true;
        } catch (const std::exception& e) {
            summary.ok = false;
            summary.error = e.what();
        }
    };

    if (threadCount == 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) runOne(i);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threadCount));
        for (int t = 0; t < threadCount; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                    runOne(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return summaries;
}

void writeManifest(const std::filesystem::path& path, const ExperimentConfig& config,
                   const std::vector<RunSummary>& runs, std::uint64_t configHash,
                   long long startedMs, long long finishedMs) {
    nlohmann::json manifest;
    manifest["tool"] = "duelforge";
    manifest["format_version"] = 1;
    manifest["config_hash"] = configHash;
    manifest["started_ms"] = startedMs;
    manifest["finished_ms"] = finishedMs == 0 ? nowMs() : finishedMs;
    manifest["game"] = envs::gameName(config.game);
    manifest["episode_budget"] = config.twoPlayerEpisodeBudget;
    manifest["step_cap"] = config.twoPlayerStepCap;
    manifest["selfplay_sync_period"] = config.selfPlaySyncPeriod;
    manifest["freeze_layers"] = config.freezeLayers;
    manifest["seeds"] = config.seeds;

    nlohmann::json runList = nlohmann::json::array();
    long long totalWall = 0;
    for (const auto& run : runs) {
        nlohmann::json entry;
        entry["game"] = run.game;
        entry["variant"] = run.variant;
        entry["seed"] = run.seed;
        entry["status"] = run.ok ? "ok" : "failed";
        if (!run.ok) entry["error"] = run.error;
        if (run.stepCapped) entry["note"] = "step cap reached before episode budget";
        entry["episodes"] = run.episodes;
        entry["env_steps"] = run.envSteps;
        entry["gradient_steps"] = run.gradientSteps;
        entry["wall_ms"] = run.wallMillis;
        entry["log"] = run.logFile;
        entry["checkpoint"] = run.checkpointFile;
        runList.push_back(entry);
        totalWall += run.wallMillis;
    }
    manifest["runs"] = runList;
    manifest["total_wall_ms"] = totalWall;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    out << manifest.dump(2) << "\n";
}

namespace {

double meanEpisodeScore(const ExperimentConfig& config, const nn::NetworkParameters* params,
                        int episodes, std::uint64_t seed) {
    auto env = envs::makeEnvironment(
        config.envConfig(envs::Mode::SinglePlayer, deriveSeed(seed, kStreamEval)));
    Rng rng(deriveSeed(seed, kStreamEval + 1));
    const auto actions = static_cast<std::uint32_t>(env->actionCount());
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        ByteObservation obs = env->reset()[0];
        while (!env->episodeOver()) {
            const int action =
                params ? dqn::selectAction(*params, normalizeObservation<float>(obs), 0.0, rng)
                       : static_cast<int>(rng.uniformInt(actions));
            const envs::StepResult step = env->step(std::span<const int>(&action, 1));
            total += step.reward[0];
            obs = step.obs[0];
        }
    }
    return total / static_cast<double>(episodes);
}

}  // namespace

double evaluateGreedy(const ExperimentConfig& config, const nn::NetworkParameters& params,
                      int episodes, std::uint64_t seed) {
    return meanEpisodeScore(config, &params, episodes, seed);
}

double randomPolicyScore(const ExperimentConfig& config, int episodes, std::uint64_t seed) {
    return meanEpisodeScore(config, nullptr, episodes, seed);
}

}  // namespace duelforge::train

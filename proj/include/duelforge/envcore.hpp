#pragma once

#include "duelforge/rng.hpp"
#include "duelforge/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace duelforge::envs {

enum class GameId { DuelPong, CoopCatch };
enum class Mode { SinglePlayer, TwoPlayer };

std::string gameName(GameId id);
GameId parseGameId(const std::string& name);

struct EnvConfig {
    GameId gameId = GameId::DuelPong;
    Mode mode = Mode::TwoPlayer;
    std::uint64_t seed = 0;
    int frameSkip = 4;
    double stickyProb = 0.25;
    int maxEpisodeSteps = 200;
    int noopMax = 0;
};

struct StepResult {
    std::array<ByteObservation, 2> obs{};
    std::array<double, 2> reward{0.0, 0.0};  // pre-clip
    std::array<bool, 2> terminal{false, false};
    bool truncated = false;
};

// Disjoint byte-index pairs exchanged to rebuild player 2's observation as
// if player 1 were playing. Applying the swap twice is the identity.
struct AnnotationMap {
    std::vector<std::pair<int, int>> swapPairs;
};

void validateAnnotationMap(const AnnotationMap& map);
AnnotationMap loadAnnotationMap(const std::filesystem::path& path);
void saveAnnotationMap(const std::filesystem::path& path, const AnnotationMap& map);

AnnotationMap duelPongAnnotations();
AnnotationMap coopCatchAnnotations();

ByteObservation reconstructForPlayer2(const ByteObservation& obs, const AnnotationMap& map);

inline float clipReward(double reward) {
    return static_cast<float>(reward < -1.0 ? -1.0 : (reward > 1.0 ? 1.0 : reward));
}

// Reward clamp plus byte/255 scaling, as one call for the wrapper contract.
std::pair<float, Eigen::Matrix<float, kObsBytes, 1>> clipAndNormalize(
    double reward, const ByteObservation& obs);

// A seeded, fully deterministic environment with the Atari-style
// preprocessing already applied: sticky actions, frame skip, the episode
// step cap, optional no-op resets, and episode end for all players once
// any player terminates. In two-player mode obs[1] is the agent-indicated
// (byte-swapped) view; obs[0] is always the raw state.
class Environment {
public:
    virtual ~Environment() = default;

    virtual int actionCount() const = 0;
    virtual int playerCount() const = 0;
    virtual const AnnotationMap& annotationMap() const = 0;
    virtual const EnvConfig& config() const = 0;

    virtual std::array<ByteObservation, 2> reset() = 0;
    virtual StepResult step(std::span<const int> actions) = 0;
    virtual bool episodeOver() const = 0;
};

std::unique_ptr<Environment> makeEnvironment(const EnvConfig& config);

// Uniform-random play for `steps` env steps with auto-reset, recording
// player 1's raw observation after every step.
RamTrace randomRollout(Environment& env, long steps, std::uint64_t seed);

// Trace file: "DFTR", version u16=1, rows u32, cols u16=128, raw bytes.
void saveRamTrace(const std::filesystem::path& path, const RamTrace& trace);
RamTrace loadRamTrace(const std::filesystem::path& path);

}  // namespace duelforge::envs

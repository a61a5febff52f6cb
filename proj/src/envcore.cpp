#include "duelforge/envcore.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace duelforge::envs {

std::string gameName(GameId id) {
    switch (id) {
        case GameId::DuelPong: return "duelpong";
        case GameId::CoopCatch: return "coopcatch";
    }
    return "unknown";
}

GameId parseGameId(const std::string& name) {
    if (name == "duelpong") return GameId::DuelPong;
    if (name == "coopcatch") return GameId::CoopCatch;
    throw std::invalid_argument("unknown game id: " + name);
}

void validateAnnotationMap(const AnnotationMap& map) {
    std::array<bool, kObsBytes> seen{};
    for (const auto& [i, j] : map.swapPairs) {
        if (i < 0 || i >= kObsBytes || j < 0 || j >= kObsBytes) {
            throw std::invalid_argument("annotation map: index out of [0,128)");
        }
        if (i == j) throw std::invalid_argument("annotation map: pair with equal indices");
        if (seen[static_cast<std::size_t>(i)] || seen[static_cast<std::size_t>(j)]) {
            throw std::invalid_argument("annotation map: index used twice");
        }
        seen[static_cast<std::size_t>(i)] = seen[static_cast<std::size_t>(j)] = true;
    }
}

AnnotationMap loadAnnotationMap(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotation map: " + path.string());
    AnnotationMap map;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        int i, j;
        if (ss >> i >> j) map.swapPairs.emplace_back(i, j);
    }
    validateAnnotationMap(map);
    return map;
}

void saveAnnotationMap(const std::filesystem::path& path, const AnnotationMap& map) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write annotation map: " + path.string());
    out << "# byte index pairs swapped for player 2's view\n";
    for (const auto& [i, j] : map.swapPairs) out << i << " " << j << "\n";
}

AnnotationMap duelPongAnnotations() { return {{{0, 3}, {1, 4}, {2, 5}}}; }
AnnotationMap coopCatchAnnotations() { return {{{0, 1}}}; }

ByteObservation reconstructForPlayer2(const ByteObservation& obs, const AnnotationMap& map) {
    ByteObservation out = obs;
    for (const auto& [i, j] : map.swapPairs) {
        std::swap(out[static_cast<std::size_t>(i)], out[static_cast<std::size_t>(j)]);
    }
    return out;
}

std::pair<float, Eigen::Matrix<float, kObsBytes, 1>> clipAndNormalize(
    double reward, const ByteObservation& obs) {
    return {clipReward(reward), normalizeObservation<float>(obs)};
}

namespace {

struct TickResult {
    std::array<double, 2> reward{0.0, 0.0};
    bool terminal = false;
};

class GameSim {
public:
    virtual ~GameSim() = default;
    virtual int actionCount() const = 0;
    virtual void reset(Rng& rng) = 0;
    virtual TickResult tick(std::array<int, 2> actions, Rng& rng) = 0;
    virtual ByteObservation observe() const = 0;
};

// Competitive paddle game. Field 160x192, paddles of height 24 at columns
// 8 and 151, point ball, first to 5 points. Actions: NOOP, UP, DOWN, FIRE.
class DuelPongSim final : public GameSim {
public:
    static constexpr int kNoop = 0, kUp = 1, kDown = 2, kFire = 3;

    explicit DuelPongSim(Mode mode) : mode_(mode) {}

    int actionCount() const override { return 4; }

    void reset(Rng& rng) override {
        p1y_ = p2y_ = 84;
        score1_ = score2_ = 0;
        tick_ = 0;
        lastA1_ = lastA2_ = kNoop;
        beginServe(1 + static_cast<int>(rng.uniformInt(2)));
    }

    TickResult tick(std::array<int, 2> actions, Rng& rng) override {
        TickResult result;
        movePaddle(p1y_, actions[0]);
        lastA1_ = actions[0];
        if (mode_ == Mode::TwoPlayer) {
            movePaddle(p2y_, actions[1]);
            lastA2_ = actions[1];
        } else {
            trackBall();
        }

        if (server_ != 0) {
            const bool fired = (server_ == 1 && actions[0] == kFire) ||
                               (server_ == 2 && mode_ == Mode::TwoPlayer && actions[1] == kFire);
            if (fired || serveTicks_ == 0) {
                vx_ = server_ == 1 ? 2 : -2;
                static constexpr int kServeVy[4] = {-2, -1, 1, 2};
                vy_ = kServeVy[rng.uniformInt(4)];
                server_ = 0;
            } else {
                --serveTicks_;
            }
        }

        if (server_ == 0) {
            const int prevX = ballX_;
            ballX_ += vx_;
            ballY_ += vy_;
            if (ballY_ < 0) {
                ballY_ = -ballY_;
                vy_ = -vy_;
            } else if (ballY_ > 191) {
                ballY_ = 382 - ballY_;
                vy_ = -vy_;
            }
            if (vx_ < 0 && prevX > 8 && ballX_ <= 8) {
                const int rel = ballY_ - p1y_;
                if (rel >= 0 && rel < 24) {
                    ballX_ = 16 - ballX_;
                    vx_ = 2;
                    vy_ = bounceVy(rel);
                }
            } else if (vx_ > 0 && prevX < 151 && ballX_ >= 151) {
                const int rel = ballY_ - p2y_;
                if (rel >= 0 && rel < 24) {
                    ballX_ = 302 - ballX_;
                    vx_ = -2;
                    vy_ = bounceVy(rel);
                }
            }
            if (ballX_ < 0) {
                ++score2_;
                result.reward[0] -= 1.0;
                result.reward[1] += 1.0;
                if (score2_ >= 5) result.terminal = true;
                beginServe(1);  // ball returns to center even on the final point
            } else if (ballX_ > 159) {
                ++score1_;
                result.reward[0] += 1.0;
                result.reward[1] -= 1.0;
                if (score1_ >= 5) result.terminal = true;
                beginServe(2);
            }
        }
        ++tick_;
        return result;
    }

    ByteObservation observe() const override {
        ByteObservation obs{};
        obs[0] = static_cast<std::uint8_t>(p1y_);
        obs[1] = static_cast<std::uint8_t>(score1_);
        obs[2] = static_cast<std::uint8_t>(lastA1_);
        obs[3] = static_cast<std::uint8_t>(p2y_);
        obs[4] = static_cast<std::uint8_t>(score2_);
        obs[5] = static_cast<std::uint8_t>(lastA2_);
        obs[6] = static_cast<std::uint8_t>(server_ != 0 ? 80 : ballX_);
        obs[7] = static_cast<std::uint8_t>(server_ != 0 ? 96 : ballY_);
        obs[8] = static_cast<std::uint8_t>((server_ != 0 ? 0 : vx_) + 128);
        obs[9] = static_cast<std::uint8_t>((server_ != 0 ? 0 : vy_) + 128);
        obs[10] = static_cast<std::uint8_t>(tick_ & 0xff);
        obs[11] = static_cast<std::uint8_t>(server_);
        return obs;
    }

private:
    static void movePaddle(int& y, int action) {
        if (action == kUp) y = std::max(0, y - 4);
        else if (action == kDown) y = std::min(168, y + 4);
    }

    // Scripted single-player opponent: paddle center chases ball_y at
    // up to 3 px/tick. Its synthesized action keeps byte 5 meaningful.
    void trackBall() {
        const int target = server_ != 0 ? 96 : ballY_;
        const int delta = std::clamp(target - (p2y_ + 12), -3, 3);
        p2y_ = std::clamp(p2y_ + delta, 0, 168);
        lastA2_ = delta < 0 ? kUp : (delta > 0 ? kDown : kNoop);
    }

    // Contact thirds: top sends the ball up hard, middle keeps the
    // incoming vertical sign at unit speed, bottom sends it down hard.
    int bounceVy(int rel) const {
        if (rel < 8) return -2;
        if (rel < 16) return vy_ < 0 ? -1 : 1;
        return 2;
    }

    void beginServe(int who) {
        ballX_ = 80;
        ballY_ = 96;
        vx_ = vy_ = 0;
        server_ = who;
        serveTicks_ = 20;
    }

    Mode mode_;
    int p1y_ = 84, p2y_ = 84;
    int score1_ = 0, score2_ = 0;
    int ballX_ = 80, ballY_ = 96;
    int vx_ = 0, vy_ = 0;
    int server_ = 0;
    int serveTicks_ = 0;
    int lastA1_ = 0, lastA2_ = 0;
    long tick_ = 0;
};

// Cooperative catching game. Field width 160, two catchers of width 16,
// one falling object at a time, shared miss budget of 3. Actions: NOOP,
// LEFT, RIGHT.
class CoopCatchSim final : public GameSim {
public:
    static constexpr int kNoop = 0, kLeft = 1, kRight = 2;

    explicit CoopCatchSim(Mode mode) : mode_(mode) {}

    int actionCount() const override { return 3; }

    void reset(Rng& rng) override {
        p1x_ = 40;
        p2x_ = 104;
        score_ = 0;
        misses_ = 0;
        tick_ = 0;
        lastA1_ = lastA2_ = kNoop;
        spawn(rng);
    }

    TickResult tick(std::array<int, 2> actions, Rng& rng) override {
        TickResult result;
        moveCatcher(p1x_, actions[0]);
        lastA1_ = actions[0];
        if (mode_ == Mode::TwoPlayer) {
            moveCatcher(p2x_, actions[1]);
            lastA2_ = actions[1];
        } else {
            const int delta = std::clamp(objX_ - (p2x_ + 8), -3, 3);
            p2x_ = std::clamp(p2x_ + delta, 0, 144);
            lastA2_ = delta < 0 ? kLeft : (delta > 0 ? kRight : kNoop);
        }

        objY_ += 2;
        if (objY_ >= 184) {
            const bool caught = (objX_ >= p1x_ && objX_ <= p1x_ + 15) ||
                                (objX_ >= p2x_ && objX_ <= p2x_ + 15);
            if (caught) {
                ++score_;
                result.reward[0] += 1.0;
                result.reward[1] += 1.0;
            } else {
                ++misses_;
                if (misses_ >= 3) result.terminal = true;
            }
            spawn(rng);
        }
        ++tick_;
        return result;
    }

    ByteObservation observe() const override {
        ByteObservation obs{};
        obs[0] = static_cast<std::uint8_t>(p1x_);
        obs[1] = static_cast<std::uint8_t>(p2x_);
        obs[2] = static_cast<std::uint8_t>(objX_);
        obs[3] = static_cast<std::uint8_t>(objY_);
        obs[4] = static_cast<std::uint8_t>(score_ & 0xff);
        obs[5] = static_cast<std::uint8_t>(misses_);
        obs[6] = static_cast<std::uint8_t>(tick_ & 0xff);
        return obs;
    }

private:
    static void moveCatcher(int& x, int action) {
        if (action == kLeft) x = std::max(0, x - 4);
        else if (action == kRight) x = std::min(144, x + 4);
    }

    void spawn(Rng& rng) {
        objX_ = static_cast<int>(rng.uniformInt(160));
        objY_ = 0;
    }

    Mode mode_;
    int p1x_ = 40, p2x_ = 104;
    int objX_ = 0, objY_ = 0;
    long score_ = 0;
    int misses_ = 0;
    int lastA1_ = 0, lastA2_ = 0;
    long tick_ = 0;
};

std::unique_ptr<GameSim> makeSim(GameId id, Mode mode) {
    switch (id) {
        case GameId::DuelPong: return std::make_unique<DuelPongSim>(mode);
        case GameId::CoopCatch: return std::make_unique<CoopCatchSim>(mode);
    }
    throw std::invalid_argument("makeSim: unknown game");
}

class PreprocessedEnv final : public Environment {
public:
    explicit PreprocessedEnv(const EnvConfig& config)
        : config_(config),
          sim_(makeSim(config.gameId, config.mode)),
          annotations_(config.gameId == GameId::DuelPong ? duelPongAnnotations()
                                                         : coopCatchAnnotations()),
          rng_(config.seed) {
        if (config_.frameSkip < 1) throw std::invalid_argument("frameSkip must be >= 1");
        if (config_.stickyProb < 0.0 || config_.stickyProb >= 1.0) {
            throw std::invalid_argument("stickyProb must be in [0, 1)");
        }
        reset();
    }

    int actionCount() const override { return sim_->actionCount(); }
    int playerCount() const override { return config_.mode == Mode::TwoPlayer ? 2 : 1; }
    const AnnotationMap& annotationMap() const override { return annotations_; }
    const EnvConfig& config() const override { return config_; }

    std::array<ByteObservation, 2> reset() override {
        sim_->reset(rng_);
        if (config_.noopMax > 0) {
            const auto noops = rng_.uniformInt(static_cast<std::uint32_t>(config_.noopMax) + 1);
            for (std::uint32_t k = 0; k < noops; ++k) {
                if (sim_->tick({0, 0}, rng_).terminal) {
                    sim_->reset(rng_);  // a no-op run ending the game restarts it
                    break;
                }
            }
        }
        steps_ = 0;
        lastEffective_ = {0, 0};
        episodeOver_ = false;
        return observations();
    }

    StepResult step(std::span<const int> actions) override {
        if (episodeOver_) throw std::logic_error("step: episode is over, call reset");
        const int players = playerCount();
        if (static_cast<int>(actions.size()) != players) {
            throw std::invalid_argument("step: expected one action per controlled player");
        }
        std::array<int, 2> effective{0, 0};
        for (int p = 0; p < players; ++p) {
            const int a = actions[static_cast<std::size_t>(p)];
            if (a < 0 || a >= sim_->actionCount()) {
                throw std::invalid_argument("step: action out of range");
            }
            const bool sticky = rng_.uniformReal() < config_.stickyProb;
            effective[static_cast<std::size_t>(p)] =
                sticky ? lastEffective_[static_cast<std::size_t>(p)] : a;
            lastEffective_[static_cast<std::size_t>(p)] =
                effective[static_cast<std::size_t>(p)];
        }

        StepResult result;
        for (int k = 0; k < config_.frameSkip; ++k) {
            const TickResult tr = sim_->tick(effective, rng_);
            result.reward[0] += tr.reward[0];
            result.reward[1] += tr.reward[1];
            if (tr.terminal) {
                result.terminal = {true, true};  // one player's end ends the episode for all
                break;
            }
        }
        ++steps_;
        result.truncated = !result.terminal[0] && steps_ >= config_.maxEpisodeSteps;
        episodeOver_ = result.terminal[0] || result.truncated;
        result.obs = observations();
        return result;
    }

    bool episodeOver() const override { return episodeOver_; }

private:
    std::array<ByteObservation, 2> observations() const {
        std::array<ByteObservation, 2> out;
        out[0] = sim_->observe();
        out[1] = config_.mode == Mode::TwoPlayer ? reconstructForPlayer2(out[0], annotations_)
                                                 : out[0];
        return out;
    }

    EnvConfig config_;
    std::unique_ptr<GameSim> sim_;
    AnnotationMap annotations_;
    Rng rng_;
    int steps_ = 0;
    std::array<int, 2> lastEffective_{0, 0};
    bool episodeOver_ = false;
};

}  // namespace

std::unique_ptr<Environment> makeEnvironment(const EnvConfig& config) {
    return std::make_unique<PreprocessedEnv>(config);
}

RamTrace randomRollout(Environment& env, long steps, std::uint64_t seed) {
    if (env.playerCount() != 2) {
        throw std::invalid_argument("randomRollout requires a two-player environment");
    }
    if (steps < 1) throw std::invalid_argument("randomRollout: steps must be positive");
    Rng actionRng(seed);
    RamTrace trace(steps, kObsBytes);
    env.reset();
    const auto actions = static_cast<std::uint32_t>(env.actionCount());
    for (long t = 0; t < steps; ++t) {
        if (env.episodeOver()) env.reset();
        const std::array<int, 2> a = {static_cast<int>(actionRng.uniformInt(actions)),
                                      static_cast<int>(actionRng.uniformInt(actions))};
        const StepResult result = env.step(std::span<const int>(a.data(), 2));
        for (int i = 0; i < kObsBytes; ++i) {
            trace(t, i) = result.obs[0][static_cast<std::size_t>(i)];
        }
    }
    return trace;
}

void saveRamTrace(const std::filesystem::path& path, const RamTrace& trace) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open trace for writing: " + path.string());
    const char magic[4] = {'D', 'F', 'T', 'R'};
    out.write(magic, 4);
    const std::uint16_t version = 1;
    const auto rows = static_cast<std::uint32_t>(trace.rows());
    const std::uint16_t cols = kObsBytes;
    out.write(reinterpret_cast<const char*>(&version), 2);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 2);
    out.write(reinterpret_cast<const char*>(trace.data()),
              static_cast<std::streamsize>(trace.size()));
    if (!out) throw std::runtime_error("trace write failed: " + path.string());
}

RamTrace loadRamTrace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open trace: " + path.string());
    char magic[4];
    std::uint16_t version = 0, cols = 0;
    std::uint32_t rows = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 2);
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 2);
    if (!in || std::memcmp(magic, "DFTR", 4) != 0) {
        throw std::runtime_error("trace: bad header in " + path.string());
    }
    if (version != 1) throw std::runtime_error("trace: unsupported version");
    if (cols != kObsBytes) throw std::runtime_error("trace: column count is not 128");
    RamTrace trace(rows, kObsBytes);
    in.read(reinterpret_cast<char*>(trace.data()), static_cast<std::streamsize>(trace.size()));
    if (!in) throw std::runtime_error("trace: truncated payload in " + path.string());
    return trace;
}

}  // namespace duelforge::envs

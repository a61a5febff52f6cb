#include "duelforge/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace duelforge::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

long asLong(const std::string& v) {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an integer: " + v);
    return out;
}

std::uint64_t asU64(const std::string& v) {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("not an unsigned integer: " + v);
    return out;
}

double asDouble(const std::string& v) {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("not a number: " + v);
    return out;
}

bool asBool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("not a boolean: " + v);
}

template <class T>
std::vector<T> asList(const std::string& v, T (*one)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(one(item));
    }
    if (out.empty()) throw std::invalid_argument("empty list");
    return out;
}

std::string joinU64(const std::vector<std::uint64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

std::string joinLong(const std::vector<long>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

struct Entry {
    std::string section;
    std::string key;
    std::function<void(AppConfig&, const std::string&)> set;
    std::function<std::string(const AppConfig&)> get;
};

const std::vector<Entry>& registry() {
    static const std::vector<Entry> entries = [] {
        std::vector<Entry> r;
        const auto add = [&r](const std::string& section, const std::string& key, auto set,
                              auto get) { r.push_back({section, key, set, get}); };

        add("experiment", "game",
            [](AppConfig& c, const std::string& v) { c.experiment.game = envs::parseGameId(v); },
            [](const AppConfig& c) { return envs::gameName(c.experiment.game); });
        add("experiment", "variant",
            [](AppConfig& c, const std::string& v) {
                if (v != "scratch" && v != "transferred" && v != "both") {
                    throw std::invalid_argument("variant must be scratch, transferred or both");
                }
                c.variant = v;
            },
            [](const AppConfig& c) { return c.variant; });
        add("experiment", "seeds",
            [](AppConfig& c, const std::string& v) { c.experiment.seeds = asList(v, asU64); },
            [](const AppConfig& c) { return joinU64(c.experiment.seeds); });
        add("experiment", "pretrain_seed",
            [](AppConfig& c, const std::string& v) { c.experiment.pretrainSeed = asU64(v); },
            [](const AppConfig& c) { return std::to_string(c.experiment.pretrainSeed); });
        add("experiment", "single_player_steps",
            [](AppConfig& c, const std::string& v) { c.experiment.singlePlayerSteps = asLong(v); },
            [](const AppConfig& c) { return std::to_string(c.experiment.singlePlayerSteps); });
        add("experiment", "two_player_episode_budget",
            [](AppConfig& c, const std::string& v) {
                c.experiment.twoPlayerEpisodeBudget = asLong(v);
            },
            [](const AppConfig& c) {
                return std::to_string(c.experiment.twoPlayerEpisodeBudget);
            });
        add("experiment", "two_player_step_cap",
            [](AppConfig& c, const std::string& v) { c.experiment.twoPlayerStepCap = asLong(v); },
            [](const AppConfig& c) { return std::to_string(c.experiment.twoPlayerStepCap); });
        add("experiment", "selfplay_sync_period",
            [](AppConfig& c, const std::string& v) {
                c.experiment.selfPlaySyncPeriod = asLong(v);
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.selfPlaySyncPeriod); });
        add("experiment", "opponent_epsilon",
            [](AppConfig& c, const std::string& v) { c.experiment.opponentEpsilon = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.opponentEpsilon); });
        add("experiment", "freeze_layers",
            [](AppConfig& c, const std::string& v) {
                c.experiment.freezeLayers = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.freezeLayers); });
        add("experiment", "parallel_envs",
            [](AppConfig& c, const std::string& v) {
                c.experiment.parallelEnvs = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.parallelEnvs); });
        add("experiment", "epsilon_decay_steps",
            [](AppConfig& c, const std::string& v) { c.experiment.epsilonDecaySteps = asLong(v); },
            [](const AppConfig& c) { return std::to_string(c.experiment.epsilonDecaySteps); });
        add("experiment", "workers",
            [](AppConfig& c, const std::string& v) {
                c.experiment.workers = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.workers); });

        add("learner", "discount",
            [](AppConfig& c, const std::string& v) { c.experiment.discount = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.discount); });
        add("learner", "learning_rate_single",
            [](AppConfig& c, const std::string& v) {
                c.experiment.learningRateSingle = asDouble(v);
            },
            [](const AppConfig& c) { return fmt(c.experiment.learningRateSingle); });
        add("learner", "learning_rate_two",
            [](AppConfig& c, const std::string& v) { c.experiment.learningRateTwo = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.learningRateTwo); });
        add("learner", "batch_size_single",
            [](AppConfig& c, const std::string& v) {
                c.experiment.batchSizeSingle = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.batchSizeSingle); });
        add("learner", "batch_size_two",
            [](AppConfig& c, const std::string& v) {
                c.experiment.batchSizeTwo = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.batchSizeTwo); });
        add("learner", "buffer_single",
            [](AppConfig& c, const std::string& v) {
                c.experiment.bufferSingle = static_cast<std::size_t>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.bufferSingle); });
        add("learner", "buffer_two",
            [](AppConfig& c, const std::string& v) {
                c.experiment.bufferTwo = static_cast<std::size_t>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.bufferTwo); });
        add("learner", "target_sync_period",
            [](AppConfig& c, const std::string& v) { c.experiment.targetSyncPeriod = asLong(v); },
            [](const AppConfig& c) { return std::to_string(c.experiment.targetSyncPeriod); });
        add("learner", "huber_delta",
            [](AppConfig& c, const std::string& v) { c.experiment.huberDelta = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.huberDelta); });
        add("learner", "warmup_factor",
            [](AppConfig& c, const std::string& v) {
                c.experiment.warmupFactor = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.warmupFactor); });
        add("learner", "per_alpha",
            [](AppConfig& c, const std::string& v) { c.experiment.perAlpha = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.perAlpha); });
        add("learner", "per_beta_start",
            [](AppConfig& c, const std::string& v) { c.experiment.perBetaStart = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.perBetaStart); });
        add("learner", "per_priority_floor",
            [](AppConfig& c, const std::string& v) {
                c.experiment.perPriorityFloor = asDouble(v);
            },
            [](const AppConfig& c) { return fmt(c.experiment.perPriorityFloor); });
        add("learner", "epsilon_decay_rate",
            [](AppConfig& c, const std::string& v) {
                c.experiment.epsilonDecayRate = asDouble(v);
            },
            [](const AppConfig& c) { return fmt(c.experiment.epsilonDecayRate); });
        add("learner", "epsilon_floor",
            [](AppConfig& c, const std::string& v) { c.experiment.epsilonFloor = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.epsilonFloor); });

        add("env", "frame_skip",
            [](AppConfig& c, const std::string& v) {
                c.experiment.frameSkip = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.frameSkip); });
        add("env", "sticky_prob",
            [](AppConfig& c, const std::string& v) { c.experiment.stickyProb = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.experiment.stickyProb); });
        add("env", "max_episode_steps",
            [](AppConfig& c, const std::string& v) {
                c.experiment.maxEpisodeSteps = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.maxEpisodeSteps); });
        add("env", "noop_max",
            [](AppConfig& c, const std::string& v) {
                c.experiment.noopMax = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.experiment.noopMax); });

        add("ramscope", "kernel_size",
            [](AppConfig& c, const std::string& v) {
                c.variation.kernelSize = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.variation.kernelSize); });
        add("ramscope", "cap",
            [](AppConfig& c, const std::string& v) { c.variation.cap = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.variation.cap); });
        add("ramscope", "include_center",
            [](AppConfig& c, const std::string& v) { c.variation.includeCenter = asBool(v); },
            [](const AppConfig& c) { return c.variation.includeCenter ? "true" : "false"; });
        add("ramscope", "boundary",
            [](AppConfig& c, const std::string& v) {
                if (v == "truncate") c.variation.boundary = ramscope::BoundaryMode::Truncate;
                else if (v == "reflect") c.variation.boundary = ramscope::BoundaryMode::Reflect;
                else throw std::invalid_argument("boundary must be truncate or reflect");
            },
            [](const AppConfig& c) {
                return c.variation.boundary == ramscope::BoundaryMode::Truncate ? "truncate"
                                                                                : "reflect";
            });
        add("ramscope", "rollout_steps",
            [](AppConfig& c, const std::string& v) { c.rolloutSteps = asLong(v); },
            [](const AppConfig& c) { return std::to_string(c.rolloutSteps); });
        add("ramscope", "rollout_seed",
            [](AppConfig& c, const std::string& v) { c.rolloutSeed = asU64(v); },
            [](const AppConfig& c) { return std::to_string(c.rolloutSeed); });

        add("metrics", "running_average_window",
            [](AppConfig& c, const std::string& v) {
                c.report.runningWindow = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.report.runningWindow); });
        add("metrics", "winsor_level",
            [](AppConfig& c, const std::string& v) { c.report.winsorLevel = asDouble(v); },
            [](const AppConfig& c) { return fmt(c.report.winsorLevel); });
        add("metrics", "last_episodes",
            [](AppConfig& c, const std::string& v) {
                c.report.lastEpisodes = static_cast<int>(asLong(v));
            },
            [](const AppConfig& c) { return std::to_string(c.report.lastEpisodes); });
        add("metrics", "checkpoints",
            [](AppConfig& c, const std::string& v) { c.report.checkpoints = asList(v, asLong); },
            [](const AppConfig& c) { return joinLong(c.report.checkpoints); });

        add("paths", "out", [](AppConfig& c, const std::string& v) { c.out = v; },
            [](const AppConfig& c) { return c.out; });
        add("paths", "from", [](AppConfig& c, const std::string& v) { c.from = v; },
            [](const AppConfig& c) { return c.from; });
        add("paths", "logs", [](AppConfig& c, const std::string& v) { c.logs = v; },
            [](const AppConfig& c) { return c.logs; });
        add("paths", "profiles", [](AppConfig& c, const std::string& v) { c.profiles = v; },
            [](const AppConfig& c) { return c.profiles; });
        return r;
    }();
    return entries;
}

const Entry* findEntry(const std::string& section, const std::string& key) {
    for (const auto& entry : registry()) {
        if (entry.section == section && entry.key == key) return &entry;
    }
    return nullptr;
}

}  // namespace

void applyConfigText(AppConfig& config, const std::string& text, const std::string& sourceName) {
    std::istringstream in(text);
    std::string line, section;
    long lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = sourceName + ":" + std::to_string(lineNo);
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument(where + ": malformed section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(where + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Entry* entry = findEntry(section, key);
        if (!entry) {
            throw std::invalid_argument(where + ": unknown key [" + section + "] " + key);
        }
        try {
            entry->set(config, value);
            config.markSpecified(section + "." + key);
        } catch (const std::exception& e) {
            throw std::invalid_argument(where + ": " + key + ": " + e.what());
        }
    }
}

void applyConfigFile(AppConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    applyConfigText(config, buffer.str(), path.filename().string());
}

std::string renderConfig(const AppConfig& config) {
    std::string out;
    std::string section;
    for (const auto& entry : registry()) {
        if (entry.section != section) {
            if (!out.empty()) out += "\n";
            out += "[" + entry.section + "]\n";
            section = entry.section;
        }
        out += entry.key + " = " + entry.get(config) + "\n";
    }
    return out;
}

void writeConfigEcho(const std::filesystem::path& outDir, const AppConfig& config) {
    std::filesystem::create_directories(outDir);
    const auto path = outDir / "config.txt";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write config echo: " + path.string());
    out << renderConfig(config);
}

std::uint64_t configHash(const AppConfig& config) {
    const std::string text = renderConfig(config);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace duelforge::cli

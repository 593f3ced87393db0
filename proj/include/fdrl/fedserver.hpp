#pragma once

#include "fdrl/abrenv.hpp"
#include "fdrl/agents.hpp"
#include "fdrl/manifest.hpp"
#include "fdrl/neural.hpp"
#include "fdrl/simcore.hpp"
#include "fdrl/traces.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace fdrl {

struct FedConfig {
    std::size_t num_clients = 100;
    std::size_t clients_per_round = 10; // K
    std::size_t local_episodes = 10;    // E
    std::size_t rounds = 500;           // T
    Algo algo = Algo::Dqn;
    std::uint64_t seed = 1;
    std::size_t eval_every = 10;
    double validation_fraction = 0.1;
    double rtt_min_s = 0.02;
    double rtt_max_s = 0.2;
    double max_buffer_s = 20.0;
    std::size_t threads = 1; // 0: one per hardware thread
    RewardParams reward;
    FeatureScaling scaling;

    /// Throws ParameterError unless 1 <= K <= num_clients and the other knobs are sane.
    void validate() const;
    bool operator==(const FedConfig &) const = default;
};

/// Local environment steps one client is expected to take over a run:
/// T * (K / N) * E * chunks per episode. Used as the DQN anneal horizon.
std::uint64_t planned_local_steps(const FedConfig &config, std::size_t num_chunks);

/// Client i trains on group kAllGroups[i % 4] with an RTT drawn once,
/// uniformly in [rtt_min_s, rtt_max_s].
std::vector<ClientEnvConfig> make_client_envs(const FedConfig &config);

/// Training traces held out per group for best-model selection.
struct TrainingPools {
    std::array<std::vector<std::size_t>, 4> train; // trace indices per group
    std::vector<std::size_t> validation;
};
TrainingPools make_training_pools(const TraceCorpus &corpus, double validation_fraction, std::uint64_t seed);

/// Uniform sample of K distinct client ids, ascending.
std::vector<std::size_t> select_clients(std::size_t num_clients, std::size_t k, Rng &rng);

/// Elementwise mean. Throws ParameterError for an empty list and ShapeError
/// for mixed layouts.
WeightVector average_weights(std::span<const WeightVector> vectors);

struct ClientSlot {
    std::size_t id = 0;
    ClientEnvConfig env;
    std::unique_ptr<Agent> agent;
};

/// Every client's environment and persistent learner state.
class ClientRegistry {
public:
    ClientRegistry(const FedConfig &config, std::size_t observation_dim, std::size_t action_count,
                   const AgentConfigs &agents);

    std::size_t size() const { return clients_.size(); }
    ClientSlot &at(std::size_t id) { return clients_.at(id); }
    const ClientSlot &at(std::size_t id) const { return clients_.at(id); }
    std::vector<ClientEnvConfig> envs() const;

    /// Randomness of client `id` in round `round`.
    Rng client_rng(std::size_t id, std::size_t round) const;

private:
    std::uint64_t seed_;
    std::vector<ClientSlot> clients_;
};

struct RoundLog {
    std::size_t round = 0;
    std::vector<std::size_t> clients;
    std::vector<double> client_rewards; // mean per-step reward over each client's local episodes
    double global_mean = 0.0;
    double validation_reward = 0.0; // NaN when not evaluated this round
    double wall_time_s = 0.0;       // not part of the reproducible log
};

// Evaluation ----------------------------------------------------------------

struct QoeMetrics {
    std::size_t episodes = 0;
    double reward = 0.0;         // mean over episodes of the per-chunk mean
    double utility = 0.0;
    double switch_penalty = 0.0;
    double rebuffer_s = 0.0;
};

struct EpisodeResult {
    std::size_t trace_index = 0;
    TraceGroup group = TraceGroup::FccHigh;
    EpisodeStats stats;
};

struct EvalTable {
    QoeMetrics overall;
    std::array<QoeMetrics, 4> groups{};
    std::vector<EpisodeResult> episodes;
};

/// One episode per listed trace, offset 0. The k-th trace of a group is
/// played with the RTT and buffer of the (k mod n)-th of that group's n
/// clients in `client_envs`.
EvalTable evaluate(const LevelChooser &policy, const TraceCorpus &corpus, std::span<const std::size_t> traces,
                   const VideoManifest &manifest, std::span<const ClientEnvConfig> client_envs,
                   const RewardParams &reward = {});

// Federation ----------------------------------------------------------------

struct FederationResult {
    WeightVector final_weights;
    std::vector<RoundLog> logs;
    ModelCheckpoint best;
};

struct RunOptions {
    std::filesystem::path state_path; // snapshot written every eval_every rounds when set
    bool resume = false;              // continue from state_path if it exists
    std::function<void(const RoundLog &)> on_round;
    /// Called after each round with every client's state (tests, diagnostics).
    std::function<void(const RoundLog &, const ClientRegistry &)> inspect_clients;
    std::string label = "fdrlabr";
};

/// Synchronous FedAvg over local DQN/A2C/PPO training.
FederationResult run_federation(const FedConfig &config, const AgentConfigs &agents, const TraceCorpus &corpus,
                                const VideoManifest &manifest, const RunOptions &options = {});

/// Running mean over the previous `window` values (fewer at the start).
std::vector<double> running_average(std::span<const double> values, std::size_t window);

void write_round_log(std::span<const RoundLog> logs, std::ostream &out);
std::vector<RoundLog> read_round_log(std::istream &in, const std::string &source = "<stream>");

} // namespace fdrl

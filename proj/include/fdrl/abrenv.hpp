#pragma once

#include "fdrl/environment.hpp"
#include "fdrl/manifest.hpp"
#include "fdrl/simcore.hpp"
#include "fdrl/traces.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

namespace fdrl {

struct RewardParams {
    double alpha = 2.6; // quality-switch penalty
    double beta = 1.0;  // per second of rebuffering

    bool operator==(const RewardParams &) const = default;
};

/// Divisors applied to the raw observation components.
struct FeatureScaling {
    double throughput_mbps = 10.0;
    double download_time_s = 10.0;
    double chunk_size_mb = 10.0;
    double buffer_s = 20.0;
    double chunks_remaining = 60.0;
    double last_bitrate_mbps = 8.0;

    bool operator==(const FeatureScaling &) const = default;
};

/// q(R) = ln(R / R_min). Throws ParameterError for a bitrate not on the ladder.
double utility(double bitrate_kbps, const QualityLadder &ladder);
double level_utility(std::size_t level, const QualityLadder &ladder);

/// r = q(R_n) - alpha |q(R_{n-1}) - q(R_n)| - beta * rebuffer. Pass
/// prev_level == level for the first chunk.
double reward(std::size_t prev_level, std::size_t level, double rebuffer_s, const RewardParams &params,
              const QualityLadder &ladder);

/// Raw (unscaled) state of the player as seen by a learning agent.
struct Observation {
    std::array<double, kHistoryLength> throughputs_mbps{};
    std::array<double, kHistoryLength> download_times_s{};
    std::vector<double> next_chunk_sizes_mb; // zero when the episode is over
    double buffer_s = 0.0;
    double chunks_remaining = 0.0;
    double last_bitrate_mbps = 0.0;

    std::vector<double> flatten(const FeatureScaling &scaling) const;
};

Observation observe(const PlayerState &state, const VideoManifest &manifest);
/// 2 * history length + levels + 3; 22 on the default ladder.
std::size_t observation_dim(std::size_t num_levels);

/// QoE totals of one episode, each a sum over chunks.
struct EpisodeStats {
    std::size_t steps = 0;
    double reward = 0.0;
    double utility = 0.0;
    double switch_penalty = 0.0; // alpha * |dq|
    double rebuffer_s = 0.0;

    double mean_reward() const { return steps ? reward / static_cast<double>(steps) : 0.0; }
};

/// Bitrate-selection environment over the simulated player.
///
/// `pool` lists the traces episodes are drawn from by reset(Rng&); all
/// referenced objects must outlive the environment.
class AbrEnv : public Environment {
public:
    AbrEnv(const VideoManifest &manifest, ClientEnvConfig env, std::vector<const BandwidthTrace *> pool,
           RewardParams reward = {}, FeatureScaling scaling = {});

    std::size_t observation_dim() const override;
    std::size_t action_count() const override { return manifest_->num_levels(); }

    /// Uniformly random trace from the pool, offset uniform over its duration.
    std::vector<double> reset(Rng &rng) override;
    std::vector<double> reset(const BandwidthTrace &trace, double start_offset_s);
    EnvStep step(std::size_t action) override;

    const PlayerState &state() const;
    const StepOutcome &last_outcome() const { return last_outcome_; }
    const EpisodeStats &episode_stats() const { return stats_; }
    const RewardParams &reward_params() const { return reward_; }
    const FeatureScaling &scaling() const { return scaling_; }
    const VideoManifest &manifest() const { return *manifest_; }

private:
    const VideoManifest *manifest_;
    ClientEnvConfig env_;
    std::vector<const BandwidthTrace *> pool_;
    RewardParams reward_;
    FeatureScaling scaling_;
    std::optional<Player> player_;
    StepOutcome last_outcome_;
    EpisodeStats stats_;
};

} // namespace fdrl

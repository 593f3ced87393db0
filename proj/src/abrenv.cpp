#include "fdrl/abrenv.hpp"

#include "fdrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fdrl {

double utility(double bitrate_kbps, const QualityLadder &ladder) {
    const auto rates = ladder.bitrates_kbps();
    if (std::find(rates.begin(), rates.end(), bitrate_kbps) == rates.end())
        throw ParameterError("bitrate " + std::to_string(bitrate_kbps) + " Kbps is not on the ladder");
    return std::log(bitrate_kbps / ladder.min_kbps());
}

double level_utility(std::size_t level, const QualityLadder &ladder) {
    return std::log(ladder.kbps(level) / ladder.min_kbps());
}

double reward(std::size_t prev_level, std::size_t level, double rebuffer_s, const RewardParams &params,
              const QualityLadder &ladder) {
    if (!(rebuffer_s >= 0.0)) throw ParameterError("rebuffer time must be non-negative");
    const double q = level_utility(level, ladder);
    const double q_prev = level_utility(prev_level, ladder);
    return q - params.alpha * std::abs(q_prev - q) - params.beta * rebuffer_s;
}

std::vector<double> Observation::flatten(const FeatureScaling &scaling) const {
    std::vector<double> out;
    out.reserve(2 * kHistoryLength + next_chunk_sizes_mb.size() + 3);
    for (const double v : throughputs_mbps) out.push_back(v / scaling.throughput_mbps);
    for (const double v : download_times_s) out.push_back(v / scaling.download_time_s);
    for (const double v : next_chunk_sizes_mb) out.push_back(v / scaling.chunk_size_mb);
    out.push_back(buffer_s / scaling.buffer_s);
    out.push_back(chunks_remaining / scaling.chunks_remaining);
    out.push_back(last_bitrate_mbps / scaling.last_bitrate_mbps);
    return out;
}

Observation observe(const PlayerState &state, const VideoManifest &manifest) {
    Observation obs;
    for (std::size_t i = 0; i < kHistoryLength; ++i) {
        obs.throughputs_mbps[i] = state.history[i].throughput_mbps;
        obs.download_times_s[i] = state.history[i].download_time_s;
    }
    if (state.done()) {
        obs.next_chunk_sizes_mb.assign(manifest.num_levels(), 0.0);
    } else {
        const auto row = manifest.chunk_sizes_mb(state.chunk_index);
        obs.next_chunk_sizes_mb.assign(row.begin(), row.end());
    }
    obs.buffer_s = state.buffer_s;
    obs.chunks_remaining = static_cast<double>(state.num_chunks - state.chunk_index);
    obs.last_bitrate_mbps = state.last_level ? manifest.ladder().mbps(*state.last_level) : 0.0;
    return obs;
}

std::size_t observation_dim(std::size_t num_levels) { return 2 * kHistoryLength + num_levels + 3; }

AbrEnv::AbrEnv(const VideoManifest &manifest, ClientEnvConfig env, std::vector<const BandwidthTrace *> pool,
               RewardParams reward, FeatureScaling scaling)
    : manifest_(&manifest), env_(env), pool_(std::move(pool)), reward_(reward), scaling_(scaling) {
    env_.validate();
}

std::size_t AbrEnv::observation_dim() const { return fdrl::observation_dim(manifest_->num_levels()); }

std::vector<double> AbrEnv::reset(Rng &rng) {
    if (pool_.empty()) throw StateError("environment has no traces to draw episodes from");
    const BandwidthTrace &trace = *pool_[uniform_index(rng, pool_.size())];
    const double offset = uniform01(rng) * trace.duration_s();
    return reset(trace, offset);
}

std::vector<double> AbrEnv::reset(const BandwidthTrace &trace, double start_offset_s) {
    player_.emplace(*manifest_, trace, env_, start_offset_s);
    stats_ = {};
    last_outcome_ = {};
    return observe(player_->state(), *manifest_).flatten(scaling_);
}

const PlayerState &AbrEnv::state() const {
    if (!player_) throw StateError("environment used before reset");
    return player_->state();
}

EnvStep AbrEnv::step(std::size_t action) {
    if (!player_) throw StateError("environment used before reset");
    if (action >= action_count())
        throw ParameterError("action " + std::to_string(action) + " outside 0.." + std::to_string(action_count() - 1));
    const auto prev = player_->state().last_level.value_or(action);
    last_outcome_ = player_->download_chunk(action);

    const auto &ladder = manifest_->ladder();
    const double r = reward(prev, action, last_outcome_.rebuffer_s, reward_, ladder);
    stats_.steps += 1;
    stats_.reward += r;
    stats_.utility += level_utility(action, ladder);
    stats_.switch_penalty += reward_.alpha * std::abs(level_utility(prev, ladder) - level_utility(action, ladder));
    stats_.rebuffer_s += last_outcome_.rebuffer_s;

    EnvStep out;
    out.observation = observe(player_->state(), *manifest_).flatten(scaling_);
    out.reward = r;
    out.terminal = last_outcome_.done;
    return out;
}

} // namespace fdrl

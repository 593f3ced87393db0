#include "fdrl/simcore.hpp"

#include "fdrl/error.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace fdrl {

void ClientEnvConfig::validate() const {
    if (!(rtt_s >= 0.0) || !std::isfinite(rtt_s)) throw ParameterError("rtt must be non-negative");
    if (!(max_buffer_s > 0.0) || !std::isfinite(max_buffer_s)) throw ParameterError("max buffer must be positive");
}

Player::Player(const VideoManifest &manifest, const BandwidthTrace &trace, ClientEnvConfig env,
               double start_offset_s)
    : manifest_(&manifest), trace_(&trace), env_(env) {
    env_.validate();
    reset(start_offset_s);
}

void Player::reset(double start_offset_s) {
    if (!(start_offset_s >= 0.0)) throw ParameterError("start offset must be non-negative");
    state_ = PlayerState{};
    state_.num_chunks = manifest_->num_chunks();
    state_.virtual_time_s = start_offset_s;
}

double transfer_time_s(const BandwidthTrace &trace, double start_s, double size_mb) {
    double remaining = size_mb;
    double t = start_s;
    while (true) {
        const auto seg = segment_at(trace, t);
        const double capacity = seg.mbps * (seg.end_s - t);
        if (capacity >= remaining) {
            t += remaining / seg.mbps;
            break;
        }
        remaining -= capacity;
        t = seg.end_s;
    }
    return t - start_s;
}

StepOutcome Player::download_chunk(std::size_t level) {
    if (state_.done()) throw StateError("download_chunk called after the last chunk");
    if (level >= manifest_->num_levels())
        throw ParameterError("level " + std::to_string(level) + " outside ladder of " +
                             std::to_string(manifest_->num_levels()));

    StepOutcome out;
    out.chunk = state_.chunk_index;
    out.level = level;
    out.buffer_before_s = state_.buffer_s;

    const double size = manifest_->size_mb(state_.chunk_index, level);
    const double transfer = transfer_time_s(*trace_, state_.virtual_time_s + env_.rtt_s, size);
    out.download_time_s = env_.rtt_s + transfer;
    out.measured_throughput_mbps = size / transfer;
    out.rebuffer_s = std::max(0.0, out.download_time_s - state_.buffer_s);

    double buffer = std::max(0.0, state_.buffer_s - out.download_time_s) + manifest_->chunk_duration_s();
    if (buffer > env_.max_buffer_s) {
        out.wait_s = buffer - env_.max_buffer_s;
        buffer = env_.max_buffer_s;
    }
    out.new_buffer_s = buffer;

    state_.buffer_s = buffer;
    state_.virtual_time_s += out.download_time_s;
    state_.virtual_time_s += out.wait_s;
    state_.elapsed_s += out.download_time_s;
    state_.elapsed_s += out.wait_s;
    state_.last_level = level;
    state_.last_download_time_s = out.download_time_s;
    std::shift_left(state_.history.begin(), state_.history.end(), 1);
    state_.history.back() = {out.measured_throughput_mbps, out.download_time_s};
    ++state_.chunk_index;
    out.done = state_.done();
    return out;
}

std::vector<StepOutcome> run_episode(const VideoManifest &manifest, const BandwidthTrace &trace,
                                     const ClientEnvConfig &env, const LevelChooser &policy, double start_offset_s) {
    Player player(manifest, trace, env, start_offset_s);
    std::vector<StepOutcome> outcomes;
    outcomes.reserve(manifest.num_chunks());
    while (!player.state().done()) outcomes.push_back(player.download_chunk(policy(player.state(), manifest)));
    return outcomes;
}

void write_event_log(std::span<const StepOutcome> outcomes, std::ostream &out) {
    out << "chunk,level,download_time_s,rebuffer_s,wait_s,throughput_mbps,buffer_s,new_buffer_s\n";
    for (const auto &o : outcomes) {
        out << o.chunk << ',' << o.level << ',' << detail::format_exact(o.download_time_s) << ','
            << detail::format_exact(o.rebuffer_s) << ',' << detail::format_exact(o.wait_s) << ','
            << detail::format_exact(o.measured_throughput_mbps) << ',' << detail::format_exact(o.buffer_before_s)
            << ',' << detail::format_exact(o.new_buffer_s) << '\n';
    }
}

} // namespace fdrl

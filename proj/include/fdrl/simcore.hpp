#pragma once

#include "fdrl/manifest.hpp"
#include "fdrl/traces.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace fdrl {

struct ClientEnvConfig {
    TraceGroup trace_group = TraceGroup::FccHigh;
    double rtt_s = 0.0;
    double max_buffer_s = 20.0;

    /// Throws ParameterError on negative RTT or non-positive buffer cap.
    void validate() const;
};

inline constexpr std::size_t kHistoryLength = 6;

struct HistoryEntry {
    double throughput_mbps = 0.0;
    double download_time_s = 0.0;
};

struct PlayerState {
    std::size_t chunk_index = 0;
    std::size_t num_chunks = 0;
    double buffer_s = 0.0;
    double virtual_time_s = 0.0; // position in the trace
    double elapsed_s = 0.0;      // sum of download and wait time since reset
    std::optional<std::size_t> last_level;
    double last_download_time_s = 0.0;
    std::array<HistoryEntry, kHistoryLength> history{}; // oldest first; zero until filled

    bool done() const { return chunk_index >= num_chunks; }
};

struct StepOutcome {
    std::size_t chunk = 0;
    std::size_t level = 0;
    double buffer_before_s = 0.0;
    double download_time_s = 0.0;
    double rebuffer_s = 0.0;
    double wait_s = 0.0;
    double measured_throughput_mbps = 0.0;
    double new_buffer_s = 0.0;
    bool done = false;

    bool operator==(const StepOutcome &) const = default;
};

/// Event-driven DASH player. Playback drains the buffer while a chunk
/// downloads; when the downloaded chunk would overflow the buffer cap the
/// player idles until it fits.
///
/// Holds references to the manifest and trace; both must outlive the player.
class Player {
public:
    Player(const VideoManifest &manifest, const BandwidthTrace &trace, ClientEnvConfig env,
           double start_offset_s = 0.0);

    /// Back to chunk 0 with an empty buffer, `start_offset_s` into the trace.
    void reset(double start_offset_s);

    /// Throws StateError once every chunk is downloaded and ParameterError for
    /// a level outside the ladder.
    StepOutcome download_chunk(std::size_t level);

    const PlayerState &state() const { return state_; }
    const VideoManifest &manifest() const { return *manifest_; }
    const BandwidthTrace &trace() const { return *trace_; }
    const ClientEnvConfig &env() const { return env_; }

private:
    const VideoManifest *manifest_;
    const BandwidthTrace *trace_;
    ClientEnvConfig env_;
    PlayerState state_;
};

/// Seconds needed to move `size_mb` through the trace starting at `start_s`.
/// Exact for piecewise-constant traces.
double transfer_time_s(const BandwidthTrace &trace, double start_s, double size_mb);

using LevelChooser = std::function<std::size_t(const PlayerState &, const VideoManifest &)>;

/// Plays every chunk of the video, asking `policy` for each level.
std::vector<StepOutcome> run_episode(const VideoManifest &manifest, const BandwidthTrace &trace,
                                     const ClientEnvConfig &env, const LevelChooser &policy,
                                     double start_offset_s = 0.0);

/// CSV with header chunk,level,download_time_s,rebuffer_s,wait_s,throughput_mbps,buffer_s,new_buffer_s.
void write_event_log(std::span<const StepOutcome> outcomes, std::ostream &out);

} // namespace fdrl

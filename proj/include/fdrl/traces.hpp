#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fdrl {

enum class TraceGroup { FccHigh, FccLow, LteHigh, LteLow };

inline constexpr std::array<TraceGroup, 4> kAllGroups{TraceGroup::FccHigh, TraceGroup::FccLow, TraceGroup::LteHigh,
                                                      TraceGroup::LteLow};

/// Directory-style name: fcc_high, fcc_low, lte_high, lte_low.
std::string_view group_name(TraceGroup group);
std::optional<TraceGroup> parse_group(std::string_view name);
bool is_high_bandwidth(TraceGroup group);
inline std::size_t group_index(TraceGroup group) { return static_cast<std::size_t>(group); }

/// Mean throughput separating the high and low bandwidth groups.
inline constexpr double kGroupThresholdMbps = 2.0;

struct ThroughputSample {
    double t_s;
    double mbps;
    bool operator==(const ThroughputSample &) const = default;
};

/// Piecewise-constant throughput series. Sample i holds on [t_i, t_{i+1});
/// the last sample holds for one more interval of the same length, which
/// defines the trace duration. Past the end the trace repeats.
class BandwidthTrace {
public:
    /// Throws ValidationError (naming `id`) unless there are at least two
    /// samples, timestamps start at 0 and strictly increase, and every
    /// throughput is positive and finite.
    BandwidthTrace(std::string id, TraceGroup group, std::vector<ThroughputSample> samples);

    const std::string &id() const { return id_; }
    TraceGroup group() const { return group_; }
    const std::vector<ThroughputSample> &samples() const { return samples_; }
    double duration_s() const { return duration_s_; }
    /// Time-weighted mean throughput over one period.
    double mean_mbps() const;

    bool operator==(const BandwidthTrace &) const = default;

private:
    std::string id_;
    TraceGroup group_;
    std::vector<ThroughputSample> samples_;
    double duration_s_;
};

struct TraceSegment {
    double mbps;
    double end_s; // absolute (unwrapped) time at which this rate stops applying
};

/// Throughput at absolute time t >= 0, wrapping modulo the trace duration.
double throughput_at(const BandwidthTrace &trace, double t_s);
/// The constant-rate segment containing t and where it ends.
TraceSegment segment_at(const BandwidthTrace &trace, double t_s);

enum class Split { Train, Test };

struct TraceCorpus {
    std::vector<BandwidthTrace> traces;
    std::map<std::string, Split> split; // empty until split_corpus

    bool operator==(const TraceCorpus &) const = default;

    /// Indices into `traces` of the given group (and split, when given), in corpus order.
    std::vector<std::size_t> indices(TraceGroup group, std::optional<Split> which = std::nullopt) const;
    std::vector<std::size_t> indices(Split which) const;
};

struct CorpusOptions {
    std::size_t per_group_count = 1000;
    double duration_s = 320.0;
    double fcc_granularity_s = 10.0;
    double lte_granularity_s = 1.0;
};

/// Synthetic log-normal AR(1) traces, `per_group_count` per group. Traces
/// whose mean falls on the wrong side of 2 Mbps for their group are redrawn.
TraceCorpus generate_corpus(const CorpusOptions &options, std::uint64_t seed);

/// Stratified random split; per group round(fraction * n) traces go to Train,
/// clamped so both sides are non-empty. Throws SplitError for groups with a
/// single trace.
TraceCorpus split_corpus(TraceCorpus corpus, double train_fraction, std::uint64_t seed);

// One trace per file: rows "t_s,mbps" (an optional non-numeric header row is skipped).
void write_trace(const BandwidthTrace &trace, std::ostream &out);
BandwidthTrace read_trace(std::istream &in, std::string id, TraceGroup group, const std::string &source);

/// Writes <root>/<group>/<id>.csv for every trace and, when split, <root>/split.csv.
void save_corpus(const TraceCorpus &corpus, const std::filesystem::path &root);
/// Reads every <root>/<group>/*.csv in name order plus split.csv when present.
TraceCorpus load_trace_dir(const std::filesystem::path &root);

} // namespace fdrl

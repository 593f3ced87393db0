#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fdrl {

/// Encoding bitrates of a video, ascending. Level index 0 is the lowest quality.
class QualityLadder {
public:
    /// Throws ParameterError unless strictly ascending, positive, and at least two levels.
    explicit QualityLadder(std::vector<double> bitrates_kbps);

    /// 700, 900, 2000, 3000, 5000, 6000, 8000 Kbps.
    static QualityLadder default_ladder();

    std::size_t size() const { return bitrates_kbps_.size(); }
    double kbps(std::size_t level) const { return bitrates_kbps_.at(level); }
    double mbps(std::size_t level) const { return bitrates_kbps_.at(level) / 1000.0; }
    double min_kbps() const { return bitrates_kbps_.front(); }
    double max_kbps() const { return bitrates_kbps_.back(); }
    std::span<const double> bitrates_kbps() const { return bitrates_kbps_; }

    bool operator==(const QualityLadder &) const = default;

private:
    std::vector<double> bitrates_kbps_;
};

struct SizeFactorRange {
    double low = 0.3;
    double high = 0.9;
};

/// Per-chunk, per-level chunk sizes. Immutable once built.
class VideoManifest {
public:
    /// Sizes are megabits, one row per chunk. Throws ParameterError if any
    /// row has the wrong width, a non-positive size, or sizes that do not
    /// strictly ascend across levels.
    VideoManifest(QualityLadder ladder, double chunk_duration_s, std::vector<std::vector<double>> chunk_sizes_mb);

    const QualityLadder &ladder() const { return ladder_; }
    double chunk_duration_s() const { return chunk_duration_s_; }
    std::size_t num_chunks() const { return sizes_.size(); }
    std::size_t num_levels() const { return ladder_.size(); }
    double size_mb(std::size_t chunk, std::size_t level) const { return sizes_.at(chunk).at(level); }
    std::span<const double> chunk_sizes_mb(std::size_t chunk) const { return sizes_.at(chunk); }
    double duration_s() const { return chunk_duration_s_ * static_cast<double>(num_chunks()); }

    bool operator==(const VideoManifest &) const = default;

private:
    QualityLadder ladder_;
    double chunk_duration_s_;
    std::vector<std::vector<double>> sizes_;
};

inline constexpr std::size_t kDefaultNumChunks = 60;
inline constexpr double kDefaultChunkDurationS = 4.0;

/// size[n][l] = bitrate_l (Mbps) * chunk_duration_s * f_n with f_n ~ U[low, high]
/// drawn once per chunk. Sizes are rounded to whole bits (1e-6 Mb) so they
/// survive the text format unchanged.
VideoManifest generate_manifest(const QualityLadder &ladder, std::size_t num_chunks, double chunk_duration_s,
                                SizeFactorRange factors, std::uint64_t seed);

/// 60 chunks of 4 s on the default ladder, factors in [0.3, 0.9].
VideoManifest default_manifest(std::uint64_t seed);

// Text format:
//   chunk_duration_s=<float>
//   <kbps>,<kbps>,...
//   <size_mb>,<size_mb>,...      (one row per chunk, 6 decimals)
void write_manifest(const VideoManifest &manifest, std::ostream &out);
VideoManifest read_manifest(std::istream &in, const std::string &source = "<stream>");
void save_manifest(const VideoManifest &manifest, const std::filesystem::path &path);
VideoManifest load_manifest(const std::filesystem::path &path);

} // namespace fdrl

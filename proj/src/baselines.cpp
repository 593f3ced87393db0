#include "fdrl/baselines.hpp"

#include "fdrl/abrenv.hpp"
#include "fdrl/error.hpp"

namespace fdrl {

std::size_t constant_level(const QualityLadder &ladder, double target_kbps) {
    std::size_t level = 0;
    for (std::size_t l = 0; l < ladder.size(); ++l)
        if (ladder.kbps(l) <= target_kbps) level = l;
    return level;
}

LevelChooser constant_policy(double target_kbps) {
    return [target_kbps](const PlayerState &, const VideoManifest &manifest) {
        return constant_level(manifest.ladder(), target_kbps);
    };
}

double harmonic_mean_throughput(std::span<const HistoryEntry> history) {
    double inverse_sum = 0.0;
    std::size_t count = 0;
    for (const auto &h : history) {
        if (h.throughput_mbps > 0.0) {
            inverse_sum += 1.0 / h.throughput_mbps;
            ++count;
        }
    }
    return count ? static_cast<double>(count) / inverse_sum : 0.0;
}

std::size_t throughput_level(std::span<const HistoryEntry> history, const QualityLadder &ladder,
                             double safety_factor) {
    const double budget_kbps = safety_factor * harmonic_mean_throughput(history) * 1000.0;
    std::size_t level = 0;
    for (std::size_t l = 0; l < ladder.size(); ++l)
        if (ladder.kbps(l) <= budget_kbps) level = l;
    return level;
}

LevelChooser throughput_policy(double safety_factor) {
    return [safety_factor](const PlayerState &state, const VideoManifest &manifest) {
        return throughput_level(state.history, manifest.ladder(), safety_factor);
    };
}

BolaParams BolaParams::defaults(const QualityLadder &ladder, double max_buffer_s, double chunk_duration_s,
                                double startup_utility) {
    const double top = level_utility(ladder.size() - 1, ladder);
    return {(max_buffer_s / chunk_duration_s - 1.0) / (top + startup_utility), startup_utility};
}

std::vector<double> bola_scores(const BolaParams &params, double buffer_s, const VideoManifest &manifest,
                                std::size_t chunk_index) {
    if (!(params.control_gain > 0.0)) throw ParameterError("BOLA control gain must be positive");
    if (!(buffer_s >= 0.0)) throw ParameterError("buffer must be non-negative");
    const double buffer_chunks = buffer_s / manifest.chunk_duration_s();
    const auto sizes = manifest.chunk_sizes_mb(chunk_index);
    std::vector<double> scores(manifest.num_levels());
    for (std::size_t m = 0; m < scores.size(); ++m) {
        const double q = level_utility(m, manifest.ladder());
        scores[m] = (params.control_gain * (q + params.startup_utility) - buffer_chunks) / sizes[m];
    }
    return scores;
}

std::size_t bola_level(const BolaParams &params, double buffer_s, const VideoManifest &manifest,
                       std::size_t chunk_index) {
    const auto scores = bola_scores(params, buffer_s, manifest, chunk_index);
    std::size_t best = 0;
    for (std::size_t m = 1; m < scores.size(); ++m)
        if (scores[m] >= scores[best]) best = m;
    if (scores[best] < 0.0) return scores.size() - 1;
    return best;
}

LevelChooser bola_policy(BolaParams params) {
    return [params](const PlayerState &state, const VideoManifest &manifest) {
        return bola_level(params, state.buffer_s, manifest, state.chunk_index);
    };
}

} // namespace fdrl

#pragma once

#include "fdrl/manifest.hpp"
#include "fdrl/simcore.hpp"

#include <array>
#include <cstddef>
#include <span>

namespace fdrl {

/// Highest level whose bitrate does not exceed `target_kbps`; level 0 when
/// the target is below the whole ladder.
std::size_t constant_level(const QualityLadder &ladder, double target_kbps);
/// Always chooses constant_level(ladder, target_kbps). Default target is 5 Mbps.
LevelChooser constant_policy(double target_kbps = 5000.0);

/// Harmonic mean of the non-zero throughputs in `history`; 0 when all are zero.
double harmonic_mean_throughput(std::span<const HistoryEntry> history);
/// Highest level with bitrate <= safety_factor * estimate; level 0 on an empty history.
std::size_t throughput_level(std::span<const HistoryEntry> history, const QualityLadder &ladder,
                             double safety_factor = 0.9);
LevelChooser throughput_policy(double safety_factor = 0.9);

struct BolaParams {
    double control_gain = 0.0;      // V, in chunks per unit utility
    double startup_utility = 5.0;   // gamma_p

    /// V = (max buffer in chunks - 1) / (q(R_max) + gamma_p).
    static BolaParams defaults(const QualityLadder &ladder, double max_buffer_s, double chunk_duration_s,
                               double startup_utility = 5.0);
};

/// Score (V (q_m + gamma_p) - Q) / S_m of every level, where Q is the buffer
/// in chunks and S_m the next chunk's size.
std::vector<double> bola_scores(const BolaParams &params, double buffer_s, const VideoManifest &manifest,
                                std::size_t chunk_index);
/// Argmax of the BOLA score, ties toward the higher level. When every score
/// is negative the buffer is above BOLA's download threshold; BOLA would idle
/// until the top level's score reaches zero and then fetch the top level, so
/// the top level is returned.
std::size_t bola_level(const BolaParams &params, double buffer_s, const VideoManifest &manifest,
                       std::size_t chunk_index);
LevelChooser bola_policy(BolaParams params);

} // namespace fdrl

#include "fdrl/abrenv.hpp"
#include "fdrl/baselines.hpp"
#include "fdrl/error.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace fdrl;

namespace {

std::array<HistoryEntry, kHistoryLength> history_of(double mbps) {
    std::array<HistoryEntry, kHistoryLength> h{};
    for (auto &e : h) e = {mbps, 1.0};
    return h;
}

// Independent argmax of the BOLA ratio, ties to the higher level.
std::size_t brute_bola(double v, double gp, double buffer_chunks, const VideoManifest &m, std::size_t chunk) {
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t l = 0; l < m.num_levels(); ++l) {
        const double q = std::log(m.ladder().kbps(l) / m.ladder().kbps(0));
        const double s = (v * (q + gp) - buffer_chunks) / m.size_mb(chunk, l);
        if (s >= best_score) {
            best_score = s;
            best = l;
        }
    }
    return best;
}

} // namespace

TEST_CASE("constant policy") {
    const auto ladder = QualityLadder::default_ladder();
    CHECK(constant_level(ladder, 5000) == 4);
    CHECK(constant_level(ladder, 4999) == 3);
    CHECK(constant_level(ladder, 100) == 0);
    CHECK(constant_level(ladder, 1e9) == 6);
    const auto manifest = default_manifest(1);
    const auto policy = constant_policy();
    PlayerState s;
    CHECK(policy(s, manifest) == 4);
    s.buffer_s = 17;
    s.history = history_of(0.3);
    CHECK(policy(s, manifest) == 4);
}

TEST_CASE("throughput rule") {
    const auto ladder = QualityLadder::default_ladder();
    CHECK(throughput_level(std::array<HistoryEntry, kHistoryLength>{}, ladder) == 0);
    CHECK(throughput_level(history_of(10.0), ladder) == 6);
    // 0.9 x 1 Mbps admits the 900 Kbps level exactly; just below it only 700 fits.
    CHECK(throughput_level(history_of(1.0), ladder) == 1);
    CHECK(throughput_level(history_of(0.99), ladder) == 0);
    CHECK(throughput_level(history_of(2.3), ladder) == 2); // 2.07 Mbps budget

    std::array<HistoryEntry, kHistoryLength> partial{};
    partial[4] = {2.0, 1.0};
    partial[5] = {6.0, 1.0};
    CHECK(harmonic_mean_throughput(partial) == doctest::Approx(3.0)); // 2 / (1/2 + 1/6)
    CHECK(throughput_level(partial, ladder) == 2); // 2.7 Mbps budget
}

TEST_CASE("throughput rule is monotone in the history") {
    const auto ladder = QualityLadder::default_ladder();
    Rng rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        std::array<HistoryEntry, kHistoryLength> h{};
        for (auto &e : h) e.throughput_mbps = uniform01(rng) < 0.2 ? 0.0 : uniform(rng, 0.1, 12.0);
        auto raised = h;
        for (auto &e : raised)
            if (e.throughput_mbps > 0.0) e.throughput_mbps *= uniform(rng, 1.0, 2.0);
        CHECK(throughput_level(raised, ladder) >= throughput_level(h, ladder));
    }
}

TEST_CASE("bola defaults") {
    const auto ladder = QualityLadder::default_ladder();
    const auto p = BolaParams::defaults(ladder, 20.0, 4.0);
    CHECK(p.startup_utility == 5.0);
    CHECK(p.control_gain == doctest::Approx(4.0 / (std::log(8000.0 / 700.0) + 5.0)).epsilon(1e-14));
}

TEST_CASE("bola matches a brute-force argmax") {
    const auto manifest = default_manifest(3);
    const auto p = BolaParams::defaults(manifest.ladder(), 20.0, 4.0);
    // Empty buffer: the score is V (q + gp) / S, largest at the lowest level.
    CHECK(bola_level(p, 0.0, manifest, 0) == brute_bola(p.control_gain, 5.0, 0.0, manifest, 0));
    CHECK(bola_level(p, 0.0, manifest, 0) == 0);
    Rng rng(9);
    for (int trial = 0; trial < 5000; ++trial) {
        const double buffer = uniform(rng, 0.0, 20.0);
        const auto chunk = uniform_index(rng, manifest.num_chunks());
        const auto scores = bola_scores(p, buffer, manifest, chunk);
        const bool any_positive = std::any_of(scores.begin(), scores.end(), [](double s) { return s >= 0.0; });
        const auto level = bola_level(p, buffer, manifest, chunk);
        if (any_positive)
            CHECK(level == brute_bola(p.control_gain, 5.0, buffer / 4.0, manifest, chunk));
        else
            CHECK(level == 6);
    }
}

TEST_CASE("bola is monotone in the buffer") {
    const auto manifest = default_manifest(4);
    const auto p = BolaParams::defaults(manifest.ladder(), 20.0, 4.0);
    for (std::size_t chunk = 0; chunk < manifest.num_chunks(); chunk += 7) {
        std::size_t prev = 0;
        for (double b = 0.0; b <= 20.0; b += 0.05) {
            const auto level = bola_level(p, b, manifest, chunk);
            CHECK(level >= prev);
            prev = level;
        }
        CHECK(bola_level(p, 20.0, manifest, chunk) == 6);
    }
}

TEST_CASE("bola scale behaviour") {
    const auto manifest = default_manifest(6);
    std::vector<std::vector<double>> scaled_sizes;
    const double c = 3.7;
    for (std::size_t n = 0; n < manifest.num_chunks(); ++n) {
        const auto row = manifest.chunk_sizes_mb(n);
        std::vector<double> r(row.begin(), row.end());
        for (auto &x : r) x *= c;
        scaled_sizes.push_back(r);
    }
    const VideoManifest scaled(manifest.ladder(), manifest.chunk_duration_s(), scaled_sizes);
    const auto p = BolaParams::defaults(manifest.ladder(), 20.0, 4.0);
    const BolaParams p_scaled{p.control_gain / c, p.startup_utility};
    const BolaParams p_gain{p.control_gain * c, p.startup_utility};
    Rng rng(12);
    for (int trial = 0; trial < 2000; ++trial) {
        const double b = uniform(rng, 0.0, 20.0);
        const auto chunk = uniform_index(rng, manifest.num_chunks());
        // Scaling every size leaves the argmax unchanged.
        CHECK(bola_level(p, b, scaled, chunk) == bola_level(p, b, manifest, chunk));
        // Scaling V together with the buffer scales every score uniformly.
        if (c * b <= 1e9) CHECK(bola_level(p_gain, c * b, manifest, chunk) == bola_level(p, b, manifest, chunk));
    }
    // Sizes times c and V divided by c: identical decisions on an empty buffer.
    for (std::size_t chunk = 0; chunk < manifest.num_chunks(); ++chunk)
        CHECK(bola_level(p_scaled, 0.0, scaled, chunk) == bola_level(p, 0.0, manifest, chunk));
}

TEST_CASE("bola rejects invalid inputs") {
    const auto manifest = default_manifest(1);
    CHECK_THROWS_AS(bola_scores({0.0, 5.0}, 1.0, manifest, 0), ParameterError);
    CHECK_THROWS_AS(bola_scores({1.0, 5.0}, -1.0, manifest, 0), ParameterError);
    // A single-level ladder, where every utility is equal, cannot be built.
    CHECK_THROWS_AS(QualityLadder({700}), ParameterError);
}

TEST_CASE("baselines on a constant trace") {
    const auto manifest = fdrl::testing::flat_manifest();
    const auto fast = fdrl::testing::constant_trace(12.0);
    const auto outcomes = run_episode(manifest, fast, {}, throughput_policy());
    CHECK(outcomes.front().level == 0);
    for (std::size_t i = 1; i < outcomes.size(); ++i) CHECK(outcomes[i].level == 6);
    const auto bola = run_episode(manifest, fast, {}, bola_policy(BolaParams::defaults(manifest.ladder(), 20.0, 4.0)));
    CHECK(bola.size() == 60);
}

#include "fdrl/manifest.hpp"

#include "fdrl/error.hpp"
#include "fdrl/random.hpp"
#include "text_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace fdrl {

QualityLadder::QualityLadder(std::vector<double> bitrates_kbps) : bitrates_kbps_(std::move(bitrates_kbps)) {
    if (bitrates_kbps_.size() < 2) throw ParameterError("quality ladder needs at least two levels");
    if (!(bitrates_kbps_.front() > 0.0)) throw ParameterError("quality ladder bitrates must be positive");
    for (std::size_t i = 1; i < bitrates_kbps_.size(); ++i)
        if (!(bitrates_kbps_[i] > bitrates_kbps_[i - 1]))
            throw ParameterError("quality ladder bitrates must be strictly ascending");
}

QualityLadder QualityLadder::default_ladder() { return QualityLadder({700, 900, 2000, 3000, 5000, 6000, 8000}); }

VideoManifest::VideoManifest(QualityLadder ladder, double chunk_duration_s,
                             std::vector<std::vector<double>> chunk_sizes_mb)
    : ladder_(std::move(ladder)), chunk_duration_s_(chunk_duration_s), sizes_(std::move(chunk_sizes_mb)) {
    if (!(chunk_duration_s_ > 0.0) || !std::isfinite(chunk_duration_s_))
        throw ParameterError("chunk duration must be positive");
    if (sizes_.empty()) throw ParameterError("manifest needs at least one chunk");
    for (std::size_t n = 0; n < sizes_.size(); ++n) {
        const auto &row = sizes_[n];
        if (row.size() != ladder_.size())
            throw ParameterError("chunk " + std::to_string(n) + " has " + std::to_string(row.size()) +
                                 " sizes, ladder has " + std::to_string(ladder_.size()) + " levels");
        for (std::size_t l = 0; l < row.size(); ++l) {
            if (!(row[l] > 0.0) || !std::isfinite(row[l]))
                throw ParameterError("chunk " + std::to_string(n) + " level " + std::to_string(l) +
                                     ": size must be positive");
            if (l > 0 && !(row[l] > row[l - 1]))
                throw ParameterError("chunk " + std::to_string(n) + ": sizes must ascend across levels");
        }
    }
}

VideoManifest generate_manifest(const QualityLadder &ladder, std::size_t num_chunks, double chunk_duration_s,
                                SizeFactorRange factors, std::uint64_t seed) {
    if (!(factors.low > 0.0 && factors.low <= factors.high && factors.high <= 1.0))
        throw ParameterError("size factor range must satisfy 0 < low <= high <= 1");
    if (num_chunks == 0) throw ParameterError("num_chunks must be at least 1");
    if (!(chunk_duration_s > 0.0)) throw ParameterError("chunk duration must be positive");

    Rng rng(derive_seed(seed, "manifest"));
    std::vector<std::vector<double>> sizes(num_chunks, std::vector<double>(ladder.size()));
    for (auto &row : sizes) {
        const double f = uniform(rng, factors.low, factors.high);
        for (std::size_t l = 0; l < ladder.size(); ++l)
            row[l] = std::round(ladder.mbps(l) * chunk_duration_s * f * 1e6) / 1e6;
    }
    return VideoManifest(ladder, chunk_duration_s, std::move(sizes));
}

VideoManifest default_manifest(std::uint64_t seed) {
    return generate_manifest(QualityLadder::default_ladder(), kDefaultNumChunks, kDefaultChunkDurationS,
                             SizeFactorRange{}, seed);
}

void write_manifest(const VideoManifest &manifest, std::ostream &out) {
    out << "chunk_duration_s=" << detail::format_exact(manifest.chunk_duration_s()) << '\n';
    const auto rates = manifest.ladder().bitrates_kbps();
    for (std::size_t l = 0; l < rates.size(); ++l) out << (l ? "," : "") << detail::format_exact(rates[l]);
    out << '\n';
    for (std::size_t n = 0; n < manifest.num_chunks(); ++n) {
        const auto row = manifest.chunk_sizes_mb(n);
        for (std::size_t l = 0; l < row.size(); ++l) out << (l ? "," : "") << detail::format_fixed(row[l], 6);
        out << '\n';
    }
}

VideoManifest read_manifest(std::istream &in, const std::string &source) {
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string &what) -> ParseError {
        return ParseError(source + ":" + std::to_string(line_no) + ": " + what);
    };

    ++line_no;
    if (!std::getline(in, line)) throw fail("missing chunk_duration_s header");
    constexpr std::string_view key = "chunk_duration_s=";
    const auto header = detail::trim(line);
    if (header.substr(0, key.size()) != key) throw fail("expected 'chunk_duration_s=<seconds>'");
    const auto duration = detail::parse_double(header.substr(key.size()));
    if (!duration) throw fail("chunk_duration_s is not a number");

    ++line_no;
    if (!std::getline(in, line)) throw fail("missing bitrate row");
    std::vector<double> rates;
    const auto rate_fields = detail::split(line, ',');
    for (std::size_t i = 0; i < rate_fields.size(); ++i) {
        const auto v = detail::parse_double(rate_fields[i]);
        if (!v) throw fail("bitrate field " + std::to_string(i + 1) + " is not a number");
        rates.push_back(*v);
    }

    std::vector<std::vector<double>> sizes;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        if (fields.size() != rates.size())
            throw fail("expected " + std::to_string(rates.size()) + " size fields, found " +
                       std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t i = 0; i < fields.size(); ++i) {
            const auto v = detail::parse_double(fields[i]);
            if (!v) throw fail("size field " + std::to_string(i + 1) + " is not a number");
            row.push_back(*v);
        }
        sizes.push_back(std::move(row));
    }

    try {
        return VideoManifest(QualityLadder(std::move(rates)), *duration, std::move(sizes));
    } catch (const ParameterError &e) {
        throw ParseError(source + ": " + e.what());
    }
}

void save_manifest(const VideoManifest &manifest, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_manifest(manifest, out);
}

VideoManifest load_manifest(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_manifest(in, path.string());
}

} // namespace fdrl

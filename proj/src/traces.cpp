#include "fdrl/traces.hpp"

#include "fdrl/error.hpp"
#include "fdrl/random.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fdrl {

std::string_view group_name(TraceGroup group) {
    switch (group) {
    case TraceGroup::FccHigh: return "fcc_high";
    case TraceGroup::FccLow: return "fcc_low";
    case TraceGroup::LteHigh: return "lte_high";
    case TraceGroup::LteLow: return "lte_low";
    }
    return "unknown";
}

std::optional<TraceGroup> parse_group(std::string_view name) {
    for (const auto g : kAllGroups)
        if (group_name(g) == name) return g;
    return std::nullopt;
}

bool is_high_bandwidth(TraceGroup group) { return group == TraceGroup::FccHigh || group == TraceGroup::LteHigh; }

BandwidthTrace::BandwidthTrace(std::string id, TraceGroup group, std::vector<ThroughputSample> samples)
    : id_(std::move(id)), group_(group), samples_(std::move(samples)), duration_s_(0.0) {
    const auto fail = [&](const std::string &what) { return ValidationError("trace '" + id_ + "': " + what); };
    if (samples_.size() < 2) throw fail("needs at least two samples");
    if (samples_.front().t_s != 0.0) throw fail("timestamps must start at 0");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const auto &s = samples_[i];
        if (!std::isfinite(s.t_s) || (i > 0 && !(s.t_s > samples_[i - 1].t_s)))
            throw fail("timestamps must strictly increase (sample " + std::to_string(i) + ")");
        if (!(s.mbps > 0.0) || !std::isfinite(s.mbps))
            throw fail("throughput must be positive (sample " + std::to_string(i) + ")");
    }
    const double last = samples_.back().t_s;
    duration_s_ = last + (last - samples_[samples_.size() - 2].t_s);
}

double BandwidthTrace::mean_mbps() const {
    double area = 0.0;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const double end = i + 1 < samples_.size() ? samples_[i + 1].t_s : duration_s_;
        area += samples_[i].mbps * (end - samples_[i].t_s);
    }
    return area / duration_s_;
}

TraceSegment segment_at(const BandwidthTrace &trace, double t_s) {
    if (!(t_s >= 0.0)) throw ParameterError("trace time must be non-negative");
    const double duration = trace.duration_s();
    const auto &samples = trace.samples();
    double base = std::floor(t_s / duration) * duration;
    double local = t_s - base;
    if (local < 0.0) { // t / duration rounded up to a whole period
        base -= duration;
        local += duration;
    }
    if (local >= duration) { // rounding at the period edge
        base += duration;
        local = 0.0;
    }
    const auto it = std::upper_bound(samples.begin(), samples.end(), local,
                                     [](double t, const ThroughputSample &s) { return t < s.t_s; });
    auto idx = static_cast<std::size_t>(std::distance(samples.begin(), it)) - 1;
    while (true) {
        const double boundary = idx + 1 < samples.size() ? samples[idx + 1].t_s : duration;
        const double end = base + boundary;
        if (end > t_s) return {samples[idx].mbps, end};
        // t sits on the boundary after rounding; step to the next segment.
        if (++idx == samples.size()) {
            idx = 0;
            base += duration;
        }
    }
}

double throughput_at(const BandwidthTrace &trace, double t_s) { return segment_at(trace, t_s).mbps; }

std::vector<std::size_t> TraceCorpus::indices(TraceGroup group, std::optional<Split> which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (traces[i].group() != group) continue;
        if (which) {
            const auto it = split.find(traces[i].id());
            if (it == split.end() || it->second != *which) continue;
        }
        out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> TraceCorpus::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto it = split.find(traces[i].id());
        if (it != split.end() && it->second == which) out.push_back(i);
    }
    return out;
}

namespace {

struct GroupProcess {
    double granularity_s;
    double autocorrelation;
    double log_sigma;     // marginal std-dev of log throughput
    double median_lo_mbps; // per-trace median drawn log-uniformly in [lo, hi]
    double median_hi_mbps;
};

GroupProcess process_for(TraceGroup group, const CorpusOptions &options) {
    switch (group) {
    case TraceGroup::FccHigh: return {options.fcc_granularity_s, 0.9, 0.35, 2.4, 9.0};
    case TraceGroup::FccLow: return {options.fcc_granularity_s, 0.9, 0.35, 0.7, 1.8};
    case TraceGroup::LteHigh: return {options.lte_granularity_s, 0.7, 0.6, 2.2, 10.0};
    case TraceGroup::LteLow: return {options.lte_granularity_s, 0.7, 0.6, 0.6, 1.6};
    }
    return {};
}

std::vector<ThroughputSample> draw_samples(const GroupProcess &p, double duration_s, Rng &rng) {
    const auto count = static_cast<std::size_t>(std::ceil(duration_s / p.granularity_s - 1e-9));
    const double location = std::log(p.median_lo_mbps) +
                            uniform01(rng) * (std::log(p.median_hi_mbps) - std::log(p.median_lo_mbps));
    const double innovation = p.log_sigma * std::sqrt(1.0 - p.autocorrelation * p.autocorrelation);
    std::vector<ThroughputSample> samples;
    samples.reserve(count);
    double x = location + p.log_sigma * standard_normal(rng);
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) x = location + p.autocorrelation * (x - location) + innovation * standard_normal(rng);
        const double mbps = std::max(1e-6, std::round(std::exp(x) * 1e6) / 1e6);
        samples.push_back({static_cast<double>(i) * p.granularity_s, mbps});
    }
    return samples;
}

} // namespace

TraceCorpus generate_corpus(const CorpusOptions &options, std::uint64_t seed) {
    if (options.per_group_count < 1) throw ParameterError("per_group_count must be at least 1");
    if (!(options.duration_s >= 320.0)) throw ParameterError("trace duration must be at least 320 s");
    if (!(options.fcc_granularity_s > 0.0) || !(options.lte_granularity_s > 0.0))
        throw ParameterError("granularity must be positive");

    TraceCorpus corpus;
    corpus.traces.reserve(options.per_group_count * kAllGroups.size());
    for (const auto group : kAllGroups) {
        const auto process = process_for(group, options);
        const bool high = is_high_bandwidth(group);
        for (std::size_t i = 0; i < options.per_group_count; ++i) {
            Rng rng = make_rng(seed, group_name(group), i);
            std::string id(group_name(group));
            id += "_" + std::string(4 - std::min<std::size_t>(4, std::to_string(i).size()), '0') + std::to_string(i);
            while (true) {
                BandwidthTrace trace(id, group, draw_samples(process, options.duration_s, rng));
                const double mean = trace.mean_mbps();
                if (high ? mean > kGroupThresholdMbps : mean < kGroupThresholdMbps) {
                    corpus.traces.push_back(std::move(trace));
                    break;
                }
            }
        }
    }
    return corpus;
}

TraceCorpus split_corpus(TraceCorpus corpus, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ParameterError("train fraction must be in (0, 1)");
    corpus.split.clear();
    for (const auto group : kAllGroups) {
        auto members = corpus.indices(group);
        if (members.empty()) continue;
        if (members.size() < 2)
            throw SplitError("group " + std::string(group_name(group)) + " has fewer than 2 traces");
        Rng rng = make_rng(seed, "split", group_index(group));
        for (std::size_t i = members.size() - 1; i > 0; --i)
            std::swap(members[i], members[uniform_index(rng, i + 1)]);
        const auto n = members.size();
        const auto n_train = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);
        for (std::size_t k = 0; k < n; ++k)
            corpus.split[corpus.traces[members[k]].id()] = k < n_train ? Split::Train : Split::Test;
    }
    return corpus;
}

void write_trace(const BandwidthTrace &trace, std::ostream &out) {
    for (const auto &s : trace.samples())
        out << detail::format_exact(s.t_s) << ',' << detail::format_exact(s.mbps) << '\n';
}

BandwidthTrace read_trace(std::istream &in, std::string id, TraceGroup group, const std::string &source) {
    std::vector<ThroughputSample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split(line, ',');
        const auto t = fields.size() == 2 ? detail::parse_double(fields[0]) : std::nullopt;
        const auto v = fields.size() == 2 ? detail::parse_double(fields[1]) : std::nullopt;
        if (!t || !v) {
            if (line_no == 1 && samples.empty() && fields.size() == 2) continue; // header
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected 't_s,mbps'");
        }
        samples.push_back({*t, *v});
    }
    return BandwidthTrace(std::move(id), group, std::move(samples));
}

void save_corpus(const TraceCorpus &corpus, const std::filesystem::path &root) {
    namespace fs = std::filesystem;
    for (const auto g : kAllGroups) fs::create_directories(root / group_name(g));
    for (const auto &trace : corpus.traces) {
        const auto path = root / group_name(trace.group()) / (trace.id() + ".csv");
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write_trace(trace, out);
    }
    if (!corpus.split.empty()) {
        std::ofstream out(root / "split.csv");
        for (const auto &trace : corpus.traces) {
            const auto it = corpus.split.find(trace.id());
            if (it == corpus.split.end()) continue;
            out << trace.id() << ',' << (it->second == Split::Train ? "Train" : "Test") << '\n';
        }
    }
}

TraceCorpus load_trace_dir(const std::filesystem::path &root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ParseError("trace directory not found: " + root.string());
    TraceCorpus corpus;
    for (const auto group : kAllGroups) {
        const auto dir = root / group_name(group);
        if (!fs::is_directory(dir)) continue;
        std::vector<fs::path> files;
        for (const auto &entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto &file : files) {
            std::ifstream in(file);
            corpus.traces.push_back(read_trace(in, file.stem().string(), group, file.string()));
        }
    }

    const auto split_path = root / "split.csv";
    if (fs::exists(split_path)) {
        std::ifstream in(split_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (detail::trim(line).empty()) continue;
            const auto fields = detail::split(line, ',');
            const auto where = split_path.string() + ":" + std::to_string(line_no);
            if (fields.size() != 2) throw ParseError(where + ": expected 'trace-id,Train|Test'");
            Split s;
            if (fields[1] == "Train") s = Split::Train;
            else if (fields[1] == "Test") s = Split::Test;
            else throw ParseError(where + ": split must be Train or Test");
            corpus.split[std::string(fields[0])] = s;
        }
        for (const auto &[id, s] : corpus.split) {
            const bool known = std::any_of(corpus.traces.begin(), corpus.traces.end(),
                                           [&](const BandwidthTrace &t) { return t.id() == id; });
            if (!known) throw ValidationError("split.csv names unknown trace '" + id + "'");
        }
    }
    return corpus;
}

} // namespace fdrl

#pragma once

// Batch experiment driver behind the command-line tool: asset generation,
// federated training runs, evaluation tables and convergence reports.

#include "fdrl/agents.hpp"
#include "fdrl/fedserver.hpp"
#include "fdrl/manifest.hpp"
#include "fdrl/traces.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace fdrl {

/// The (K, E) cells compared in the standard experiment grid.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 5> kStandardGrid{
    {{5, 10}, {10, 5}, {10, 10}, {10, 20}, {20, 10}}};

/// Everything needed to reproduce a training run.
struct ExperimentConfig {
    std::filesystem::path manifest_path;
    std::filesystem::path traces_path;
    FedConfig fed;
    AgentConfigs agents;
    std::vector<std::uint64_t> seeds{1};
    std::string label; // defaults to "FDRLABR-<ALGO> K=<k> E=<e>"

    std::string resolved_label() const;
    bool operator==(const ExperimentConfig &) const = default;
};

std::string config_to_json(const ExperimentConfig &config);
ExperimentConfig config_from_json(const std::string &text, const std::string &source = "<config>");
void save_config(const ExperimentConfig &config, const std::filesystem::path &path);
ExperimentConfig load_config(const std::filesystem::path &path);

struct GenTracesOptions {
    CorpusOptions corpus;
    double train_fraction = 0.8;
    std::uint64_t seed = 1;
};

/// Generates, splits and saves a corpus. Returns it as written.
TraceCorpus gen_traces(const GenTracesOptions &options, const std::filesystem::path &out);

struct RunOutputs {
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    FederationResult result;
};

/// One federated run per seed under <out>/seed_<s>/ (round_log.csv, timing.csv,
/// best.json, final.json, state.bin), plus <out>/config.json. A seed whose
/// outputs are complete is loaded instead of re-run; a partially finished
/// seed continues from its last state snapshot.
std::vector<RunOutputs> train(const ExperimentConfig &config, const std::filesystem::path &out,
                              std::size_t threads = 1, bool verbose = false);

struct EvalRow {
    std::string policy;
    std::size_t runs = 0;
    double reward_mean = 0.0;
    double reward_std = 0.0;
    std::array<double, 4> group_mean{};
    std::array<double, 4> group_std{};
    double utility = 0.0;
    double switch_penalty = 0.0;
    double rebuffer_s = 0.0;

    bool operator==(const EvalRow &) const = default;
};

struct EvalRequest {
    std::vector<std::filesystem::path> models; // checkpoints; runs sharing a label form one row
    std::vector<std::string> baselines{"constant", "thghput", "bola"};
    FedConfig fed; // client RTTs / buffer for the test episodes
};

/// Evaluates every model and baseline on the corpus test split. The three
/// baselines are always included.
std::vector<EvalRow> evaluate_policies(const EvalRequest &request, const TraceCorpus &corpus,
                                       const VideoManifest &manifest);
/// Evaluates one policy over the test split and folds it into a single-run row.
EvalRow eval_row(const std::string &name, const std::vector<EvalTable> &runs);

void write_eval_csv(const std::vector<EvalRow> &rows, std::ostream &out);
std::vector<EvalRow> read_eval_csv(std::istream &in, const std::string &source = "<stream>");

struct ReportRow {
    std::size_t round = 0;
    double mean = 0.0;     // global mean reward averaged over runs
    double smoothed = 0.0; // running average of `mean`
    double std_dev = 0.0;  // across runs, of each run's running average
};

std::vector<ReportRow> convergence_report(const std::vector<std::vector<RoundLog>> &runs, std::size_t window);
void write_report_csv(const std::vector<ReportRow> &rows, std::ostream &out);

} // namespace fdrl

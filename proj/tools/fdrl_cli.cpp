// Command-line front end: asset generation, training, evaluation and reports.

#include "fdrl/error.hpp"
#include "fdrl/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace fdrl;

int gen_traces_cmd(std::size_t per_group, std::uint64_t seed, double train_fraction, const std::string &out) {
    GenTracesOptions options;
    options.corpus.per_group_count = per_group;
    options.seed = seed;
    options.train_fraction = train_fraction;
    const auto corpus = gen_traces(options, out);
    for (const auto group : kAllGroups) {
        const auto idx = corpus.indices(group);
        double sum = 0.0;
        for (const auto i : idx) sum += corpus.traces[i].mean_mbps();
        std::printf("%-9s %5zu traces  mean %.3f Mbps  train %zu  test %zu\n", std::string(group_name(group)).c_str(),
                    idx.size(), idx.empty() ? 0.0 : sum / static_cast<double>(idx.size()),
                    corpus.indices(group, Split::Train).size(), corpus.indices(group, Split::Test).size());
    }
    return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::string> &items) {
    std::vector<std::uint64_t> seeds;
    for (const auto &s : items) {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw ParameterError("bad seed '" + s + "'");
        seeds.push_back(v);
    }
    return seeds;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Federated deep-RL adaptive bitrate streaming"};
    app.require_subcommand(1);

    // gen-traces
    auto *gt = app.add_subcommand("gen-traces", "Generate the synthetic bandwidth trace corpus");
    std::size_t per_group = 1000;
    std::uint64_t gt_seed = 1;
    double train_fraction = 0.8;
    std::string gt_out;
    gt->add_option("--per-group", per_group, "Traces per group")->check(CLI::PositiveNumber);
    gt->add_option("--seed", gt_seed, "Random seed");
    gt->add_option("--train-fraction", train_fraction, "Share of each group used for training")
        ->check(CLI::Range(0.0, 1.0));
    gt->add_option("--out", gt_out, "Output directory")->required();

    // gen-manifest
    auto *gm = app.add_subcommand("gen-manifest", "Generate a video manifest");
    std::uint64_t gm_seed = 1;
    std::size_t chunks = kDefaultNumChunks;
    double chunk_duration = kDefaultChunkDurationS;
    SizeFactorRange factors;
    std::string gm_out;
    gm->add_option("--seed", gm_seed, "Random seed");
    gm->add_option("--chunks", chunks, "Number of chunks")->check(CLI::PositiveNumber);
    gm->add_option("--duration", chunk_duration, "Chunk duration in seconds")->check(CLI::PositiveNumber);
    gm->add_option("--factor-low", factors.low, "Lowest size factor");
    gm->add_option("--factor-high", factors.high, "Highest size factor");
    gm->add_option("--out", gm_out, "Output file")->required();

    // train
    auto *tr = app.add_subcommand("train", "Run federated training");
    std::string algo = "dqn", traces, manifest, tr_out, config_path;
    std::size_t k = 10, e = 10, rounds = 500, clients = 100, threads = 1;
    std::vector<std::string> seeds{"1"};
    bool quiet = false, grid = false;
    tr->add_option("--config", config_path, "Experiment config (JSON); other options override it");
    tr->add_option("--algo", algo, "dqn, a2c or ppo")->check(CLI::IsMember({"dqn", "a2c", "ppo"}));
    tr->add_option("--k", k, "Clients per round")->check(CLI::PositiveNumber);
    tr->add_option("--e", e, "Local episodes per round")->check(CLI::PositiveNumber);
    tr->add_option("--rounds", rounds, "Communication rounds")->check(CLI::PositiveNumber);
    tr->add_option("--clients", clients, "Number of clients")->check(CLI::PositiveNumber);
    tr->add_option("--seeds", seeds, "Comma-separated seeds")->delimiter(',');
    tr->add_option("--traces", traces, "Trace directory");
    tr->add_option("--manifest", manifest, "Manifest file");
    tr->add_option("--threads", threads, "Worker threads (0: all cores)");
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_flag("--quiet", quiet, "No per-round progress");
    tr->add_flag("--grid", grid, "Run every (K,E) cell of the standard grid into <out>/K<k>_E<e>/");

    // eval
    auto *ev = app.add_subcommand("eval", "Evaluate models and baselines on the test split");
    std::vector<std::string> models;
    std::vector<std::string> baselines{"constant", "thghput", "bola"};
    std::string ev_traces, ev_manifest, ev_out, ev_config;
    std::size_t ev_clients = 100;
    std::uint64_t ev_seed = 1;
    ev->add_option("--models", models, "Model checkpoints (best.json)");
    ev->add_option("--baselines", baselines, "Baselines to include")->delimiter(',');
    ev->add_option("--config", ev_config, "Experiment config supplying client settings");
    ev->add_option("--clients", ev_clients, "Number of clients (test RTT assignment)");
    ev->add_option("--seed", ev_seed, "Seed for the client RTTs");
    ev->add_option("--traces", ev_traces, "Trace directory")->required();
    ev->add_option("--manifest", ev_manifest, "Manifest file")->required();
    ev->add_option("--out", ev_out, "Output CSV")->required();

    // report
    auto *rp = app.add_subcommand("report", "Convergence curve from round logs");
    std::vector<std::string> logs;
    std::size_t window = 20;
    std::string rp_out;
    rp->add_option("--logs", logs, "round_log.csv files")->required();
    rp->add_option("--window", window, "Running-average window")->check(CLI::PositiveNumber);
    rp->add_option("--out", rp_out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gt->parsed()) return gen_traces_cmd(per_group, gt_seed, train_fraction, gt_out);

        if (gm->parsed()) {
            save_manifest(generate_manifest(QualityLadder::default_ladder(), chunks, chunk_duration, factors, gm_seed), gm_out);
            return 0;
        }

        if (tr->parsed()) {
            ExperimentConfig config;
            if (!config_path.empty()) config = load_config(config_path);
            if (!config_path.empty() && tr->count("--algo") == 0) algo = std::string(algo_name(config.fed.algo));
            config.fed.algo = *parse_algo(algo);
            if (config_path.empty() || tr->count("--k")) config.fed.clients_per_round = k;
            if (config_path.empty() || tr->count("--e")) config.fed.local_episodes = e;
            if (config_path.empty() || tr->count("--rounds")) config.fed.rounds = rounds;
            if (config_path.empty() || tr->count("--clients")) config.fed.num_clients = clients;
            if (config_path.empty() || tr->count("--seeds")) config.seeds = parse_seeds(seeds);
            if (!traces.empty()) config.traces_path = traces;
            if (!manifest.empty()) config.manifest_path = manifest;
            if (config.traces_path.empty() || config.manifest_path.empty())
                throw ParameterError("--traces and --manifest are required without a config");
            std::vector<std::pair<ExperimentConfig, std::filesystem::path>> jobs;
            if (grid) {
                for (const auto &[gk, ge] : kStandardGrid) {
                    ExperimentConfig cell = config;
                    cell.fed.clients_per_round = gk;
                    cell.fed.local_episodes = ge;
                    cell.label.clear();
                    jobs.emplace_back(cell, std::filesystem::path(tr_out) /
                                                ("K" + std::to_string(gk) + "_E" + std::to_string(ge)));
                }
            } else {
                jobs.emplace_back(config, tr_out);
            }
            for (auto &[cell, dir] : jobs) {
                cell.fed.validate();
                const auto runs = train(cell, dir, threads, !quiet);
                for (const auto &run : runs)
                    std::printf("%s seed %llu: best validation reward %.4f at round %zu -> %s\n",
                                cell.resolved_label().c_str(), static_cast<unsigned long long>(run.seed),
                                run.result.best.validation_reward, run.result.best.round,
                                (run.dir / "best.json").string().c_str());
            }
            return 0;
        }

        if (ev->parsed()) {
            EvalRequest request;
            if (!ev_config.empty()) request.fed = load_config(ev_config).fed;
            if (ev_config.empty() || ev->count("--clients")) request.fed.num_clients = ev_clients;
            if (ev_config.empty() || ev->count("--seed")) request.fed.seed = ev_seed;
            request.baselines = baselines;
            for (const auto &m : models) request.models.emplace_back(m);
            const auto rows =
                evaluate_policies(request, load_trace_dir(ev_traces), load_manifest(ev_manifest));
            std::ofstream out(ev_out);
            if (!out) throw std::runtime_error("cannot write " + ev_out);
            write_eval_csv(rows, out);
            for (const auto &r : rows)
                std::printf("%-24s reward %8.4f +- %.4f  utility %.4f  switch %.4f  rebuffer %.4f\n", r.policy.c_str(),
                            r.reward_mean, r.reward_std, r.utility, r.switch_penalty, r.rebuffer_s);
            return 0;
        }

        if (rp->parsed()) {
            std::vector<std::vector<RoundLog>> runs;
            for (const auto &path : logs) {
                std::ifstream in(path);
                if (!in) throw ParseError("cannot open " + path);
                runs.push_back(read_round_log(in, path));
            }
            std::ofstream out(rp_out);
            if (!out) throw std::runtime_error("cannot write " + rp_out);
            write_report_csv(convergence_report(runs, window), out);
            return 0;
        }
    } catch (const std::exception &ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}

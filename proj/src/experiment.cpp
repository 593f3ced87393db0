#include "fdrl/experiment.hpp"

#include "fdrl/baselines.hpp"
#include "fdrl/error.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fdrl {

using nlohmann::json;

std::string ExperimentConfig::resolved_label() const {
    if (!label.empty()) return label;
    std::string algo(algo_name(fed.algo));
    std::transform(algo.begin(), algo.end(), algo.begin(), [](unsigned char c) { return std::toupper(c); });
    return "FDRLABR-" + algo + " K=" + std::to_string(fed.clients_per_round) +
           " E=" + std::to_string(fed.local_episodes);
}

// ---------------------------------------------------------------------------
// Config serialization

namespace {

json fed_to_json(const FedConfig &f) {
    return {{"num_clients", f.num_clients},
            {"clients_per_round", f.clients_per_round},
            {"local_episodes", f.local_episodes},
            {"rounds", f.rounds},
            {"algo", algo_name(f.algo)},
            {"seed", f.seed},
            {"eval_every", f.eval_every},
            {"validation_fraction", f.validation_fraction},
            {"rtt_min_s", f.rtt_min_s},
            {"rtt_max_s", f.rtt_max_s},
            {"max_buffer_s", f.max_buffer_s},
            {"threads", f.threads},
            {"reward", {{"alpha", f.reward.alpha}, {"beta", f.reward.beta}}},
            {"scaling",
             {{"throughput_mbps", f.scaling.throughput_mbps},
              {"download_time_s", f.scaling.download_time_s},
              {"chunk_size_mb", f.scaling.chunk_size_mb},
              {"buffer_s", f.scaling.buffer_s},
              {"chunks_remaining", f.scaling.chunks_remaining},
              {"last_bitrate_mbps", f.scaling.last_bitrate_mbps}}}};
}

FedConfig fed_from_json(const json &j) {
    FedConfig f;
    f.num_clients = j.at("num_clients");
    f.clients_per_round = j.at("clients_per_round");
    f.local_episodes = j.at("local_episodes");
    f.rounds = j.at("rounds");
    const auto algo = parse_algo(j.at("algo").get<std::string>());
    if (!algo) throw ParseError("unknown algo '" + j.at("algo").get<std::string>() + "'");
    f.algo = *algo;
    f.seed = j.at("seed");
    f.eval_every = j.at("eval_every");
    f.validation_fraction = j.at("validation_fraction");
    f.rtt_min_s = j.at("rtt_min_s");
    f.rtt_max_s = j.at("rtt_max_s");
    f.max_buffer_s = j.at("max_buffer_s");
    f.threads = j.value("threads", std::size_t{1});
    f.reward = {j.at("reward").at("alpha"), j.at("reward").at("beta")};
    const auto &s = j.at("scaling");
    f.scaling = {s.at("throughput_mbps"), s.at("download_time_s"),  s.at("chunk_size_mb"),
                 s.at("buffer_s"),        s.at("chunks_remaining"), s.at("last_bitrate_mbps")};
    return f;
}

json agents_to_json(const AgentConfigs &a) {
    return {{"dqn",
             {{"learning_rate", a.dqn.learning_rate},
              {"batch_size", a.dqn.batch_size},
              {"target_period", a.dqn.target_period},
              {"gamma", a.dqn.gamma},
              {"exploration_fraction", a.dqn.exploration_fraction},
              {"initial_epsilon", a.dqn.initial_epsilon},
              {"final_epsilon", a.dqn.final_epsilon},
              {"replay_capacity", a.dqn.replay_capacity},
              {"anneal_horizon_steps", a.dqn.anneal_horizon_steps},
              {"max_grad_norm", a.dqn.max_grad_norm},
              {"hidden", a.dqn.hidden}}},
            {"a2c",
             {{"learning_rate", a.a2c.learning_rate},
              {"gamma", a.a2c.gamma},
              {"n_steps", a.a2c.n_steps},
              {"num_envs", a.a2c.num_envs},
              {"entropy_coef", a.a2c.entropy_coef},
              {"value_coef", a.a2c.value_coef},
              {"max_grad_norm", a.a2c.max_grad_norm},
              {"actor_hidden", a.a2c.actor_hidden},
              {"critic_hidden", a.a2c.critic_hidden}}},
            {"ppo",
             {{"learning_rate", a.ppo.learning_rate},
              {"gamma", a.ppo.gamma},
              {"n_steps", a.ppo.n_steps},
              {"num_envs", a.ppo.num_envs},
              {"clip_epsilon", a.ppo.clip_epsilon},
              {"epochs", a.ppo.epochs},
              {"entropy_coef", a.ppo.entropy_coef},
              {"value_coef", a.ppo.value_coef},
              {"max_grad_norm", a.ppo.max_grad_norm},
              {"actor_hidden", a.ppo.actor_hidden},
              {"critic_hidden", a.ppo.critic_hidden}}}};
}

AgentConfigs agents_from_json(const json &j) {
    AgentConfigs a;
    const auto &d = j.at("dqn");
    a.dqn.learning_rate = d.at("learning_rate");
    a.dqn.batch_size = d.at("batch_size");
    a.dqn.target_period = d.at("target_period");
    a.dqn.gamma = d.at("gamma");
    a.dqn.exploration_fraction = d.at("exploration_fraction");
    a.dqn.initial_epsilon = d.at("initial_epsilon");
    a.dqn.final_epsilon = d.at("final_epsilon");
    a.dqn.replay_capacity = d.at("replay_capacity");
    a.dqn.anneal_horizon_steps = d.at("anneal_horizon_steps");
    a.dqn.max_grad_norm = d.at("max_grad_norm");
    a.dqn.hidden = d.at("hidden").get<std::vector<std::size_t>>();
    const auto &c = j.at("a2c");
    a.a2c.learning_rate = c.at("learning_rate");
    a.a2c.gamma = c.at("gamma");
    a.a2c.n_steps = c.at("n_steps");
    a.a2c.num_envs = c.at("num_envs");
    a.a2c.entropy_coef = c.at("entropy_coef");
    a.a2c.value_coef = c.at("value_coef");
    a.a2c.max_grad_norm = c.at("max_grad_norm");
    a.a2c.actor_hidden = c.at("actor_hidden").get<std::vector<std::size_t>>();
    a.a2c.critic_hidden = c.at("critic_hidden").get<std::vector<std::size_t>>();
    const auto &p = j.at("ppo");
    a.ppo.learning_rate = p.at("learning_rate");
    a.ppo.gamma = p.at("gamma");
    a.ppo.n_steps = p.at("n_steps");
    a.ppo.num_envs = p.at("num_envs");
    a.ppo.clip_epsilon = p.at("clip_epsilon");
    a.ppo.epochs = p.at("epochs");
    a.ppo.entropy_coef = p.at("entropy_coef");
    a.ppo.value_coef = p.at("value_coef");
    a.ppo.max_grad_norm = p.at("max_grad_norm");
    a.ppo.actor_hidden = p.at("actor_hidden").get<std::vector<std::size_t>>();
    a.ppo.critic_hidden = p.at("critic_hidden").get<std::vector<std::size_t>>();
    return a;
}

double sample_std(const std::vector<double> &v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double> &v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

} // namespace

std::string config_to_json(const ExperimentConfig &config) {
    const json j{{"format", "fdrl-experiment"},
                 {"version", 1},
                 {"label", config.label},
                 {"manifest", config.manifest_path.string()},
                 {"traces", config.traces_path.string()},
                 {"seeds", config.seeds},
                 {"fed", fed_to_json(config.fed)},
                 {"agents", agents_to_json(config.agents)}};
    return j.dump(2);
}

ExperimentConfig config_from_json(const std::string &text, const std::string &source) {
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "fdrl-experiment") throw ParseError(source + ": not an experiment config");
        ExperimentConfig c;
        c.label = j.value("label", std::string{});
        c.manifest_path = j.at("manifest").get<std::string>();
        c.traces_path = j.at("traces").get<std::string>();
        c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        c.fed = fed_from_json(j.at("fed"));
        c.agents = agents_from_json(j.at("agents"));
        return c;
    } catch (const json::exception &e) {
        throw ParseError(source + ": " + e.what());
    }
}

void save_config(const ExperimentConfig &config, const std::filesystem::path &path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << config_to_json(config) << '\n';
}

ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json(buffer.str(), path.string());
}

// ---------------------------------------------------------------------------

TraceCorpus gen_traces(const GenTracesOptions &options, const std::filesystem::path &out) {
    auto corpus = split_corpus(generate_corpus(options.corpus, options.seed), options.train_fraction,
                               derive_seed(options.seed, "split"));
    save_corpus(corpus, out);
    return corpus;
}

std::vector<RunOutputs> train(const ExperimentConfig &config, const std::filesystem::path &out, std::size_t threads,
                              bool verbose) {
    namespace fs = std::filesystem;
    if (config.seeds.empty()) throw ParameterError("need at least one seed");
    fs::create_directories(out);
    save_config(config, out / "config.json");

    const auto manifest = load_manifest(config.manifest_path);
    const auto corpus = load_trace_dir(config.traces_path);

    std::vector<RunOutputs> runs;
    for (const auto seed : config.seeds) {
        RunOutputs run;
        run.seed = seed;
        run.dir = out / ("seed_" + std::to_string(seed));
        fs::create_directories(run.dir);
        const auto log_path = run.dir / "round_log.csv";
        const auto best_path = run.dir / "best.json";
        const auto final_path = run.dir / "final.json";

        if (fs::exists(log_path) && fs::exists(best_path) && fs::exists(final_path)) {
            std::ifstream in(log_path);
            run.result.logs = read_round_log(in, log_path.string());
            run.result.best = load_checkpoint(best_path);
            run.result.final_weights = load_checkpoint(final_path).weights;
            if (verbose) std::cerr << "seed " << seed << ": already complete, skipped\n";
            runs.push_back(std::move(run));
            continue;
        }

        FedConfig fed = config.fed;
        fed.seed = seed;
        if (threads != 0) fed.threads = threads;
        RunOptions options;
        options.state_path = run.dir / "state.bin";
        options.resume = true;
        options.label = config.resolved_label();
        if (verbose)
            options.on_round = [seed](const RoundLog &log) {
                std::cerr << "seed " << seed << " round " << log.round << " mean reward " << log.global_mean;
                if (!std::isnan(log.validation_reward)) std::cerr << " validation " << log.validation_reward;
                std::cerr << '\n';
            };
        run.result = run_federation(fed, config.agents, corpus, manifest, options);

        {
            std::ofstream timing(run.dir / "timing.csv");
            timing << "round,wall_time_s\n";
            for (const auto &log : run.result.logs) timing << log.round << ',' << log.wall_time_s << '\n';
        }
        save_checkpoint(run.result.best, best_path);
        ModelCheckpoint final_cp = run.result.best;
        final_cp.weights = run.result.final_weights;
        final_cp.round = fed.rounds;
        final_cp.validation_reward = run.result.logs.back().validation_reward;
        save_checkpoint(final_cp, final_path);
        // The round log is written last; its presence marks the seed as complete.
        std::ofstream log_out(log_path);
        write_round_log(run.result.logs, log_out);
        runs.push_back(std::move(run));
    }
    return runs;
}

// ---------------------------------------------------------------------------

EvalRow eval_row(const std::string &name, const std::vector<EvalTable> &runs) {
    EvalRow row;
    row.policy = name;
    row.runs = runs.size();
    std::vector<double> overall, utility, switches, rebuffer;
    std::array<std::vector<double>, 4> groups;
    for (const auto &t : runs) {
        overall.push_back(t.overall.reward);
        utility.push_back(t.overall.utility);
        switches.push_back(t.overall.switch_penalty);
        rebuffer.push_back(t.overall.rebuffer_s);
        for (std::size_t g = 0; g < 4; ++g) groups[g].push_back(t.groups[g].reward);
    }
    row.reward_mean = mean_of(overall);
    row.reward_std = sample_std(overall);
    for (std::size_t g = 0; g < 4; ++g) {
        row.group_mean[g] = mean_of(groups[g]);
        row.group_std[g] = sample_std(groups[g]);
    }
    row.utility = mean_of(utility);
    row.switch_penalty = mean_of(switches);
    row.rebuffer_s = mean_of(rebuffer);
    return row;
}

std::vector<EvalRow> evaluate_policies(const EvalRequest &request, const TraceCorpus &corpus,
                                       const VideoManifest &manifest) {
    const auto tests = corpus.indices(Split::Test);
    if (tests.empty()) throw ParameterError("corpus has no test traces");
    const auto envs = make_client_envs(request.fed);
    const auto run = [&](const LevelChooser &policy) {
        return evaluate(policy, corpus, tests, manifest, envs, request.fed.reward);
    };

    std::vector<std::string> baselines = {"constant", "thghput", "bola"};
    for (const auto &b : request.baselines)
        if (std::find(baselines.begin(), baselines.end(), b) == baselines.end())
            throw ParameterError("unknown baseline '" + b + "' (expected constant, thghput or bola)");

    std::vector<EvalRow> rows;
    rows.push_back(eval_row("CONSTANT", {run(constant_policy())}));
    rows.push_back(eval_row("THGHPUT", {run(throughput_policy())}));
    rows.push_back(eval_row(
        "BOLA", {run(bola_policy(BolaParams::defaults(manifest.ladder(), request.fed.max_buffer_s,
                                                      manifest.chunk_duration_s())))}));

    std::vector<std::string> order;
    std::map<std::string, std::vector<EvalTable>> by_label;
    for (const auto &path : request.models) {
        const auto cp = load_checkpoint(path);
        if (!by_label.contains(cp.label)) order.push_back(cp.label);
        by_label[cp.label].push_back(run(greedy_policy(cp.layout, cp.weights, cp.scaling)));
    }
    for (const auto &label : order) rows.push_back(eval_row(label, by_label[label]));
    return rows;
}

namespace {

const std::array<std::string_view, 15> kEvalColumns{
    "policy",          "runs",           "reward_mean",    "reward_std",    "fcc_high_mean",
    "fcc_high_std",    "fcc_low_mean",   "fcc_low_std",    "lte_high_mean", "lte_high_std",
    "lte_low_mean",    "lte_low_std",    "utility",        "switch_penalty", "rebuffer_s"};

} // namespace

void write_eval_csv(const std::vector<EvalRow> &rows, std::ostream &out) {
    for (std::size_t i = 0; i < kEvalColumns.size(); ++i) out << (i ? "," : "") << kEvalColumns[i];
    out << '\n';
    const auto num = [](double v) { return detail::format_exact(v); };
    for (const auto &r : rows) {
        if (r.policy.find_first_of(",\n") != std::string::npos)
            throw ParameterError("policy label '" + r.policy + "' cannot contain commas or newlines");
        out << r.policy << ',' << r.runs << ',' << num(r.reward_mean) << ',' << num(r.reward_std);
        for (std::size_t g = 0; g < 4; ++g) out << ',' << num(r.group_mean[g]) << ',' << num(r.group_std[g]);
        out << ',' << num(r.utility) << ',' << num(r.switch_penalty) << ',' << num(r.rebuffer_s) << '\n';
    }
}

std::vector<EvalRow> read_eval_csv(std::istream &in, const std::string &source) {
    std::vector<EvalRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || detail::trim(line).empty()) continue;
        const auto f = detail::split(line, ',');
        const auto where = source + ":" + std::to_string(line_no);
        if (f.size() != kEvalColumns.size()) throw ParseError(where + ": expected 15 fields");
        std::vector<double> v;
        for (std::size_t i = 1; i < f.size(); ++i) {
            const auto x = detail::parse_double(f[i]);
            if (!x) throw ParseError(where + ": field '" + std::string(kEvalColumns[i]) + "' is not a number");
            v.push_back(*x);
        }
        EvalRow r;
        r.policy = std::string(f[0]);
        r.runs = static_cast<std::size_t>(v[0]);
        r.reward_mean = v[1];
        r.reward_std = v[2];
        for (std::size_t g = 0; g < 4; ++g) {
            r.group_mean[g] = v[3 + 2 * g];
            r.group_std[g] = v[4 + 2 * g];
        }
        r.utility = v[11];
        r.switch_penalty = v[12];
        r.rebuffer_s = v[13];
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ReportRow> convergence_report(const std::vector<std::vector<RoundLog>> &runs, std::size_t window) {
    if (runs.empty()) throw ParameterError("need at least one round log");
    std::size_t rounds = runs.front().size();
    for (const auto &r : runs) rounds = std::min(rounds, r.size());

    std::vector<std::vector<double>> smoothed_runs;
    std::vector<double> mean(rounds, 0.0);
    for (const auto &run : runs) {
        std::vector<double> series(rounds);
        for (std::size_t t = 0; t < rounds; ++t) {
            series[t] = run[t].global_mean;
            mean[t] += series[t] / static_cast<double>(runs.size());
        }
        smoothed_runs.push_back(running_average(series, window));
    }
    const auto smoothed = running_average(mean, window);

    std::vector<ReportRow> rows(rounds);
    for (std::size_t t = 0; t < rounds; ++t) {
        std::vector<double> at;
        for (const auto &s : smoothed_runs) at.push_back(s[t]);
        rows[t] = {runs.front()[t].round, mean[t], smoothed[t], sample_std(at)};
    }
    return rows;
}

void write_report_csv(const std::vector<ReportRow> &rows, std::ostream &out) {
    out << "round,mean,smoothed,std\n";
    for (const auto &r : rows)
        out << r.round << ',' << detail::format_exact(r.mean) << ',' << detail::format_exact(r.smoothed) << ','
            << detail::format_exact(r.std_dev) << '\n';
}

} // namespace fdrl

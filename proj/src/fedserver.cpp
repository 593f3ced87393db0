#include "fdrl/fedserver.hpp"

#include "binary_io.hpp"
#include "fdrl/error.hpp"
#include "fdrl/kernels.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <thread>

namespace fdrl {

void FedConfig::validate() const {
    if (num_clients == 0) throw ParameterError("need at least one client");
    if (clients_per_round < 1 || clients_per_round > num_clients)
        throw ParameterError("clients per round must be in [1, num_clients]");
    if (local_episodes == 0) throw ParameterError("local episodes must be positive");
    if (rounds == 0) throw ParameterError("rounds must be positive");
    if (eval_every == 0) throw ParameterError("eval_every must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ParameterError("validation fraction must be in (0, 1)");
    if (!(rtt_min_s >= 0.0 && rtt_min_s <= rtt_max_s)) throw ParameterError("need 0 <= rtt_min <= rtt_max");
    if (!(max_buffer_s > 0.0)) throw ParameterError("max buffer must be positive");
}

std::uint64_t planned_local_steps(const FedConfig &config, std::size_t num_chunks) {
    const double share = static_cast<double>(config.clients_per_round) / static_cast<double>(config.num_clients);
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(config.rounds) * share *
                                                   static_cast<double>(config.local_episodes * num_chunks)));
}

std::vector<ClientEnvConfig> make_client_envs(const FedConfig &config) {
    std::vector<ClientEnvConfig> envs(config.num_clients);
    for (std::size_t i = 0; i < envs.size(); ++i) {
        Rng rng = make_rng(config.seed, "rtt", i);
        envs[i].trace_group = kAllGroups[i % kAllGroups.size()];
        envs[i].rtt_s = uniform(rng, config.rtt_min_s, config.rtt_max_s);
        envs[i].max_buffer_s = config.max_buffer_s;
    }
    return envs;
}

TrainingPools make_training_pools(const TraceCorpus &corpus, double validation_fraction, std::uint64_t seed) {
    TrainingPools pools;
    for (const auto group : kAllGroups) {
        auto members = corpus.indices(group, Split::Train);
        Rng rng = make_rng(seed, "validation", group_index(group));
        for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[uniform_index(rng, i)]);
        const auto n = members.size();
        auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
        if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
        else n_val = 0;
        std::vector<std::size_t> val(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
        std::vector<std::size_t> train(members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
        std::sort(val.begin(), val.end());
        std::sort(train.begin(), train.end());
        pools.validation.insert(pools.validation.end(), val.begin(), val.end());
        pools.train[group_index(group)] = std::move(train);
    }
    std::sort(pools.validation.begin(), pools.validation.end());
    return pools;
}

std::vector<std::size_t> select_clients(std::size_t num_clients, std::size_t k, Rng &rng) {
    if (k < 1 || k > num_clients) throw ParameterError("K must be in [1, num_clients]");
    std::vector<std::size_t> ids(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) ids[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + uniform_index(rng, num_clients - i)]);
    ids.resize(k);
    std::sort(ids.begin(), ids.end());
    return ids;
}

WeightVector average_weights(std::span<const WeightVector> vectors) {
    if (vectors.empty()) throw ParameterError("cannot average an empty list of weight vectors");
    const auto &first = vectors.front();
    WeightVector out{std::vector<double>(first.values.size(), 0.0), first.spec_hash};
    const auto &k = kernels::active();
    for (const auto &v : vectors) {
        if (v.spec_hash != first.spec_hash || v.values.size() != first.values.size())
            throw ShapeError("cannot average weights of different layouts ('" + v.spec_hash + "' vs '" +
                             first.spec_hash + "')");
        k.add(v.values.data(), out.values.data(), out.values.size());
    }
    k.divide(out.values.data(), out.values.size(), static_cast<double>(vectors.size()));
    return out;
}

ClientRegistry::ClientRegistry(const FedConfig &config, std::size_t observation_dim, std::size_t action_count,
                               const AgentConfigs &agents)
    : seed_(config.seed) {
    config.validate();
    const auto envs = make_client_envs(config);
    clients_.reserve(envs.size());
    for (std::size_t i = 0; i < envs.size(); ++i)
        clients_.push_back({i, envs[i], make_agent(config.algo, observation_dim, action_count, agents)});
}

std::vector<ClientEnvConfig> ClientRegistry::envs() const {
    std::vector<ClientEnvConfig> out;
    for (const auto &c : clients_) out.push_back(c.env);
    return out;
}

Rng ClientRegistry::client_rng(std::size_t id, std::size_t round) const {
    return Rng(derive_seed(derive_seed(seed_, "client", id), "round", round));
}

// ---------------------------------------------------------------------------

EvalTable evaluate(const LevelChooser &policy, const TraceCorpus &corpus, std::span<const std::size_t> traces,
                   const VideoManifest &manifest, std::span<const ClientEnvConfig> client_envs,
                   const RewardParams &reward) {
    std::array<std::vector<ClientEnvConfig>, 4> envs_by_group;
    for (const auto &env : client_envs) envs_by_group[group_index(env.trace_group)].push_back(env);

    EvalTable table;
    std::array<std::size_t, 4> seen{};
    const auto accumulate = [](QoeMetrics &m, const EpisodeStats &s) {
        const double n = static_cast<double>(s.steps);
        m.episodes += 1;
        m.reward += s.reward / n;
        m.utility += s.utility / n;
        m.switch_penalty += s.switch_penalty / n;
        m.rebuffer_s += s.rebuffer_s / n;
    };
    for (const auto idx : traces) {
        const auto &trace = corpus.traces.at(idx);
        const auto g = group_index(trace.group());
        ClientEnvConfig env;
        env.trace_group = trace.group();
        if (!envs_by_group[g].empty()) env = envs_by_group[g][seen[g] % envs_by_group[g].size()];
        else if (!client_envs.empty()) env.max_buffer_s = client_envs.front().max_buffer_s;
        ++seen[g];

        AbrEnv abr(manifest, env, {}, reward);
        abr.reset(trace, 0.0);
        while (!abr.state().done()) abr.step(policy(abr.state(), manifest));
        table.episodes.push_back({idx, trace.group(), abr.episode_stats()});
        accumulate(table.overall, abr.episode_stats());
        accumulate(table.groups[g], abr.episode_stats());
    }
    const auto finish = [](QoeMetrics &m) {
        if (m.episodes == 0) return;
        const double n = static_cast<double>(m.episodes);
        m.reward /= n;
        m.utility /= n;
        m.switch_penalty /= n;
        m.rebuffer_s /= n;
    };
    finish(table.overall);
    for (auto &m : table.groups) finish(m);
    return table;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kStateMagic = 0x46444c5253544154ULL; // "FDLRSTAT"

void write_logs(std::ostream &out, const std::vector<RoundLog> &logs) {
    detail::write_pod<std::uint64_t>(out, logs.size());
    for (const auto &log : logs) {
        detail::write_pod<std::uint64_t>(out, log.round);
        std::vector<double> ids(log.clients.begin(), log.clients.end());
        detail::write_doubles(out, ids);
        detail::write_doubles(out, log.client_rewards);
        detail::write_pod(out, log.global_mean);
        detail::write_pod(out, log.validation_reward);
        detail::write_pod(out, log.wall_time_s);
    }
}

std::vector<RoundLog> read_logs(std::istream &in) {
    std::vector<RoundLog> logs(detail::read_pod<std::uint64_t>(in));
    for (auto &log : logs) {
        log.round = detail::read_pod<std::uint64_t>(in);
        for (const double id : detail::read_doubles(in)) log.clients.push_back(static_cast<std::size_t>(id));
        log.client_rewards = detail::read_doubles(in);
        log.global_mean = detail::read_pod<double>(in);
        log.validation_reward = detail::read_pod<double>(in);
        log.wall_time_s = detail::read_pod<double>(in);
    }
    return logs;
}

struct Snapshot {
    std::size_t rounds_done = 0;
    WeightVector global;
    std::vector<RoundLog> logs;
    ModelCheckpoint best;
    bool has_best = false;
};

void save_snapshot(const std::filesystem::path &path, const Snapshot &s, const ClientRegistry &registry) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        detail::write_pod(out, kStateMagic);
        detail::write_pod<std::uint64_t>(out, s.rounds_done);
        detail::write_string(out, s.global.spec_hash);
        detail::write_doubles(out, s.global.values);
        write_logs(out, s.logs);
        detail::write_pod<std::uint8_t>(out, s.has_best ? 1 : 0);
        detail::write_doubles(out, s.best.weights.values);
        detail::write_pod<std::uint64_t>(out, s.best.round);
        detail::write_pod(out, s.best.validation_reward);
        detail::write_pod<std::uint64_t>(out, registry.size());
        for (std::size_t i = 0; i < registry.size(); ++i) registry.at(i).agent->save_state(out);
        if (!out) throw std::runtime_error("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Snapshot load_snapshot(const std::filesystem::path &path, ClientRegistry &registry, const ModelLayout &layout) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    if (detail::read_pod<std::uint64_t>(in) != kStateMagic) throw ParseError(path.string() + ": not a run state file");
    Snapshot s;
    s.rounds_done = detail::read_pod<std::uint64_t>(in);
    s.global.spec_hash = detail::read_string(in);
    s.global.values = detail::read_doubles(in);
    layout.unpack(s.global);
    s.logs = read_logs(in);
    s.has_best = detail::read_pod<std::uint8_t>(in) != 0;
    s.best.weights = {detail::read_doubles(in), layout.hash()};
    s.best.round = detail::read_pod<std::uint64_t>(in);
    s.best.validation_reward = detail::read_pod<double>(in);
    if (detail::read_pod<std::uint64_t>(in) != registry.size())
        throw ParseError(path.string() + ": client count does not match the configuration");
    for (std::size_t i = 0; i < registry.size(); ++i) registry.at(i).agent->load_state(in);
    return s;
}

bool all_finite(const std::vector<double> &v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace

FederationResult run_federation(const FedConfig &config, const AgentConfigs &agent_configs,
                                const TraceCorpus &corpus, const VideoManifest &manifest,
                                const RunOptions &options) {
    config.validate();
    const auto obs_dim = observation_dim(manifest.num_levels());
    const auto actions = manifest.num_levels();

    AgentConfigs agents = agent_configs;
    if (agents.dqn.anneal_horizon_steps == 0)
        agents.dqn.anneal_horizon_steps = std::max<std::uint64_t>(1, planned_local_steps(config, manifest.num_chunks()));

    const ModelLayout layout = model_layout(config.algo, obs_dim, actions, agents);
    ClientRegistry registry(config, obs_dim, actions, agents);
    const auto client_envs = registry.envs();
    const auto pools = make_training_pools(corpus, config.validation_fraction, config.seed);
    for (std::size_t g = 0; g < pools.train.size(); ++g) {
        const bool used = std::any_of(client_envs.begin(), client_envs.end(),
                                      [&](const ClientEnvConfig &e) { return group_index(e.trace_group) == g; });
        if (used && pools.train[g].empty())
            throw ParameterError("no training traces for group " + std::string(group_name(kAllGroups[g])));
    }

    Snapshot state;
    if (options.resume && !options.state_path.empty() && std::filesystem::exists(options.state_path)) {
        state = load_snapshot(options.state_path, registry, layout);
    } else {
        Rng init = make_rng(config.seed, "init");
        state.global = layout.initial_weights(init);
    }
    state.best.label = options.label;
    state.best.layout = layout;
    state.best.scaling = config.scaling;
    state.best.weights.spec_hash = layout.hash();

    const std::size_t worker_count =
        config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;

    for (std::size_t t = state.rounds_done + 1; t <= config.rounds; ++t) {
        const auto started = std::chrono::steady_clock::now();
        Rng selection = make_rng(config.seed, "selection", t);
        const auto selected = select_clients(config.num_clients, config.clients_per_round, selection);

        std::vector<TrainReport> reports(selected.size());
        std::vector<std::exception_ptr> errors(selected.size());
        std::atomic<std::size_t> next{0};
        const auto work = [&] {
            for (std::size_t j; (j = next.fetch_add(1)) < selected.size();) {
                try {
                    auto &client = registry.at(selected[j]);
                    std::vector<const BandwidthTrace *> pool;
                    for (const auto idx : pools.train[group_index(client.env.trace_group)])
                        pool.push_back(&corpus.traces[idx]);
                    AbrEnv env(manifest, client.env, std::move(pool), config.reward, config.scaling);
                    Rng rng = registry.client_rng(client.id, t);
                    reports[j] = client.agent->train_episodes(env, state.global, config.local_episodes, rng);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            }
        };
        const auto threads = std::min(worker_count, selected.size());
        if (threads <= 1) {
            work();
        } else {
            std::vector<std::jthread> pool;
            for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work);
        }

        for (std::size_t j = 0; j < selected.size(); ++j) {
            if (errors[j]) {
                try {
                    std::rethrow_exception(errors[j]);
                } catch (const std::exception &e) {
                    throw FederationError("round " + std::to_string(t) + ": client " + std::to_string(selected[j]) +
                                          " failed: " + e.what());
                }
            }
            if (!all_finite(reports[j].weights.values))
                throw FederationError("round " + std::to_string(t) + ": client " + std::to_string(selected[j]) +
                                      " produced non-finite weights");
        }

        std::vector<WeightVector> weights;
        weights.reserve(reports.size());
        RoundLog log;
        log.round = t;
        log.clients = selected;
        for (auto &r : reports) {
            double sum = 0.0;
            for (const double v : r.episode_mean_rewards) sum += v;
            log.client_rewards.push_back(sum / static_cast<double>(r.episode_mean_rewards.size()));
            weights.push_back(std::move(r.weights));
        }
        state.global = average_weights(weights);
        double total = 0.0;
        for (const double v : log.client_rewards) total += v;
        log.global_mean = total / static_cast<double>(log.client_rewards.size());
        log.validation_reward = std::numeric_limits<double>::quiet_NaN();

        if (t % config.eval_every == 0 || t == config.rounds) {
            const auto policy = greedy_policy(layout, state.global, config.scaling);
            const auto table = evaluate(policy, corpus, pools.validation, manifest, client_envs, config.reward);
            log.validation_reward = table.overall.reward;
            if (!state.has_best || table.overall.reward > state.best.validation_reward) {
                state.has_best = true;
                state.best.weights = state.global;
                state.best.round = t;
                state.best.validation_reward = table.overall.reward;
            }
        }
        log.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        state.logs.push_back(log);
        state.rounds_done = t;
        if (options.on_round) options.on_round(log);
        if (options.inspect_clients) options.inspect_clients(log, registry);
        if (!options.state_path.empty() && (t % config.eval_every == 0 || t == config.rounds))
            save_snapshot(options.state_path, state, registry);
    }

    FederationResult result;
    result.final_weights = state.global;
    result.logs = std::move(state.logs);
    result.best = std::move(state.best);
    return result;
}

std::vector<double> running_average(std::span<const double> values, std::size_t window) {
    if (window == 0) throw ParameterError("window must be positive");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t start = i + 1 >= window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = start; j <= i; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(i + 1 - start);
    }
    return out;
}

void write_round_log(std::span<const RoundLog> logs, std::ostream &out) {
    out << "round,client_ids,client_rewards,global_mean,validation_reward\n";
    for (const auto &log : logs) {
        out << log.round << ',';
        for (std::size_t i = 0; i < log.clients.size(); ++i) out << (i ? ";" : "") << log.clients[i];
        out << ',';
        for (std::size_t i = 0; i < log.client_rewards.size(); ++i)
            out << (i ? ";" : "") << detail::format_exact(log.client_rewards[i]);
        out << ',' << detail::format_exact(log.global_mean) << ',';
        if (!std::isnan(log.validation_reward)) out << detail::format_exact(log.validation_reward);
        out << '\n';
    }
}

std::vector<RoundLog> read_round_log(std::istream &in, const std::string &source) {
    std::vector<RoundLog> logs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || detail::trim(line).empty()) continue;
        const auto where = source + ":" + std::to_string(line_no);
        const auto fields = detail::split(line, ',');
        if (fields.size() != 5) throw ParseError(where + ": expected 5 fields");
        RoundLog log;
        const auto round = detail::parse_double(fields[0]);
        const auto mean = detail::parse_double(fields[3]);
        if (!round || !mean) throw ParseError(where + ": round and global_mean must be numbers");
        log.round = static_cast<std::size_t>(*round);
        log.global_mean = *mean;
        if (!fields[1].empty())
            for (const auto id : detail::split(fields[1], ';')) {
                const auto v = detail::parse_double(id);
                if (!v) throw ParseError(where + ": bad client id");
                log.clients.push_back(static_cast<std::size_t>(*v));
            }
        if (!fields[2].empty())
            for (const auto r : detail::split(fields[2], ';')) {
                const auto v = detail::parse_double(r);
                if (!v) throw ParseError(where + ": bad client reward");
                log.client_rewards.push_back(*v);
            }
        if (fields[4].empty()) {
            log.validation_reward = std::numeric_limits<double>::quiet_NaN();
        } else {
            const auto v = detail::parse_double(fields[4]);
            if (!v) throw ParseError(where + ": bad validation reward");
            log.validation_reward = *v;
        }
        logs.push_back(std::move(log));
    }
    return logs;
}

} // namespace fdrl

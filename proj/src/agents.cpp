#include "fdrl/agents.hpp"

#include "binary_io.hpp"
#include "fdrl/error.hpp"
#include "fdrl/kernels.hpp"

#include <json.hpp>


#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace fdrl {

std::string_view algo_name(Algo algo) {
    switch (algo) {
    case Algo::Dqn: return "dqn";
    case Algo::A2c: return "a2c";
    case Algo::Ppo: return "ppo";
    }
    return "unknown";
}

std::optional<Algo> parse_algo(std::string_view name) {
    for (const auto a : {Algo::Dqn, Algo::A2c, Algo::Ppo})
        if (algo_name(a) == name) return a;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Layout

std::size_t ModelLayout::parameter_count() const {
    std::size_t n = 0;
    for (const auto &spec : nets) n += spec.parameter_count();
    return n;
}

std::string ModelLayout::hash() const {
    std::string h(algo_name(algo));
    for (std::size_t i = 0; i < nets.size(); ++i) h += (i ? "|" : ":") + nets[i].hash();
    return h;
}

std::vector<Mlp> ModelLayout::unpack(const WeightVector &weights) const {
    if (weights.spec_hash != hash())
        throw ShapeError("weights for '" + weights.spec_hash + "' do not fit '" + hash() + "'");
    if (weights.values.size() != parameter_count())
        throw ShapeError("expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(weights.values.size()));
    std::vector<Mlp> out;
    std::size_t offset = 0;
    for (const auto &spec : nets) {
        Mlp net(spec);
        const auto n = net.parameter_count();
        std::copy_n(weights.values.begin() + static_cast<std::ptrdiff_t>(offset), n, net.parameters().begin());
        offset += n;
        out.push_back(std::move(net));
    }
    return out;
}

WeightVector ModelLayout::pack(std::span<const Mlp> parts) const {
    if (parts.size() != nets.size()) throw ShapeError("wrong number of networks for layout " + hash());
    WeightVector w{{}, hash()};
    w.values.reserve(parameter_count());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!(parts[i].spec() == nets[i])) throw ShapeError("network " + std::to_string(i) + " does not fit " + hash());
        const auto p = parts[i].parameters();
        w.values.insert(w.values.end(), p.begin(), p.end());
    }
    return w;
}

WeightVector ModelLayout::initial_weights(Rng &rng) const {
    std::vector<Mlp> parts;
    for (const auto &spec : nets) parts.emplace_back(spec, rng);
    return pack(parts);
}

ModelLayout model_layout(Algo algo, std::size_t observation_dim, std::size_t action_count,
                         const AgentConfigs &configs) {
    const auto policy = [&](const std::vector<std::size_t> &hidden) {
        return MlpSpec{observation_dim, hidden, action_count, Activation::Tanh, OutputHead::Softmax};
    };
    const auto value = [&](const std::vector<std::size_t> &hidden) {
        return MlpSpec{observation_dim, hidden, 1, Activation::Tanh, OutputHead::Linear};
    };
    switch (algo) {
    case Algo::Dqn:
        return {algo, {MlpSpec{observation_dim, configs.dqn.hidden, action_count, Activation::Tanh,
                               OutputHead::Linear}}};
    case Algo::A2c: return {algo, {policy(configs.a2c.actor_hidden), value(configs.a2c.critic_hidden)}};
    case Algo::Ppo: return {algo, {policy(configs.ppo.actor_hidden), value(configs.ppo.critic_hidden)}};
    }
    throw ParameterError("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Exploration and replay

double epsilon_at(const DqnConfig &config, std::uint64_t step) {
    const double span = config.exploration_fraction * static_cast<double>(config.anneal_horizon_steps);
    if (!(span > 0.0)) return config.final_epsilon;
    const double progress = static_cast<double>(step) / span;
    if (progress >= 1.0) return config.final_epsilon;
    return config.initial_epsilon + progress * (config.final_epsilon - config.initial_epsilon);
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ParameterError("replay capacity must be positive");
}

void ReplayMemory::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t count, Rng &rng) const {
    if (items_.empty()) throw StateError("cannot sample from an empty replay memory");
    std::vector<std::size_t> out(count);
    for (auto &i : out) i = uniform_index(rng, items_.size());
    return out;
}

void ReplayMemory::save(std::ostream &out) const {
    detail::write_pod<std::uint64_t>(out, capacity_);
    detail::write_pod<std::uint64_t>(out, next_);
    detail::write_pod<std::uint64_t>(out, items_.size());
    for (const auto &t : items_) {
        detail::write_doubles(out, t.state);
        detail::write_pod<std::uint64_t>(out, t.action);
        detail::write_pod(out, t.reward);
        detail::write_doubles(out, t.next_state);
        detail::write_pod<std::uint8_t>(out, t.terminal ? 1 : 0);
    }
}

void ReplayMemory::load(std::istream &in) {
    capacity_ = detail::read_pod<std::uint64_t>(in);
    next_ = detail::read_pod<std::uint64_t>(in);
    const auto n = detail::read_pod<std::uint64_t>(in);
    if (n > capacity_) throw ParseError("replay memory larger than its capacity");
    items_.clear();
    items_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Transition t;
        t.state = detail::read_doubles(in);
        t.action = detail::read_pod<std::uint64_t>(in);
        t.reward = detail::read_pod<double>(in);
        t.next_state = detail::read_doubles(in);
        t.terminal = detail::read_pod<std::uint8_t>(in) != 0;
        items_.push_back(std::move(t));
    }
}

// ---------------------------------------------------------------------------
// Losses

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

double td_loss(const Mlp &online, const Mlp &target, std::span<const Transition *const> batch, double gamma,
               std::span<double> grad) {
    if (batch.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    ForwardCache cache, target_cache;
    std::vector<double> g(online.spec().output_dim, 0.0);
    double loss = 0.0;
    for (const Transition *t : batch) {
        double y = t->reward;
        if (!t->terminal && gamma != 0.0) {
            target.forward(t->next_state, target_cache);
            y += gamma * *std::max_element(target_cache.output.begin(), target_cache.output.end());
        }
        online.forward(t->state, cache);
        const double diff = cache.output[t->action] - y;
        loss += diff * diff;
        std::fill(g.begin(), g.end(), 0.0);
        g[t->action] = 2.0 * diff * scale;
        online.backward(cache, g, grad);
    }
    return loss * scale;
}

std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap, double gamma) {
    std::vector<double> out(rewards.size());
    double running = bootstrap;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        running = rewards[i] + gamma * running;
        out[i] = running;
    }
    return out;
}

namespace {

// Adds the gradient of -coef * H(softmax(logits)) / B to grad_logits and returns -coef * H / B.
double entropy_term(const std::vector<double> &probs, const std::vector<double> &log_probs, double coef,
                    double scale, std::vector<double> &grad_logits) {
    if (coef == 0.0) return 0.0;
    double entropy = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) entropy -= probs[i] * log_probs[i];
    for (std::size_t i = 0; i < probs.size(); ++i)
        grad_logits[i] += coef * scale * probs[i] * (log_probs[i] + entropy);
    return -coef * entropy * scale;
}

void check_batch(const PolicyBatch &batch, bool need_old) {
    const auto n = batch.states.size();
    if (batch.actions.size() != n || batch.advantages.size() != n || (need_old && batch.old_log_probs.size() != n))
        throw ShapeError("policy batch fields have different lengths");
}

} // namespace

double policy_gradient_loss(const Mlp &actor, const PolicyBatch &batch, double entropy_coef, std::span<double> grad) {
    check_batch(batch, false);
    if (batch.states.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(batch.states.size());
    ForwardCache cache;
    std::vector<double> grad_logits;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.states.size(); ++i) {
        actor.forward(batch.states[i], cache);
        const auto log_probs = log_softmax(cache.logits);
        const auto &probs = cache.output;
        const auto a = batch.actions[i];
        const double adv = batch.advantages[i];
        loss -= log_probs[a] * adv * scale;
        grad_logits.assign(probs.size(), 0.0);
        for (std::size_t k = 0; k < probs.size(); ++k)
            grad_logits[k] = -adv * scale * ((k == a ? 1.0 : 0.0) - probs[k]);
        loss += entropy_term(probs, log_probs, entropy_coef, scale, grad_logits);
        actor.backward_logits(cache, grad_logits, grad);
    }
    return loss;
}

double ppo_surrogate_loss(const Mlp &actor, const PolicyBatch &batch, double clip_epsilon, double entropy_coef,
                          std::span<double> grad) {
    check_batch(batch, true);
    if (batch.states.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(batch.states.size());
    ForwardCache cache;
    std::vector<double> grad_logits;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.states.size(); ++i) {
        actor.forward(batch.states[i], cache);
        const auto log_probs = log_softmax(cache.logits);
        const auto &probs = cache.output;
        const auto a = batch.actions[i];
        const double adv = batch.advantages[i];
        const double ratio = std::exp(log_probs[a] - batch.old_log_probs[i]);
        const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        loss -= std::min(ratio * adv, clipped * adv) * scale;
        grad_logits.assign(probs.size(), 0.0);
        const bool saturated = (adv > 0.0 && ratio > 1.0 + clip_epsilon) || (adv < 0.0 && ratio < 1.0 - clip_epsilon);
        if (!saturated)
            for (std::size_t k = 0; k < probs.size(); ++k)
                grad_logits[k] = -adv * ratio * scale * ((k == a ? 1.0 : 0.0) - probs[k]);
        loss += entropy_term(probs, log_probs, entropy_coef, scale, grad_logits);
        actor.backward_logits(cache, grad_logits, grad);
    }
    return loss;
}

double value_loss(const Mlp &critic, std::span<const std::vector<double>> states, std::span<const double> returns,
                  double coef, std::span<double> grad) {
    if (states.size() != returns.size()) throw ShapeError("states and returns have different lengths");
    if (states.empty()) return 0.0;
    const double scale = 1.0 / static_cast<double>(states.size());
    ForwardCache cache;
    double loss = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        critic.forward(states[i], cache);
        const double diff = returns[i] - cache.output[0];
        loss += coef * diff * diff * scale;
        const double g = -2.0 * coef * diff * scale;
        critic.backward(cache, std::span<const double>(&g, 1), grad);
    }
    return loss;
}

// ---------------------------------------------------------------------------
// DQN

DqnAgent::DqnAgent(std::size_t observation_dim, std::size_t action_count, DqnConfig config)
    : config_(std::move(config)), action_count_(action_count),
      layout_(model_layout(Algo::Dqn, observation_dim, action_count, AgentConfigs{config_, {}, {}})),
      online_(layout_.nets[0]), target_(layout_.nets[0]), adam_(online_.parameter_count(), config_.learning_rate),
      memory_(config_.replay_capacity), grad_(online_.parameter_count(), 0.0) {
    if (config_.batch_size == 0 || config_.target_period == 0)
        throw ParameterError("DQN batch size and target period must be positive");
}

void DqnAgent::gradient_step(Rng &rng) {
    const auto indices = memory_.sample_indices(config_.batch_size, rng);
    std::vector<const Transition *> batch;
    batch.reserve(indices.size());
    for (const auto i : indices) batch.push_back(&memory_.at(i));
    std::fill(grad_.begin(), grad_.end(), 0.0);
    td_loss(online_, target_, batch, config_.gamma, grad_);
    if (config_.max_grad_norm > 0.0) clip_grad_norm(grad_, config_.max_grad_norm);
    adam_step(adam_, online_.parameters(), grad_);
}

TrainReport DqnAgent::train_episodes(Environment &env, const WeightVector &weights_in, std::size_t episodes,
                                     Rng &rng) {
    if (env.action_count() != action_count_) throw ShapeError("environment action count does not match the agent");
    const auto nets = layout_.unpack(weights_in);
    online_ = nets[0];
    target_ = nets[0];

    TrainReport report;
    ForwardCache cache;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = env.reset(rng);
        double total = 0.0;
        std::size_t steps = 0;
        while (true) {
            const double eps = epsilon_at(config_, steps_);
            std::size_t action;
            if (uniform01(rng) < eps) {
                action = uniform_index(rng, action_count_);
            } else {
                online_.forward(obs, cache);
                action = argmax(cache.output);
            }
            auto step = env.step(action);
            total += step.reward;
            ++steps;
            const bool done = step.done();
            memory_.push({obs, action, step.reward, step.observation, step.terminal});
            ++steps_;
            if (memory_.size() >= config_.batch_size) gradient_step(rng);
            if (steps_ % config_.target_period == 0) {
                std::copy(online_.parameters().begin(), online_.parameters().end(), target_.parameters().begin());
                if (sync_observer_) sync_observer_(online_, target_);
            }
            obs = std::move(step.observation);
            if (done) break;
        }
        report.episode_mean_rewards.push_back(total / static_cast<double>(steps));
    }
    report.weights = online_.flatten();
    report.weights.spec_hash = layout_.hash();
    return report;
}

void DqnAgent::save_state(std::ostream &out) const {
    detail::write_pod<std::uint64_t>(out, steps_);
    detail::write_doubles(out, {online_.parameters().begin(), online_.parameters().end()});
    detail::write_doubles(out, {target_.parameters().begin(), target_.parameters().end()});
    detail::write_pod<std::uint64_t>(out, adam_.step);
    detail::write_doubles(out, adam_.first_moment);
    detail::write_doubles(out, adam_.second_moment);
    memory_.save(out);
}

void DqnAgent::load_state(std::istream &in) {
    steps_ = detail::read_pod<std::uint64_t>(in);
    const auto load_net = [&](Mlp &net) {
        const auto values = detail::read_doubles(in);
        if (values.size() != net.parameter_count()) throw ShapeError("saved DQN state does not fit the network");
        std::copy(values.begin(), values.end(), net.parameters().begin());
    };
    load_net(online_);
    load_net(target_);
    adam_.step = detail::read_pod<std::uint64_t>(in);
    adam_.first_moment = detail::read_doubles(in);
    adam_.second_moment = detail::read_doubles(in);
    if (adam_.first_moment.size() != online_.parameter_count() ||
        adam_.second_moment.size() != online_.parameter_count())
        throw ShapeError("saved Adam state does not fit the network");
    memory_.load(in);
}

// ---------------------------------------------------------------------------
// A2C / PPO

ActorCriticAgent::ActorCriticAgent(Algo algo, std::size_t observation_dim, std::size_t action_count, Hyper hyper,
                                   std::vector<std::size_t> actor_hidden, std::vector<std::size_t> critic_hidden)
    : algo_(algo), hyper_(hyper),
      layout_{algo,
              {MlpSpec{observation_dim, std::move(actor_hidden), action_count, Activation::Tanh, OutputHead::Softmax},
               MlpSpec{observation_dim, std::move(critic_hidden), 1, Activation::Tanh, OutputHead::Linear}}},
      actor_(layout_.nets[0]), critic_(layout_.nets[1]), actor_adam_(actor_.parameter_count(), hyper.learning_rate),
      critic_adam_(critic_.parameter_count(), hyper.learning_rate) {
    if (hyper_.n_steps == 0 || hyper_.epochs == 0) throw ParameterError("rollout length and epochs must be positive");
}

ActorCriticAgent::ActorCriticAgent(std::size_t observation_dim, std::size_t action_count, A2cConfig c)
    : ActorCriticAgent(Algo::A2c, observation_dim, action_count,
                       Hyper{c.learning_rate, c.gamma, c.n_steps, 0.0, 1, c.entropy_coef, c.value_coef,
                             c.max_grad_norm},
                       c.actor_hidden, c.critic_hidden) {
    if (c.num_envs != 1) throw ParameterError("only one environment per client is supported");
}

ActorCriticAgent::ActorCriticAgent(std::size_t observation_dim, std::size_t action_count, PpoConfig c)
    : ActorCriticAgent(Algo::Ppo, observation_dim, action_count,
                       Hyper{c.learning_rate, c.gamma, c.n_steps, c.clip_epsilon, c.epochs, c.entropy_coef,
                             c.value_coef, c.max_grad_norm},
                       c.actor_hidden, c.critic_hidden) {
    if (c.num_envs != 1) throw ParameterError("only one environment per client is supported");
}

void ActorCriticAgent::update(const PolicyBatch &batch, const std::vector<double> &returns) {
    std::vector<double> actor_grad(actor_.parameter_count());
    std::vector<double> critic_grad(critic_.parameter_count());
    for (std::size_t epoch = 0; epoch < hyper_.epochs; ++epoch) {
        std::fill(critic_grad.begin(), critic_grad.end(), 0.0);
        value_loss(critic_, batch.states, returns, hyper_.value_coef, critic_grad);
        if (hyper_.max_grad_norm > 0.0) clip_grad_norm(critic_grad, hyper_.max_grad_norm);

        std::fill(actor_grad.begin(), actor_grad.end(), 0.0);
        if (algo_ == Algo::Ppo)
            ppo_surrogate_loss(actor_, batch, hyper_.clip_epsilon, hyper_.entropy_coef, actor_grad);
        else
            policy_gradient_loss(actor_, batch, hyper_.entropy_coef, actor_grad);
        if (hyper_.max_grad_norm > 0.0) clip_grad_norm(actor_grad, hyper_.max_grad_norm);

        adam_step(critic_adam_, critic_.parameters(), critic_grad);
        adam_step(actor_adam_, actor_.parameters(), actor_grad);
    }
}

TrainReport ActorCriticAgent::train_episodes(Environment &env, const WeightVector &weights_in, std::size_t episodes,
                                             Rng &rng) {
    if (env.action_count() != layout_.nets[0].output_dim)
        throw ShapeError("environment action count does not match the agent");
    auto nets = layout_.unpack(weights_in);
    actor_ = std::move(nets[0]);
    critic_ = std::move(nets[1]);

    TrainReport report;
    ForwardCache cache;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto obs = env.reset(rng);
        double total = 0.0;
        std::size_t steps = 0;
        bool done = false;
        while (!done) {
            PolicyBatch batch;
            std::vector<double> rewards, values;
            bool terminal = false;
            for (std::size_t n = 0; n < hyper_.n_steps; ++n) {
                actor_.forward(obs, cache);
                const auto log_probs = log_softmax(cache.logits);
                const double u = uniform01(rng);
                std::size_t action = cache.output.size() - 1;
                double cumulative = 0.0;
                for (std::size_t k = 0; k < cache.output.size(); ++k) {
                    cumulative += cache.output[k];
                    if (u < cumulative) {
                        action = k;
                        break;
                    }
                }
                const double value = critic_.forward(obs)[0];
                auto step = env.step(action);
                total += step.reward;
                ++steps;

                batch.states.push_back(std::move(obs));
                batch.actions.push_back(action);
                batch.old_log_probs.push_back(log_probs[action]);
                rewards.push_back(step.reward);
                values.push_back(value);
                obs = std::move(step.observation);
                if (step.done()) {
                    done = true;
                    terminal = step.terminal;
                    break;
                }
            }
            const double bootstrap = terminal ? 0.0 : critic_.forward(obs)[0];
            const auto returns = nstep_returns(rewards, bootstrap, hyper_.gamma);
            batch.advantages.resize(returns.size());
            for (std::size_t i = 0; i < returns.size(); ++i) batch.advantages[i] = returns[i] - values[i];
            update(batch, returns);
        }
        report.episode_mean_rewards.push_back(total / static_cast<double>(steps));
    }
    const std::vector<Mlp> parts{actor_, critic_};
    report.weights = layout_.pack(parts);
    return report;
}

void ActorCriticAgent::save_state(std::ostream &out) const {
    for (const Mlp *net : {&actor_, &critic_})
        detail::write_doubles(out, {net->parameters().begin(), net->parameters().end()});
    for (const AdamState *adam : {&actor_adam_, &critic_adam_}) {
        detail::write_pod<std::uint64_t>(out, adam->step);
        detail::write_doubles(out, adam->first_moment);
        detail::write_doubles(out, adam->second_moment);
    }
}

void ActorCriticAgent::load_state(std::istream &in) {
    for (Mlp *net : {&actor_, &critic_}) {
        const auto values = detail::read_doubles(in);
        if (values.size() != net->parameter_count()) throw ShapeError("saved actor-critic state does not fit");
        std::copy(values.begin(), values.end(), net->parameters().begin());
    }
    for (AdamState *adam : {&actor_adam_, &critic_adam_}) {
        const auto expected = adam->first_moment.size();
        adam->step = detail::read_pod<std::uint64_t>(in);
        adam->first_moment = detail::read_doubles(in);
        adam->second_moment = detail::read_doubles(in);
        if (adam->first_moment.size() != expected || adam->second_moment.size() != expected)
            throw ShapeError("saved Adam state does not fit the network");
    }
}

std::unique_ptr<Agent> make_agent(Algo algo, std::size_t observation_dim, std::size_t action_count,
                                  const AgentConfigs &configs) {
    switch (algo) {
    case Algo::Dqn: return std::make_unique<DqnAgent>(observation_dim, action_count, configs.dqn);
    case Algo::A2c: return std::make_unique<ActorCriticAgent>(observation_dim, action_count, configs.a2c);
    case Algo::Ppo: return std::make_unique<ActorCriticAgent>(observation_dim, action_count, configs.ppo);
    }
    throw ParameterError("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Evaluation policy and checkpoints

LevelChooser greedy_policy(const ModelLayout &layout, const WeightVector &weights, const FeatureScaling &scaling) {
    auto net = std::make_shared<const Mlp>(std::move(layout.unpack(weights)[0]));
    return [net, scaling](const PlayerState &state, const VideoManifest &manifest) {
        ForwardCache cache;
        net->forward(observe(state, manifest).flatten(scaling), cache);
        return argmax(cache.logits);
    };
}

namespace {

using nlohmann::json;

json spec_to_json(const MlpSpec &spec) {
    return {{"input_dim", spec.input_dim},
            {"hidden", spec.hidden},
            {"output_dim", spec.output_dim},
            {"activation", "tanh"},
            {"head", spec.head == OutputHead::Softmax ? "softmax" : "linear"}};
}

MlpSpec spec_from_json(const json &j) {
    MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<std::size_t>();
    spec.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    spec.output_dim = j.at("output_dim").get<std::size_t>();
    if (j.at("activation").get<std::string>() != "tanh") throw ParseError("unsupported activation");
    const auto head = j.at("head").get<std::string>();
    if (head == "softmax") spec.head = OutputHead::Softmax;
    else if (head == "linear") spec.head = OutputHead::Linear;
    else throw ParseError("unknown output head '" + head + "'");
    return spec;
}

} // namespace

void save_checkpoint(const ModelCheckpoint &checkpoint, const std::filesystem::path &path) {
    json nets = json::array();
    for (const auto &spec : checkpoint.layout.nets) nets.push_back(spec_to_json(spec));
    const auto &s = checkpoint.scaling;
    const json j{{"format", "fdrl-checkpoint"},
                 {"version", ModelCheckpoint::kVersion},
                 {"label", checkpoint.label},
                 {"algo", algo_name(checkpoint.layout.algo)},
                 {"nets", nets},
                 {"spec_hash", checkpoint.weights.spec_hash},
                 {"weights", checkpoint.weights.values},
                 {"scaling",
                  {{"throughput_mbps", s.throughput_mbps},
                   {"download_time_s", s.download_time_s},
                   {"chunk_size_mb", s.chunk_size_mb},
                   {"buffer_s", s.buffer_s},
                   {"chunks_remaining", s.chunks_remaining},
                   {"last_bitrate_mbps", s.last_bitrate_mbps}}},
                 {"round", checkpoint.round},
                 {"validation_reward", checkpoint.validation_reward}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << '\n';
}

ModelCheckpoint load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        const json j = json::parse(in);
        if (j.at("format").get<std::string>() != "fdrl-checkpoint") throw ParseError("not a checkpoint file");
        if (j.at("version").get<int>() != ModelCheckpoint::kVersion)
            throw ParseError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        ModelCheckpoint c;
        c.label = j.at("label").get<std::string>();
        const auto algo = parse_algo(j.at("algo").get<std::string>());
        if (!algo) throw ParseError("unknown algorithm in checkpoint");
        c.layout.algo = *algo;
        for (const auto &n : j.at("nets")) c.layout.nets.push_back(spec_from_json(n));
        c.weights.spec_hash = j.at("spec_hash").get<std::string>();
        c.weights.values = j.at("weights").get<std::vector<double>>();
        const auto &s = j.at("scaling");
        c.scaling = {s.at("throughput_mbps"), s.at("download_time_s"),  s.at("chunk_size_mb"),
                     s.at("buffer_s"),        s.at("chunks_remaining"), s.at("last_bitrate_mbps")};
        c.round = j.at("round").get<std::size_t>();
        const auto &vr = j.at("validation_reward");
        c.validation_reward = vr.is_null() ? std::numeric_limits<double>::quiet_NaN() : vr.get<double>();
        c.layout.unpack(c.weights); // shape check
        return c;
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

} // namespace fdrl

#pragma once

#include "fdrl/abrenv.hpp"
#include "fdrl/environment.hpp"
#include "fdrl/neural.hpp"
#include "fdrl/random.hpp"
#include "fdrl/simcore.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fdrl {

enum class Algo { Dqn, A2c, Ppo };

std::string_view algo_name(Algo algo); // "dqn", "a2c", "ppo"
std::optional<Algo> parse_algo(std::string_view name);

struct DqnConfig {
    double learning_rate = 5e-4;
    std::size_t batch_size = 128;
    std::size_t target_period = 25; // C
    double gamma = 0.9;
    double exploration_fraction = 0.5;
    double initial_epsilon = 1.0;
    double final_epsilon = 0.05;
    std::size_t replay_capacity = 100000;
    std::uint64_t anneal_horizon_steps = 0; // 0: expected local steps of the federated run
    double max_grad_norm = 10.0;
    std::vector<std::size_t> hidden{64, 64};

    bool operator==(const DqnConfig &) const = default;
};

struct A2cConfig {
    double learning_rate = 5e-4;
    double gamma = 0.9;
    std::size_t n_steps = 5;
    std::size_t num_envs = 1;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    std::vector<std::size_t> actor_hidden{64, 64, 64};
    std::vector<std::size_t> critic_hidden{64, 64};

    bool operator==(const A2cConfig &) const = default;
};

struct PpoConfig {
    double learning_rate = 1e-4;
    double gamma = 0.9;
    std::size_t n_steps = 5;
    std::size_t num_envs = 1;
    double clip_epsilon = 0.2;
    std::size_t epochs = 10;
    double entropy_coef = 0.0;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    std::vector<std::size_t> actor_hidden{64, 64, 64};
    std::vector<std::size_t> critic_hidden{64, 64, 64};

    bool operator==(const PpoConfig &) const = default;
};

struct AgentConfigs {
    DqnConfig dqn;
    A2cConfig a2c;
    PpoConfig ppo;

    bool operator==(const AgentConfigs &) const = default;
};

/// Network layout of one algorithm: the Q-network for DQN, actor then critic
/// otherwise. Weight vectors of a layout concatenate the nets in that order.
struct ModelLayout {
    Algo algo;
    std::vector<MlpSpec> nets;

    std::size_t parameter_count() const;
    std::string hash() const;
    std::vector<Mlp> unpack(const WeightVector &weights) const;
    WeightVector pack(std::span<const Mlp> nets) const;
    /// Fresh randomly initialized weights.
    WeightVector initial_weights(Rng &rng) const;
};

ModelLayout model_layout(Algo algo, std::size_t observation_dim, std::size_t action_count,
                         const AgentConfigs &configs = {});

/// Linear anneal from initial to final epsilon over exploration_fraction of
/// the anneal horizon, constant afterwards.
double epsilon_at(const DqnConfig &config, std::uint64_t step);

struct Transition {
    std::vector<double> state;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;

    bool operator==(const Transition &) const = default;
};

/// Fixed-capacity FIFO of transitions with uniform sampling.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    /// `count` indices drawn uniformly (with replacement) from the current contents.
    std::vector<std::size_t> sample_indices(std::size_t count, Rng &rng) const;
    const Transition &at(std::size_t i) const { return items_.at(i); }
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }

    void save(std::ostream &out) const;
    void load(std::istream &in);

    bool operator==(const ReplayMemory &) const = default;

private:
    std::size_t capacity_;
    std::size_t next_ = 0; // slot overwritten once full
    std::vector<Transition> items_;
};

// Losses. Each returns the loss value and adds d(loss)/d(params) of the
// network being trained into `grad`.

/// Mean over the batch of (y - Q(s, a))^2 with y = r + gamma (1 - terminal) max_a' Q_target(s', a').
double td_loss(const Mlp &online, const Mlp &target, std::span<const Transition *const> batch, double gamma,
               std::span<double> grad);

/// N-step returns by backward recursion R_n = r_n + gamma R_{n+1}, seeded with `bootstrap`.
std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap, double gamma);

struct PolicyBatch {
    std::vector<std::vector<double>> states;
    std::vector<std::size_t> actions;
    std::vector<double> advantages;     // treated as constants
    std::vector<double> old_log_probs;  // PPO only
};

/// -mean(log pi(a|s) A) - entropy_coef * mean(H(pi(.|s))).
double policy_gradient_loss(const Mlp &actor, const PolicyBatch &batch, double entropy_coef, std::span<double> grad);

/// -mean(min(rho A, clip(rho, 1-eps, 1+eps) A)) - entropy_coef * mean(H), rho = pi/pi_old.
double ppo_surrogate_loss(const Mlp &actor, const PolicyBatch &batch, double clip_epsilon, double entropy_coef,
                          std::span<double> grad);

/// coef * mean((R - V(s))^2).
double value_loss(const Mlp &critic, std::span<const std::vector<double>> states, std::span<const double> returns,
                  double coef, std::span<double> grad);

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values);

struct TrainReport {
    WeightVector weights;
    std::vector<double> episode_mean_rewards; // per local episode, mean reward per step
};

/// Client-side learner. Holds whatever persists between federated rounds
/// (replay memory, optimizer moments, step counters).
class Agent {
public:
    virtual ~Agent() = default;

    virtual Algo algo() const = 0;
    virtual const ModelLayout &layout() const = 0;
    /// Loads `weights_in`, trains for `episodes` episodes, returns the new weights.
    virtual TrainReport train_episodes(Environment &env, const WeightVector &weights_in, std::size_t episodes,
                                       Rng &rng) = 0;

    virtual void save_state(std::ostream &out) const = 0;
    virtual void load_state(std::istream &in) = 0;
};

std::unique_ptr<Agent> make_agent(Algo algo, std::size_t observation_dim, std::size_t action_count,
                                  const AgentConfigs &configs);

class DqnAgent final : public Agent {
public:
    DqnAgent(std::size_t observation_dim, std::size_t action_count, DqnConfig config);

    Algo algo() const override { return Algo::Dqn; }
    const ModelLayout &layout() const override { return layout_; }
    TrainReport train_episodes(Environment &env, const WeightVector &weights_in, std::size_t episodes,
                               Rng &rng) override;
    void save_state(std::ostream &out) const override;
    void load_state(std::istream &in) override;

    const Mlp &online() const { return online_; }
    const Mlp &target() const { return target_; }
    const ReplayMemory &memory() const { return memory_; }
    std::uint64_t steps() const { return steps_; }
    /// Hook called after every target sync (tests check online == target there).
    void set_sync_observer(std::function<void(const Mlp &, const Mlp &)> observer) {
        sync_observer_ = std::move(observer);
    }

private:
    void gradient_step(Rng &rng);

    DqnConfig config_;
    std::size_t action_count_;
    ModelLayout layout_;
    Mlp online_;
    Mlp target_;
    AdamState adam_;
    ReplayMemory memory_;
    std::uint64_t steps_ = 0;
    std::vector<double> grad_;
    std::function<void(const Mlp &, const Mlp &)> sync_observer_;
};

/// A2C and PPO share rollout collection; PPO re-optimizes each rollout for
/// several epochs against the clipped surrogate.
class ActorCriticAgent final : public Agent {
public:
    ActorCriticAgent(std::size_t observation_dim, std::size_t action_count, A2cConfig config);
    ActorCriticAgent(std::size_t observation_dim, std::size_t action_count, PpoConfig config);

    Algo algo() const override { return algo_; }
    const ModelLayout &layout() const override { return layout_; }
    TrainReport train_episodes(Environment &env, const WeightVector &weights_in, std::size_t episodes,
                               Rng &rng) override;
    void save_state(std::ostream &out) const override;
    void load_state(std::istream &in) override;

    const Mlp &actor() const { return actor_; }
    const Mlp &critic() const { return critic_; }

private:
    struct Hyper {
        double learning_rate, gamma;
        std::size_t n_steps;
        double clip_epsilon;
        std::size_t epochs;
        double entropy_coef, value_coef, max_grad_norm;
    };
    ActorCriticAgent(Algo algo, std::size_t observation_dim, std::size_t action_count, Hyper hyper,
                     std::vector<std::size_t> actor_hidden, std::vector<std::size_t> critic_hidden);

    void update(const PolicyBatch &batch, const std::vector<double> &returns);

    Algo algo_;
    Hyper hyper_;
    ModelLayout layout_;
    Mlp actor_;
    Mlp critic_;
    AdamState actor_adam_;
    AdamState critic_adam_;
};

/// Greedy evaluation policy: argmax Q for DQN, argmax pi for A2C/PPO, ties
/// to the lowest level.
LevelChooser greedy_policy(const ModelLayout &layout, const WeightVector &weights, const FeatureScaling &scaling);

/// Saved model: layout, flat weights and the feature scaling it was trained with.
struct ModelCheckpoint {
    static constexpr int kVersion = 1;

    std::string label;
    ModelLayout layout;
    WeightVector weights;
    FeatureScaling scaling;
    std::size_t round = 0;
    double validation_reward = 0.0;
};

void save_checkpoint(const ModelCheckpoint &checkpoint, const std::filesystem::path &path);
/// Throws ParseError on malformed files or a version mismatch, ShapeError if
/// the weights do not fit the layout.
ModelCheckpoint load_checkpoint(const std::filesystem::path &path);

} // namespace fdrl

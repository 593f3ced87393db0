#pragma once

#include "fdrl/random.hpp"

#include <cstddef>
#include <vector>

namespace fdrl {

struct EnvStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminal = false;  // true end of the episode: no bootstrapping past it
    bool truncated = false; // episode cut by a time limit: the next state still has value

    bool done() const { return terminal || truncated; }
};

/// Discrete-action episodic environment consumed by the agents.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t observation_dim() const = 0;
    virtual std::size_t action_count() const = 0;
    /// Starts a new episode; randomness (trace choice, offsets) comes from `rng`.
    virtual std::vector<double> reset(Rng &rng) = 0;
    virtual EnvStep step(std::size_t action) = 0;
};

} // namespace fdrl

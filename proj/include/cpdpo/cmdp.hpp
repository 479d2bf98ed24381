#pragma once

#include "cpdpo/shape.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpdpo {

enum class NoiseKind { bernoulli, degenerate };

/// Row-major kernel over the rows described by LayeredShape::row_offset.
struct TransitionKernel {
    std::vector<double> prob;

    std::span<const double> row(const LayeredShape& shape, StateId x, ActionId a) const
    {
        return {prob.data() + shape.row_offset(x, a), shape.row_width(x)};
    }
    std::span<double> row(const LayeredShape& shape, StateId x, ActionId a)
    {
        return {prob.data() + shape.row_offset(x, a), shape.row_width(x)};
    }
};

/// Stochastic policy, one distribution per non-terminal state, stored by pair index.
struct Policy {
    std::size_t num_actions = 0;
    std::vector<double> prob;

    static Policy uniform(const LayeredShape& shape);

    std::span<const double> row(StateId x) const { return {prob.data() + x * num_actions, num_actions}; }
    std::span<double> row(StateId x) { return {prob.data() + x * num_actions, num_actions}; }
    double operator()(StateId x, ActionId a) const { return prob[x * num_actions + a]; }
};

/// Loop-free episodic CMDP with stochastic rewards and costs.
struct CmdpInstance {
    LayeredShape shape;
    TransitionKernel transition;
    std::vector<double> reward_mean;             // per pair
    std::vector<std::vector<double>> cost_means; // [constraint][pair]
    std::vector<double> thresholds;              // one per constraint
    std::vector<NoiseKind> reward_noise;         // per pair
    std::vector<NoiseKind> cost_noise;           // per pair, shared by all constraints

    std::size_t num_constraints() const { return thresholds.size(); }
    std::size_t horizon() const { return shape.horizon(); }
};

/// One episode of interaction. Step k visits states[k] (layer k), plays actions[k]
/// and moves to states[k + 1]; costs are stored step-major (costs[k * m + i]).
struct Trajectory {
    std::uint64_t episode = 0;
    std::vector<StateId> states;
    std::vector<ActionId> actions;
    std::vector<double> rewards;
    std::vector<double> costs;

    std::size_t length() const { return actions.size(); }
    std::size_t num_constraints() const { return actions.empty() ? 0 : costs.size() / actions.size(); }
    PairId pair(const LayeredShape& shape, std::size_t k) const { return shape.pair(states[k], actions[k]); }
    double cost(std::size_t k, std::size_t i) const { return costs[k * num_constraints() + i]; }
};

/// Probability of visiting each state-action pair in one episode.
struct OccupancyMeasure {
    std::vector<double> q; // per pair
};

enum class InstanceErrorKind {
    malformed,
    non_singleton_layer,
    non_stochastic_row,
    cross_layer_edge,
    mean_out_of_range,
    threshold_out_of_range,
};

class InstanceError : public std::runtime_error {
public:
    InstanceError(InstanceErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    InstanceErrorKind kind() const { return kind_; }

private:
    InstanceErrorKind kind_;
};

/// Instance description as read from a file, before any invariant is checked.
/// All indices are 0-based; (layer, state) is the index of the state inside its layer.
struct RawInstance {
    struct Transition {
        std::size_t layer = 0, state = 0, action = 0, next = 0;
        double prob = 0.0;
        std::size_t line = 0;
    };
    struct Mean {
        std::size_t constraint = 0; // unused for rewards
        std::size_t layer = 0, state = 0, action = 0;
        double value = 0.0;
        std::size_t line = 0;
    };
    struct Noise {
        std::size_t layer = 0, state = 0, action = 0;
        NoiseKind reward = NoiseKind::bernoulli;
        NoiseKind cost = NoiseKind::bernoulli;
        std::size_t line = 0;
    };

    std::vector<std::size_t> layers;
    std::size_t actions = 0;
    std::vector<Transition> transitions;
    std::vector<Mean> reward_means;
    std::vector<Mean> cost_means;
    std::vector<double> thresholds;
    NoiseKind default_noise = NoiseKind::bernoulli;
    std::vector<Noise> noise;
};

/// Checks every instance invariant and builds the dense instance. Rows whose sum
/// drifts from 1 by at most 1e-9 are renormalized; larger drift is an error.
/// Throws InstanceError with a located diagnostic.
CmdpInstance validate_instance(const RawInstance& raw);

/// Re-checks the invariants of an already built instance (throws InstanceError).
void check_instance(const CmdpInstance& inst);

/// Sparse description of a dense instance; validate_instance(to_raw(inst)) == inst.
RawInstance to_raw(const CmdpInstance& inst);

/// Throws std::invalid_argument when the policy does not match the shape or a row is
/// not a distribution within 1e-9.
void check_policy(const LayeredShape& shape, const Policy& pi);

/// Seeded random source with a platform-independent uniform draw.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform double in [0, 1) from the top 53 bits of one engine output.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Index drawn from a discrete distribution given one uniform draw.
std::size_t sample_index(std::span<const double> probs, double u);

/// Plays one episode of the interaction protocol (rewards and costs sampled from
/// the instance noise model). The output trajectory is resized in place.
void simulate_episode(const CmdpInstance& inst, const Policy& pi, Rng& rng, Trajectory& out);
Trajectory simulate_episode(const CmdpInstance& inst, const Policy& pi, Rng& rng);

/// Per-state values V(x) of a state-action payoff v under (kernel, pi);
/// entry 0 is V(x_0) and the terminal entry is 0.
struct StateValues {
    std::vector<double> per_state;
    double initial() const { return per_state.front(); }
};

StateValues value_function(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                           std::span<const double> v);
/// Allocation-free variant; `values` must hold num_states() entries.
void value_function(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                    std::span<const double> v, std::span<double> values);

OccupancyMeasure occupancy_measure(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi);
/// Allocation-free variant; `q` holds num_pairs() entries, `state_mass` num_states().
void occupancy_measure(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                       std::span<double> q, std::span<double> state_mass);

double dot(std::span<const double> a, std::span<const double> b);

/// Expected-reward view of a value: V^{pi,P}(v) = <q, v>.
inline double expected_value(const OccupancyMeasure& occ, std::span<const double> v) { return dot(occ.q, v); }

/// Finite-horizon CMDP over a single (non-layered) state space, for use with unroll_horizon.
struct StationaryCmdp {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    StateId initial_state = 0;
    std::vector<double> transition;              // [s][a][s']
    std::vector<double> reward_mean;             // [s][a]
    std::vector<std::vector<double>> cost_means; // [i][s][a]
    std::vector<double> thresholds;
    NoiseKind noise = NoiseKind::bernoulli;
};

/// Loop-free instance equivalent to running `base` for `horizon` steps: state s at
/// step k becomes a copy of s in layer k, and the last step moves to the terminal state.
CmdpInstance unroll_horizon(const StationaryCmdp& base, std::size_t horizon);

} // namespace cpdpo

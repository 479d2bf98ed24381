#include "cpdpo/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cpdpo {

namespace {

constexpr double kStochasticTolerance = 1e-9;
constexpr double kRenormalizeThreshold = 1e-12;

std::string at(std::size_t k, std::size_t x, std::size_t a, std::size_t line)
{
    std::ostringstream os;
    os << "(k=" << k << ", x=" << x << ", a=" << a << ")";
    if (line != 0)
        os << " on line " << line;
    return os.str();
}

[[noreturn]] void fail(InstanceErrorKind kind, const std::string& msg) { throw InstanceError(kind, msg); }

void check_mean(double value, const char* what, std::size_t k, std::size_t x, std::size_t a, std::size_t line)
{
    if (!(value >= 0.0 && value <= 1.0)) {
        std::ostringstream os;
        os << what << " mean " << value << " outside [0,1] at " << at(k, x, a, line);
        fail(InstanceErrorKind::mean_out_of_range, os.str());
    }
}

void check_thresholds(const std::vector<double>& thresholds, std::size_t horizon)
{
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        const double alpha = thresholds[i];
        std::ostringstream os;
        if (!(alpha >= 0.0)) {
            os << "threshold is negative for constraint " << i << ": " << alpha;
            fail(InstanceErrorKind::threshold_out_of_range, os.str());
        }
        if (!(alpha <= static_cast<double>(horizon))) {
            os << "threshold exceeds L=" << horizon << " for constraint " << i << ": " << alpha;
            fail(InstanceErrorKind::threshold_out_of_range, os.str());
        }
    }
}

void check_layers(const std::vector<std::size_t>& layers)
{
    if (layers.size() < 2)
        fail(InstanceErrorKind::malformed, "need at least two layers (initial and terminal)");
    for (std::size_t k = 0; k < layers.size(); ++k)
        if (layers[k] == 0)
            fail(InstanceErrorKind::malformed, "layer " + std::to_string(k) + " is empty");
    if (layers.front() != 1)
        fail(InstanceErrorKind::non_singleton_layer,
             "first layer must be a singleton (has " + std::to_string(layers.front()) + " states)");
    if (layers.back() != 1)
        fail(InstanceErrorKind::non_singleton_layer,
             "last layer must be a singleton (has " + std::to_string(layers.back()) + " states)");
}

void check_index(const LayeredShape& shape, std::size_t k, std::size_t x, std::size_t a, std::size_t line)
{
    if (k >= shape.horizon())
        fail(InstanceErrorKind::malformed, "layer index out of range at " + at(k, x, a, line));
    if (x >= shape.layer_size(k))
        fail(InstanceErrorKind::malformed, "state index out of range at " + at(k, x, a, line));
    if (a >= shape.num_actions())
        fail(InstanceErrorKind::malformed, "action index out of range at " + at(k, x, a, line));
}

// Sum check and renormalization of every kernel row.
void normalize_rows(const LayeredShape& shape, TransitionKernel& kernel)
{
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        for (ActionId a = 0; a < shape.num_actions(); ++a) {
            auto row = kernel.row(shape, x, a);
            double sum = 0.0;
            for (double p : row) {
                if (!(p >= 0.0)) {
                    std::ostringstream os;
                    os << "negative or invalid probability in row at "
                       << at(shape.layer_of(x), shape.index_in_layer(x), a, 0);
                    fail(InstanceErrorKind::non_stochastic_row, os.str());
                }
                sum += p;
            }
            if (!(std::abs(sum - 1.0) <= kStochasticTolerance)) {
                std::ostringstream os;
                os.precision(17);
                os << "row not stochastic at " << at(shape.layer_of(x), shape.index_in_layer(x), a, 0)
                   << ": sum " << sum;
                fail(InstanceErrorKind::non_stochastic_row, os.str());
            }
            if (std::abs(sum - 1.0) > kRenormalizeThreshold)
                for (double& p : row)
                    p /= sum;
        }
    }
}

} // namespace

Policy Policy::uniform(const LayeredShape& shape)
{
    Policy pi;
    pi.num_actions = shape.num_actions();
    pi.prob.assign(shape.num_pairs(), 1.0 / static_cast<double>(shape.num_actions()));
    return pi;
}

CmdpInstance validate_instance(const RawInstance& raw)
{
    check_layers(raw.layers);
    if (raw.actions == 0)
        fail(InstanceErrorKind::malformed, "at least one action is required");

    CmdpInstance inst;
    inst.shape = LayeredShape(raw.layers, raw.actions);
    const LayeredShape& shape = inst.shape;
    const std::size_t m = raw.thresholds.size();

    inst.transition.prob.assign(shape.kernel_size(), 0.0);
    std::vector<char> seen(shape.kernel_size(), 0);
    for (const auto& t : raw.transitions) {
        if (t.layer >= shape.horizon())
            fail(InstanceErrorKind::cross_layer_edge,
                 "cross-layer edge: transition out of the terminal layer at " +
                     at(t.layer, t.state, t.action, t.line));
        check_index(shape, t.layer, t.state, t.action, t.line);
        if (t.next >= shape.layer_size(t.layer + 1)) {
            std::ostringstream os;
            os << "cross-layer edge: successor " << t.next << " is not in layer " << t.layer + 1 << " (size "
               << shape.layer_size(t.layer + 1) << ") at " << at(t.layer, t.state, t.action, t.line);
            fail(InstanceErrorKind::cross_layer_edge, os.str());
        }
        const std::size_t idx = shape.row_offset(shape.state(t.layer, t.state), t.action) + t.next;
        if (seen[idx])
            fail(InstanceErrorKind::malformed, "duplicate transition entry at " + at(t.layer, t.state, t.action, t.line));
        seen[idx] = 1;
        inst.transition.prob[idx] = t.prob;
    }
    normalize_rows(shape, inst.transition);

    inst.reward_mean.assign(shape.num_pairs(), 0.0);
    std::vector<char> seen_pair(shape.num_pairs(), 0);
    for (const auto& r : raw.reward_means) {
        check_index(shape, r.layer, r.state, r.action, r.line);
        check_mean(r.value, "reward", r.layer, r.state, r.action, r.line);
        const PairId p = shape.pair(shape.state(r.layer, r.state), r.action);
        if (seen_pair[p])
            fail(InstanceErrorKind::malformed, "duplicate reward entry at " + at(r.layer, r.state, r.action, r.line));
        seen_pair[p] = 1;
        inst.reward_mean[p] = r.value;
    }

    inst.cost_means.assign(m, std::vector<double>(shape.num_pairs(), 0.0));
    std::vector<char> seen_cost(m * shape.num_pairs(), 0);
    for (const auto& c : raw.cost_means) {
        if (c.constraint >= m)
            fail(InstanceErrorKind::malformed, "cost for unknown constraint " + std::to_string(c.constraint) +
                                                   " at " + at(c.layer, c.state, c.action, c.line));
        check_index(shape, c.layer, c.state, c.action, c.line);
        check_mean(c.value, "cost", c.layer, c.state, c.action, c.line);
        const PairId p = shape.pair(shape.state(c.layer, c.state), c.action);
        if (seen_cost[c.constraint * shape.num_pairs() + p])
            fail(InstanceErrorKind::malformed, "duplicate cost entry at " + at(c.layer, c.state, c.action, c.line));
        seen_cost[c.constraint * shape.num_pairs() + p] = 1;
        inst.cost_means[c.constraint][p] = c.value;
    }

    check_thresholds(raw.thresholds, shape.horizon());
    inst.thresholds = raw.thresholds;

    inst.reward_noise.assign(shape.num_pairs(), raw.default_noise);
    inst.cost_noise.assign(shape.num_pairs(), raw.default_noise);
    for (const auto& n : raw.noise) {
        check_index(shape, n.layer, n.state, n.action, n.line);
        const PairId p = shape.pair(shape.state(n.layer, n.state), n.action);
        inst.reward_noise[p] = n.reward;
        inst.cost_noise[p] = n.cost;
    }
    return inst;
}

void check_instance(const CmdpInstance& inst)
{
    const LayeredShape& shape = inst.shape;
    check_layers(shape.layer_sizes());
    if (inst.transition.prob.size() != shape.kernel_size() || inst.reward_mean.size() != shape.num_pairs() ||
        inst.cost_means.size() != inst.thresholds.size() || inst.reward_noise.size() != shape.num_pairs() ||
        inst.cost_noise.size() != shape.num_pairs())
        fail(InstanceErrorKind::malformed, "instance arrays do not match the shape");

    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        for (ActionId a = 0; a < shape.num_actions(); ++a) {
            const auto row = inst.transition.row(shape, x, a);
            double sum = 0.0;
            for (double p : row) {
                if (!(p >= 0.0))
                    fail(InstanceErrorKind::non_stochastic_row,
                         "negative probability in row at " + at(shape.layer_of(x), shape.index_in_layer(x), a, 0));
                sum += p;
            }
            if (!(std::abs(sum - 1.0) <= kStochasticTolerance))
                fail(InstanceErrorKind::non_stochastic_row,
                     "row not stochastic at " + at(shape.layer_of(x), shape.index_in_layer(x), a, 0));
        }
    }
    for (PairId p = 0; p < shape.num_pairs(); ++p) {
        const StateId x = shape.pair_state(p);
        check_mean(inst.reward_mean[p], "reward", shape.layer_of(x), shape.index_in_layer(x), shape.pair_action(p), 0);
        for (const auto& g : inst.cost_means) {
            if (g.size() != shape.num_pairs())
                fail(InstanceErrorKind::malformed, "cost vector does not match the shape");
            check_mean(g[p], "cost", shape.layer_of(x), shape.index_in_layer(x), shape.pair_action(p), 0);
        }
    }
    check_thresholds(inst.thresholds, shape.horizon());
}

RawInstance to_raw(const CmdpInstance& inst)
{
    const LayeredShape& shape = inst.shape;
    RawInstance raw;
    raw.layers = shape.layer_sizes();
    raw.actions = shape.num_actions();
    raw.thresholds = inst.thresholds;

    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        const std::size_t k = shape.layer_of(x);
        const std::size_t j = shape.index_in_layer(x);
        for (ActionId a = 0; a < shape.num_actions(); ++a) {
            const auto row = inst.transition.row(shape, x, a);
            for (std::size_t n = 0; n < row.size(); ++n)
                if (row[n] != 0.0)
                    raw.transitions.push_back({k, j, a, n, row[n], 0});
            const PairId p = shape.pair(x, a);
            raw.reward_means.push_back({0, k, j, a, inst.reward_mean[p], 0});
            for (std::size_t i = 0; i < inst.cost_means.size(); ++i)
                raw.cost_means.push_back({i, k, j, a, inst.cost_means[i][p], 0});
        }
    }

    // Bernoulli is the default unless every pair is degenerate; exceptions are listed.
    const auto n_degenerate = static_cast<std::size_t>(
        std::count(inst.reward_noise.begin(), inst.reward_noise.end(), NoiseKind::degenerate) +
        std::count(inst.cost_noise.begin(), inst.cost_noise.end(), NoiseKind::degenerate));
    raw.default_noise = n_degenerate == 2 * shape.num_pairs() ? NoiseKind::degenerate : NoiseKind::bernoulli;
    for (PairId p = 0; p < shape.num_pairs(); ++p) {
        if (inst.reward_noise[p] != raw.default_noise || inst.cost_noise[p] != raw.default_noise) {
            const StateId x = shape.pair_state(p);
            raw.noise.push_back({shape.layer_of(x), shape.index_in_layer(x), shape.pair_action(p),
                                 inst.reward_noise[p], inst.cost_noise[p], 0});
        }
    }
    return raw;
}

void check_policy(const LayeredShape& shape, const Policy& pi)
{
    if (pi.num_actions != shape.num_actions() || pi.prob.size() != shape.num_pairs())
        throw std::invalid_argument("policy does not match the instance shape");
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        double sum = 0.0;
        for (double p : pi.row(x)) {
            if (!(p >= 0.0))
                throw std::invalid_argument("negative policy entry at state " + std::to_string(x));
            sum += p;
        }
        if (!(std::abs(sum - 1.0) <= 1e-9))
            throw std::invalid_argument("policy row does not sum to 1 at state " + std::to_string(x));
    }
}

std::size_t sample_index(std::span<const double> probs, double u)
{
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0)
            continue;
        cumulative += probs[i];
        last_positive = i;
        if (u < cumulative)
            return i;
    }
    // u landed in the rounding gap above the cumulative sum.
    return last_positive;
}

namespace {

double sample_payoff(NoiseKind kind, double mean, Rng& rng)
{
    if (kind == NoiseKind::degenerate)
        return mean;
    return rng.uniform() < mean ? 1.0 : 0.0;
}

} // namespace

void simulate_episode(const CmdpInstance& inst, const Policy& pi, Rng& rng, Trajectory& out)
{
    const LayeredShape& shape = inst.shape;
    const std::size_t L = shape.horizon();
    const std::size_t m = inst.num_constraints();
    out.states.resize(L + 1);
    out.actions.resize(L);
    out.rewards.resize(L);
    out.costs.resize(L * m);

    StateId x = shape.initial_state();
    for (std::size_t k = 0; k < L; ++k) {
        out.states[k] = x;
        const ActionId a = sample_index(pi.row(x), rng.uniform());
        out.actions[k] = a;
        const PairId p = shape.pair(x, a);
        out.rewards[k] = sample_payoff(inst.reward_noise[p], inst.reward_mean[p], rng);
        for (std::size_t i = 0; i < m; ++i)
            out.costs[k * m + i] = sample_payoff(inst.cost_noise[p], inst.cost_means[i][p], rng);
        x = shape.first_successor(x) + sample_index(inst.transition.row(shape, x, a), rng.uniform());
    }
    out.states[L] = x;
}

Trajectory simulate_episode(const CmdpInstance& inst, const Policy& pi, Rng& rng)
{
    Trajectory traj;
    simulate_episode(inst, pi, rng, traj);
    return traj;
}

namespace {

void check_dims(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi)
{
    if (kernel.prob.size() != shape.kernel_size())
        throw std::invalid_argument("transition kernel does not match the shape");
    if (pi.num_actions != shape.num_actions() || pi.prob.size() != shape.num_pairs())
        throw std::invalid_argument("policy does not match the shape");
}

} // namespace

void value_function(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                    std::span<const double> v, std::span<double> values)
{
    check_dims(shape, kernel, pi);
    if (v.size() != shape.num_pairs() || values.size() != shape.num_states())
        throw std::invalid_argument("value_function: dimension mismatch");

    const std::size_t A = shape.num_actions();
    values[shape.terminal_state()] = 0.0;
    for (StateId x = shape.terminal_state(); x-- > 0;) {
        const StateId first = shape.first_successor(x);
        double vx = 0.0;
        for (ActionId a = 0; a < A; ++a) {
            const auto row = kernel.row(shape, x, a);
            double next = 0.0;
            for (std::size_t n = 0; n < row.size(); ++n)
                next += row[n] * values[first + n];
            vx += pi.prob[x * A + a] * (v[x * A + a] + next);
        }
        values[x] = vx;
    }
}

StateValues value_function(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                           std::span<const double> v)
{
    StateValues out;
    out.per_state.resize(shape.num_states());
    value_function(shape, kernel, pi, v, out.per_state);
    return out;
}

void occupancy_measure(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                       std::span<double> q, std::span<double> state_mass)
{
    check_dims(shape, kernel, pi);
    if (q.size() != shape.num_pairs() || state_mass.size() != shape.num_states())
        throw std::invalid_argument("occupancy_measure: dimension mismatch");

    const std::size_t A = shape.num_actions();
    std::fill(state_mass.begin(), state_mass.end(), 0.0);
    state_mass[shape.initial_state()] = 1.0;
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        const StateId first = shape.first_successor(x);
        for (ActionId a = 0; a < A; ++a) {
            const double qa = state_mass[x] * pi.prob[x * A + a];
            q[x * A + a] = qa;
            const auto row = kernel.row(shape, x, a);
            for (std::size_t n = 0; n < row.size(); ++n)
                state_mass[first + n] += qa * row[n];
        }
    }
}

OccupancyMeasure occupancy_measure(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi)
{
    OccupancyMeasure occ;
    occ.q.resize(shape.num_pairs());
    std::vector<double> mass(shape.num_states());
    occupancy_measure(shape, kernel, pi, occ.q, mass);
    return occ;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("dot: dimension mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

CmdpInstance unroll_horizon(const StationaryCmdp& base, std::size_t horizon)
{
    const std::size_t S = base.num_states;
    const std::size_t A = base.num_actions;
    if (horizon == 0 || S == 0 || A == 0 || base.initial_state >= S)
        throw std::invalid_argument("unroll_horizon: empty model or horizon");
    if (base.transition.size() != S * A * S || base.reward_mean.size() != S * A ||
        base.cost_means.size() != base.thresholds.size())
        throw std::invalid_argument("unroll_horizon: dimension mismatch");

    // Layer 0 holds the initial state only; layers 1..H-1 hold a full copy of the
    // state space; layer H is the terminal singleton.
    std::vector<std::size_t> layers(horizon + 1, S);
    layers.front() = 1;
    layers.back() = 1;

    RawInstance raw;
    raw.layers = layers;
    raw.actions = A;
    raw.thresholds = base.thresholds;
    raw.default_noise = base.noise;
    for (std::size_t k = 0; k < horizon; ++k) {
        for (std::size_t j = 0; j < layers[k]; ++j) {
            const std::size_t s = (k == 0) ? base.initial_state : j;
            for (ActionId a = 0; a < A; ++a) {
                if (k + 1 == horizon) {
                    raw.transitions.push_back({k, j, a, 0, 1.0, 0});
                } else {
                    for (std::size_t s2 = 0; s2 < S; ++s2) {
                        const double p = base.transition[(s * A + a) * S + s2];
                        if (p != 0.0)
                            raw.transitions.push_back({k, j, a, s2, p, 0});
                    }
                }
                raw.reward_means.push_back({0, k, j, a, base.reward_mean[s * A + a], 0});
                for (std::size_t i = 0; i < base.cost_means.size(); ++i)
                    raw.cost_means.push_back({i, k, j, a, base.cost_means[i][s * A + a], 0});
            }
        }
    }
    return validate_instance(raw);
}

} // namespace cpdpo

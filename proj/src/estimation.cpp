#include "cpdpo/estimation.hpp"

#include "cpdpo/text_format.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace cpdpo {

double log_confidence_term(std::uint64_t horizon_T, std::size_t num_states, std::size_t num_actions, double delta,
                           std::size_t num_constraints)
{
    return std::log(static_cast<double>(horizon_T) * static_cast<double>(num_states) *
                    static_cast<double>(num_actions) * static_cast<double>(num_constraints) / delta);
}

double hoeffding_radius(std::uint64_t n, double log_term)
{
    const double denom = static_cast<double>(std::max<std::uint64_t>(1, n));
    return std::min(1.0, std::sqrt(4.0 * log_term / denom));
}

double bernstein_transition_radius(std::uint64_t n, double p_hat, double log_term)
{
    const double denom = static_cast<double>(n > 2 ? n - 1 : 1);
    return 2.0 * std::sqrt(p_hat * log_term / denom) + 14.0 * log_term / (3.0 * denom);
}

EstimatorState::EstimatorState(const LayeredShape& shape, std::size_t num_constraints, std::uint64_t horizon_T,
                               double delta)
    : shape_(shape),
      num_constraints_(num_constraints),
      horizon_T_(horizon_T),
      delta_(delta),
      visits_(shape.num_pairs(), 0),
      moves_(shape.kernel_size(), 0),
      reward_sum_(shape.num_pairs(), 0.0),
      cost_sum_(num_constraints * shape.num_pairs(), 0.0)
{
    if (horizon_T == 0)
        throw std::invalid_argument("estimator: T must be positive");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("estimator: delta must lie in (0,1)");
    reward_log_term_ = log_confidence_term(horizon_T, shape.num_states(), shape.num_actions(), delta);
    cost_log_term_ = log_confidence_term(horizon_T, shape.num_states(), shape.num_actions(), delta,
                                         std::max<std::size_t>(1, num_constraints));
}

void EstimatorState::ingest(const Trajectory& traj)
{
    if (traj.episode != episodes_ + 1)
        throw EstimatorError("trajectory of episode " + std::to_string(traj.episode) +
                             " ingested after episode " + std::to_string(episodes_) +
                             " (each episode must be ingested exactly once, in order)");
    const std::size_t L = shape_.horizon();
    if (traj.actions.size() != L || traj.states.size() != L + 1 || traj.rewards.size() != L ||
        traj.costs.size() != L * num_constraints_)
        throw std::invalid_argument("trajectory shape does not match the estimator");
    for (std::size_t k = 0; k < L; ++k) {
        const StateId x = traj.states[k];
        const StateId next = traj.states[k + 1];
        if (x >= shape_.num_states() || shape_.layer_of(x) != k || traj.actions[k] >= shape_.num_actions() ||
            next >= shape_.num_states() || shape_.layer_of(next) != k + 1)
            throw std::invalid_argument("trajectory step " + std::to_string(k) + " is not layer-consistent");
    }

    const std::size_t P = shape_.num_pairs();
    for (std::size_t k = 0; k < L; ++k) {
        const StateId x = traj.states[k];
        const PairId p = shape_.pair(x, traj.actions[k]);
        ++visits_[p];
        ++moves_[shape_.row_offset(p) + (traj.states[k + 1] - shape_.first_successor(x))];
        reward_sum_[p] += traj.rewards[k];
        for (std::size_t i = 0; i < num_constraints_; ++i)
            cost_sum_[i * P + p] += traj.costs[k * num_constraints_ + i];
    }
    ++episodes_;
}

double EstimatorState::reward_estimate(PairId p) const
{
    return reward_sum_[p] / static_cast<double>(std::max<std::uint64_t>(1, visits_[p]));
}

double EstimatorState::cost_estimate(std::size_t i, PairId p) const
{
    return cost_sum_[i * shape_.num_pairs() + p] / static_cast<double>(std::max<std::uint64_t>(1, visits_[p]));
}

double EstimatorState::empirical_transition(PairId p, std::size_t j) const
{
    const std::uint64_t n = visits_[p];
    if (n == 0)
        return 1.0 / static_cast<double>(shape_.row_width(shape_.pair_state(p)));
    return static_cast<double>(moves_[shape_.row_offset(p) + j]) / static_cast<double>(n);
}

double EstimatorState::reward_radius(PairId p) const { return hoeffding_radius(visits_[p], reward_log_term_); }

double EstimatorState::cost_radius(PairId p) const { return hoeffding_radius(visits_[p], cost_log_term_); }

double EstimatorState::transition_radius(PairId p, std::size_t j) const
{
    return bernstein_transition_radius(visits_[p], empirical_transition(p, j), reward_log_term_);
}

void EstimatorState::confidence_vectors(ConfidenceVectors& out) const
{
    const std::size_t P = shape_.num_pairs();
    const std::size_t m = num_constraints_;
    out.r_hat.resize(P);
    out.phi.resize(P);
    out.r_bar.resize(P);
    out.r_under.resize(P);
    out.xi.resize(P);
    out.g_hat.resize(m);
    out.g_bar.resize(m);
    out.g_under.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        out.g_hat[i].resize(P);
        out.g_bar[i].resize(P);
        out.g_under[i].resize(P);
    }
    for (PairId p = 0; p < P; ++p) {
        const double r = reward_estimate(p);
        const double phi = reward_radius(p);
        const double xi = cost_radius(p);
        out.r_hat[p] = r;
        out.phi[p] = phi;
        out.r_bar[p] = r + phi;
        out.r_under[p] = r - phi;
        out.xi[p] = xi;
        for (std::size_t i = 0; i < m; ++i) {
            const double g = cost_estimate(i, p);
            out.g_hat[i][p] = g;
            out.g_bar[i][p] = g + xi;
            out.g_under[i][p] = g - xi;
        }
    }
}

ConfidenceVectors EstimatorState::confidence_vectors() const
{
    ConfidenceVectors out;
    confidence_vectors(out);
    return out;
}

void EstimatorState::empirical_kernel(TransitionKernel& out) const
{
    out.prob.resize(shape_.kernel_size());
    for (PairId p = 0; p < shape_.num_pairs(); ++p) {
        const std::size_t offset = shape_.row_offset(p);
        const std::size_t width = shape_.row_width(shape_.pair_state(p));
        for (std::size_t j = 0; j < width; ++j)
            out.prob[offset + j] = empirical_transition(p, j);
    }
}

void EstimatorState::transition_set(TransitionConfidenceSet& out) const
{
    const std::size_t K = shape_.kernel_size();
    out.p_hat.prob.resize(K);
    out.eps.resize(K);
    out.lo.resize(K);
    out.hi.resize(K);
    for (PairId p = 0; p < shape_.num_pairs(); ++p) {
        const std::size_t offset = shape_.row_offset(p);
        const std::size_t width = shape_.row_width(shape_.pair_state(p));
        for (std::size_t j = 0; j < width; ++j) {
            const double ph = empirical_transition(p, j);
            const double e = bernstein_transition_radius(visits_[p], ph, reward_log_term_);
            out.p_hat.prob[offset + j] = ph;
            out.eps[offset + j] = e;
            out.lo[offset + j] = std::clamp(ph - e, 0.0, 1.0);
            out.hi[offset + j] = std::clamp(ph + e, 0.0, 1.0);
        }
    }
}

TransitionConfidenceSet EstimatorState::transition_set() const
{
    TransitionConfidenceSet out;
    transition_set(out);
    return out;
}

void write_estimator_dump(const EstimatorState& state, std::ostream& out)
{
    const LayeredShape& shape = state.shape();
    out << "# cpdpo estimator dump\n";
    out << "episodes " << state.episodes() << '\n';
    out << "T " << state.horizon_T() << '\n';
    out << "delta " << format_double(state.delta()) << '\n';
    out << "layers";
    for (auto s : shape.layer_sizes())
        out << ' ' << s;
    out << "\nactions " << shape.num_actions() << '\n';
    out << "constraints " << state.num_constraints() << '\n';
    out << "# pair <p> <N> <r_hat> <phi> <xi>\n";
    for (PairId p = 0; p < shape.num_pairs(); ++p)
        out << "pair " << p << ' ' << state.visits(p) << ' ' << format_double(state.reward_estimate(p)) << ' '
            << format_double(state.reward_radius(p)) << ' ' << format_double(state.cost_radius(p)) << '\n';
    out << "# cost <i> <p> <g_hat>\n";
    for (std::size_t i = 0; i < state.num_constraints(); ++i)
        for (PairId p = 0; p < shape.num_pairs(); ++p)
            out << "cost " << i << ' ' << p << ' ' << format_double(state.cost_estimate(i, p)) << '\n';
    out << "# next <p> <j> <M> <p_hat> <eps>\n";
    for (PairId p = 0; p < shape.num_pairs(); ++p)
        for (std::size_t j = 0; j < shape.row_width(shape.pair_state(p)); ++j)
            out << "next " << p << ' ' << j << ' ' << state.transition_count(p, j) << ' '
                << format_double(state.empirical_transition(p, j)) << ' '
                << format_double(state.transition_radius(p, j)) << '\n';
}

EstimatorDump read_estimator_dump(std::istream& in)
{
    EstimatorDump dump;
    const auto lines = read_kv(in);
    for (const auto& kv : lines) {
        if (kv.key == "episodes")
            dump.episodes = uints_of(kv, 1)[0];
        else if (kv.key == "T")
            dump.horizon_T = uints_of(kv, 1)[0];
        else if (kv.key == "delta")
            dump.delta = doubles_of(kv, 1)[0];
        else if (kv.key == "layers")
            for (auto v : uints_of(kv))
                dump.layers.push_back(static_cast<std::size_t>(v));
        else if (kv.key == "actions")
            dump.num_actions = static_cast<std::size_t>(uints_of(kv, 1)[0]);
        else if (kv.key == "constraints")
            dump.num_constraints = static_cast<std::size_t>(uints_of(kv, 1)[0]);
    }
    const LayeredShape shape(dump.layers, dump.num_actions);
    const std::size_t P = shape.num_pairs();
    dump.visits.assign(P, 0);
    dump.r_hat.assign(P, 0.0);
    dump.phi.assign(P, 0.0);
    dump.xi.assign(P, 0.0);
    dump.g_hat.assign(dump.num_constraints, std::vector<double>(P, 0.0));
    dump.p_hat.assign(shape.kernel_size(), 0.0);
    dump.eps.assign(shape.kernel_size(), 0.0);
    for (const auto& kv : lines) {
        if (kv.key == "pair") {
            if (kv.values.size() != 5)
                throw ParseError("'pair' expects 5 values on line " + std::to_string(kv.line));
            const auto p = parse_uint(kv.values[0], kv.line);
            if (p >= P)
                throw ParseError("pair index out of range on line " + std::to_string(kv.line));
            dump.visits[p] = parse_uint(kv.values[1], kv.line);
            dump.r_hat[p] = parse_double(kv.values[2], kv.line);
            dump.phi[p] = parse_double(kv.values[3], kv.line);
            dump.xi[p] = parse_double(kv.values[4], kv.line);
        } else if (kv.key == "cost") {
            if (kv.values.size() != 3)
                throw ParseError("'cost' expects 3 values on line " + std::to_string(kv.line));
            const auto i = parse_uint(kv.values[0], kv.line);
            const auto p = parse_uint(kv.values[1], kv.line);
            if (i >= dump.num_constraints || p >= P)
                throw ParseError("cost index out of range on line " + std::to_string(kv.line));
            dump.g_hat[i][p] = parse_double(kv.values[2], kv.line);
        } else if (kv.key == "next") {
            if (kv.values.size() != 5)
                throw ParseError("'next' expects 5 values on line " + std::to_string(kv.line));
            const auto p = parse_uint(kv.values[0], kv.line);
            const auto j = parse_uint(kv.values[1], kv.line);
            if (p >= P || j >= shape.row_width(shape.pair_state(p)))
                throw ParseError("transition index out of range on line " + std::to_string(kv.line));
            dump.p_hat[shape.row_offset(p) + j] = parse_double(kv.values[3], kv.line);
            dump.eps[shape.row_offset(p) + j] = parse_double(kv.values[4], kv.line);
        }
    }
    return dump;
}

} // namespace cpdpo

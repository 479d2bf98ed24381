#pragma once

#include "cpdpo/cmdp.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace cpdpo {

/// Empirical means and Hoeffding radii for every pair.
/// r_bar = r_hat + phi, r_under = r_hat - phi, and likewise g with xi.
struct ConfidenceVectors {
    std::vector<double> r_hat, phi, r_bar, r_under;
    std::vector<double> xi;
    std::vector<std::vector<double>> g_hat, g_bar, g_under; // [constraint][pair]
};

/// Empirical kernel with per-triplet radii, all in kernel layout. lo / hi are the
/// radii intervals clipped to [0, 1].
struct TransitionConfidenceSet {
    TransitionKernel p_hat;
    std::vector<double> eps;
    std::vector<double> lo, hi;
};

/// ln(T |X| |A| m / delta).
double log_confidence_term(std::uint64_t horizon_T, std::size_t num_states, std::size_t num_actions, double delta,
                           std::size_t num_constraints = 1);

/// min{1, sqrt(4 log_term / max{1, n})}.
double hoeffding_radius(std::uint64_t n, double log_term);

/// 2 sqrt(p_hat log_term / max{1, n-1}) + 14 log_term / (3 max{1, n-1}); not clamped.
double bernstein_transition_radius(std::uint64_t n, double p_hat, double log_term);

class EstimatorError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/**
 * Visit counters and running sums of the online estimators.
 *
 * Radii and means are recomputed from the counters on demand. Each trajectory must
 * carry the next episode index (episodes() + 1); ingesting out of order or twice
 * throws EstimatorError.
 */
class EstimatorState {
public:
    EstimatorState(const LayeredShape& shape, std::size_t num_constraints, std::uint64_t horizon_T, double delta);

    void ingest(const Trajectory& traj);

    const LayeredShape& shape() const { return shape_; }
    std::uint64_t episodes() const { return episodes_; }
    std::uint64_t horizon_T() const { return horizon_T_; }
    double delta() const { return delta_; }
    std::size_t num_constraints() const { return num_constraints_; }

    std::uint64_t visits(PairId p) const { return visits_[p]; }
    /// M(x, a, x') for the j-th successor of the pair's state.
    std::uint64_t transition_count(PairId p, std::size_t j) const { return moves_[shape_.row_offset(p) + j]; }
    double reward_sum(PairId p) const { return reward_sum_[p]; }
    double cost_sum(std::size_t i, PairId p) const { return cost_sum_[i * shape_.num_pairs() + p]; }

    double reward_estimate(PairId p) const;
    double cost_estimate(std::size_t i, PairId p) const;
    /// Empirical P(x'|x,a); uniform over the next layer while the pair is unvisited.
    double empirical_transition(PairId p, std::size_t j) const;

    double reward_radius(PairId p) const;
    double cost_radius(PairId p) const;
    double transition_radius(PairId p, std::size_t j) const;

    double reward_log_term() const { return reward_log_term_; }
    double cost_log_term() const { return cost_log_term_; }

    ConfidenceVectors confidence_vectors() const;
    void confidence_vectors(ConfidenceVectors& out) const;
    /// Fills only the empirical kernel (kernel layout).
    void empirical_kernel(TransitionKernel& out) const;
    TransitionConfidenceSet transition_set() const;
    void transition_set(TransitionConfidenceSet& out) const;

private:
    LayeredShape shape_;
    std::size_t num_constraints_;
    std::uint64_t horizon_T_;
    double delta_;
    double reward_log_term_;
    double cost_log_term_;
    std::uint64_t episodes_ = 0;
    std::vector<std::uint64_t> visits_;
    std::vector<std::uint64_t> moves_;
    std::vector<double> reward_sum_;
    std::vector<double> cost_sum_;
};

/// Snapshot of estimator state in text form, for post-mortem inspection and audits.
struct EstimatorDump {
    std::uint64_t episodes = 0;
    std::uint64_t horizon_T = 0;
    double delta = 0.0;
    std::vector<std::size_t> layers;
    std::size_t num_actions = 0;
    std::size_t num_constraints = 0;
    std::vector<std::uint64_t> visits;          // per pair
    std::vector<double> r_hat, phi, xi;         // per pair
    std::vector<std::vector<double>> g_hat;     // [constraint][pair]
    std::vector<double> p_hat, eps;             // kernel layout
};

void write_estimator_dump(const EstimatorState& state, std::ostream& out);
EstimatorDump read_estimator_dump(std::istream& in);

} // namespace cpdpo

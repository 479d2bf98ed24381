#pragma once

#include "cpdpo/cmdp.hpp"
#include "cpdpo/estimation.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpdpo {

enum class PrimalMode { full, known_transition };

const char* primal_mode_name(PrimalMode mode);
PrimalMode parse_primal_mode(const std::string& text);

struct PrimalParams {
    double eta = 0.0;   // learning rate
    double gamma = 0.0; // implicit exploration
    double beta = 1.0;  // bonus coefficient
    PrimalMode mode = PrimalMode::full;
};

/// eta = sqrt(|A| ln|A| / (L T)), gamma = eta, beta = 1. ln|A| is taken at |A| >= 2
/// so that a single-action shape still gets a positive rate.
PrimalParams default_primal_params(const LayeredShape& shape, std::uint64_t horizon_T);

void check_primal_params(const PrimalParams& params);

/// Per-field overrides of the defaults; gamma follows an overridden eta unless set.
struct PrimalOverrides {
    std::optional<double> eta, gamma, beta;
    std::optional<PrimalMode> mode;

    bool empty() const { return !eta && !gamma && !beta && !mode; }
};

PrimalParams resolve_primal_params(const LayeredShape& shape, std::uint64_t horizon_T,
                                   const PrimalOverrides& overrides);

Policy initial_policy(const LayeredShape& shape);

/// clamp(raw / C, 0, 1).
double scale_loss(double raw, double C);

/// Upper occupancy bound u(x, a): the largest probability of visiting (x, a) under
/// pi over all kernels whose rows lie in the [lo, hi] boxes (kernel layout), rows
/// chosen independently. Computed exactly with one backward pass per target state.
std::vector<double> upper_occupancy(const LayeredShape& shape, const TransitionConfidenceSet& conf, const Policy& pi);
/// Allocation-free variant: `u` has num_pairs() entries, `reach` num_states(),
/// `order` max_row_width().
void upper_occupancy(const LayeredShape& shape, std::span<const double> lo, std::span<const double> hi,
                     const Policy& pi, std::span<double> u, std::span<double> reach, std::span<std::size_t> order);

/// Q(x, a) = 1{(x, a) visited} * (sum of scaled losses from its step on) / (u(x, a) + gamma).
std::vector<double> q_loss_estimate(const LayeredShape& shape, const Trajectory& traj,
                                    std::span<const double> scaled_losses, std::span<const double> u, double gamma);
void q_loss_estimate(const LayeredShape& shape, const Trajectory& traj, std::span<const double> scaled_losses,
                     std::span<const double> u, double gamma, std::span<double> q_hat);

/// Dilated bonus: b(x) = beta sum_a pi(a|x) gamma L / (u(x,a) + gamma) and
/// B(x, a) = b(x) + (1 + 1/L) max_{p in box row} sum_x' p(x') B(x'), B(x) = sum_a pi(a|x) B(x, a).
std::vector<double> dilated_bonus(const LayeredShape& shape, const TransitionConfidenceSet& conf, const Policy& pi,
                                  std::span<const double> u, double gamma, double beta);
void dilated_bonus(const LayeredShape& shape, std::span<const double> lo, std::span<const double> hi,
                   const Policy& pi, std::span<const double> u, double gamma, double beta, std::span<double> bonus,
                   std::span<double> state_bonus, std::span<std::size_t> order);

/// pi'(a|x) proportional to pi(a|x) exp(-eta (Q(x,a) - B(x,a))), stabilised per state.
Policy policy_update(const LayeredShape& shape, const Policy& pi, std::span<const double> q_hat,
                     std::span<const double> bonus, double eta);

/// Same update on log-weights; `log_weights` is renormalised to log pi' in place.
void policy_update_log(const LayeredShape& shape, std::span<double> log_weights, std::span<const double> q_hat,
                       std::span<const double> bonus, double eta, Policy& pi_out);

/// Mean Shannon entropy (nats) of the policy rows.
double policy_entropy(const LayeredShape& shape, const Policy& pi);

/// Primal learner interface: exposes the current policy and consumes the scaled
/// losses ([0,1], one per step) of the last trajectory.
class PrimalLearner {
public:
    virtual ~PrimalLearner() = default;
    virtual const Policy& policy() const = 0;
    virtual void update(const Trajectory& traj, std::span<const double> scaled_losses,
                        const EstimatorState& estimator) = 0;
};

/// Policy optimization with dilated bonuses under the estimator's transition confidence set.
class PoDbLearner final : public PrimalLearner {
public:
    PoDbLearner(const LayeredShape& shape, const PrimalParams& params);

    const Policy& policy() const override { return pi_; }
    void update(const Trajectory& traj, std::span<const double> scaled_losses,
                const EstimatorState& estimator) override;

    const std::vector<double>& last_upper_occupancy() const { return u_; }
    const std::vector<double>& last_bonus() const { return bonus_; }
    const std::vector<double>& last_q_hat() const { return q_hat_; }

private:
    LayeredShape shape_;
    PrimalParams params_;
    Policy pi_;
    std::vector<double> log_weights_;
    TransitionConfidenceSet conf_;
    std::vector<double> u_, q_hat_, bonus_, reach_, state_bonus_;
    std::vector<std::size_t> order_;
};

/// Exponential weights with u = exact occupancy under a known kernel and no bonus.
class KnownTransitionLearner final : public PrimalLearner {
public:
    KnownTransitionLearner(const LayeredShape& shape, const TransitionKernel& kernel, const PrimalParams& params);

    const Policy& policy() const override { return pi_; }
    void update(const Trajectory& traj, std::span<const double> scaled_losses,
                const EstimatorState& estimator) override;
    /// Same update without an estimator.
    void update(const Trajectory& traj, std::span<const double> scaled_losses);

    const std::vector<double>& last_occupancy() const { return u_; }
    const std::vector<double>& last_q_hat() const { return q_hat_; }

private:
    LayeredShape shape_;
    TransitionKernel kernel_;
    PrimalParams params_;
    Policy pi_;
    std::vector<double> log_weights_;
    std::vector<double> u_, q_hat_, zero_bonus_, state_mass_;
};

std::unique_ptr<PrimalLearner> make_primal_learner(const CmdpInstance& inst, const PrimalParams& params);

} // namespace cpdpo

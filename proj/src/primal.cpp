#include "cpdpo/primal.hpp"

#include "cpdpo/interval_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpdpo {

const char* primal_mode_name(PrimalMode mode)
{
    return mode == PrimalMode::known_transition ? "known_transition" : "full";
}

PrimalMode parse_primal_mode(const std::string& text)
{
    if (text == "full")
        return PrimalMode::full;
    if (text == "known_transition")
        return PrimalMode::known_transition;
    throw std::invalid_argument("unknown primal mode '" + text + "' (expected full or known_transition)");
}

PrimalParams default_primal_params(const LayeredShape& shape, std::uint64_t horizon_T)
{
    const double A = static_cast<double>(shape.num_actions());
    const double eta = std::sqrt(A * std::log(std::max(A, 2.0)) /
                                 (static_cast<double>(shape.horizon()) * static_cast<double>(horizon_T)));
    PrimalParams params;
    params.eta = eta;
    params.gamma = eta;
    params.beta = 1.0;
    return params;
}

void check_primal_params(const PrimalParams& params)
{
    if (!(params.eta > 0.0) || !std::isfinite(params.eta))
        throw std::invalid_argument("primal eta must be positive");
    if (!(params.gamma >= 0.0) || !std::isfinite(params.gamma))
        throw std::invalid_argument("primal gamma must be nonnegative");
    if (!(params.beta >= 0.0) || !std::isfinite(params.beta))
        throw std::invalid_argument("primal beta must be nonnegative");
}

PrimalParams resolve_primal_params(const LayeredShape& shape, std::uint64_t horizon_T,
                                   const PrimalOverrides& overrides)
{
    PrimalParams params = default_primal_params(shape, horizon_T);
    if (overrides.eta) {
        params.eta = *overrides.eta;
        params.gamma = *overrides.eta;
    }
    if (overrides.gamma)
        params.gamma = *overrides.gamma;
    if (overrides.beta)
        params.beta = *overrides.beta;
    if (overrides.mode)
        params.mode = *overrides.mode;
    check_primal_params(params);
    return params;
}

Policy initial_policy(const LayeredShape& shape) { return Policy::uniform(shape); }

double scale_loss(double raw, double C)
{
    if (!(C > 0.0))
        throw std::invalid_argument("loss scale must be positive");
    return std::clamp(raw / C, 0.0, 1.0);
}

void upper_occupancy(const LayeredShape& shape, std::span<const double> lo, std::span<const double> hi,
                     const Policy& pi, std::span<double> u, std::span<double> reach, std::span<std::size_t> order)
{
    const std::size_t A = shape.num_actions();
    for (StateId y = 0; y + 1 < shape.num_states(); ++y) {
        const std::size_t k = shape.layer_of(y);
        double reach_y = 1.0;
        if (k > 0) {
            for (StateId x = shape.layer_begin(k); x < shape.layer_end(k); ++x)
                reach[x] = x == y ? 1.0 : 0.0;
            for (std::size_t j = k; j-- > 0;) {
                const std::size_t width = shape.layer_size(j + 1);
                const std::span<const double> next(reach.data() + shape.layer_begin(j + 1), width);
                for (StateId x = shape.layer_begin(j); x < shape.layer_end(j); ++x) {
                    double value = 0.0;
                    for (ActionId a = 0; a < A; ++a) {
                        const double w = pi(x, a);
                        if (w == 0.0)
                            continue;
                        const std::size_t off = shape.row_offset(x, a);
                        value += w * greedy_box_simplex_max(lo.subspan(off, width), hi.subspan(off, width), next,
                                                            order.first(width));
                    }
                    reach[x] = value;
                }
            }
            reach_y = reach[shape.initial_state()];
        }
        for (ActionId a = 0; a < A; ++a)
            u[shape.pair(y, a)] = pi(y, a) * reach_y;
    }
}

std::vector<double> upper_occupancy(const LayeredShape& shape, const TransitionConfidenceSet& conf, const Policy& pi)
{
    std::vector<double> u(shape.num_pairs()), reach(shape.num_states());
    std::vector<std::size_t> order(shape.max_row_width());
    upper_occupancy(shape, conf.lo, conf.hi, pi, u, reach, order);
    return u;
}

void q_loss_estimate(const LayeredShape& shape, const Trajectory& traj, std::span<const double> scaled_losses,
                     std::span<const double> u, double gamma, std::span<double> q_hat)
{
    std::fill(q_hat.begin(), q_hat.end(), 0.0);
    double suffix = 0.0;
    for (std::size_t k = traj.length(); k-- > 0;) {
        suffix += scaled_losses[k];
        const PairId p = traj.pair(shape, k);
        const double denom = u[p] + gamma;
        q_hat[p] = denom > 0.0 ? suffix / denom : 0.0;
    }
}

std::vector<double> q_loss_estimate(const LayeredShape& shape, const Trajectory& traj,
                                    std::span<const double> scaled_losses, std::span<const double> u, double gamma)
{
    std::vector<double> q_hat(shape.num_pairs());
    q_loss_estimate(shape, traj, scaled_losses, u, gamma, q_hat);
    return q_hat;
}

void dilated_bonus(const LayeredShape& shape, std::span<const double> lo, std::span<const double> hi,
                   const Policy& pi, std::span<const double> u, double gamma, double beta, std::span<double> bonus,
                   std::span<double> state_bonus, std::span<std::size_t> order)
{
    const std::size_t L = shape.horizon();
    const std::size_t A = shape.num_actions();
    const double dilation = 1.0 + 1.0 / static_cast<double>(L);
    state_bonus[shape.terminal_state()] = 0.0;
    for (std::size_t k = L; k-- > 0;) {
        const std::size_t width = shape.layer_size(k + 1);
        const std::span<const double> next(state_bonus.data() + shape.layer_begin(k + 1), width);
        for (StateId x = shape.layer_begin(k); x < shape.layer_end(k); ++x) {
            double b = 0.0;
            if (gamma > 0.0 && beta > 0.0)
                for (ActionId a = 0; a < A; ++a)
                    b += pi(x, a) * gamma * static_cast<double>(L) / (u[shape.pair(x, a)] + gamma);
            b *= beta;
            double bx = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                const std::size_t off = shape.row_offset(x, a);
                const double future =
                    greedy_box_simplex_max(lo.subspan(off, width), hi.subspan(off, width), next, order.first(width));
                const double B = b + dilation * future;
                bonus[shape.pair(x, a)] = B;
                bx += pi(x, a) * B;
            }
            state_bonus[x] = bx;
        }
    }
}

std::vector<double> dilated_bonus(const LayeredShape& shape, const TransitionConfidenceSet& conf, const Policy& pi,
                                  std::span<const double> u, double gamma, double beta)
{
    std::vector<double> bonus(shape.num_pairs()), state_bonus(shape.num_states());
    std::vector<std::size_t> order(shape.max_row_width());
    dilated_bonus(shape, conf.lo, conf.hi, pi, u, gamma, beta, bonus, state_bonus, order);
    return bonus;
}

Policy policy_update(const LayeredShape& shape, const Policy& pi, std::span<const double> q_hat,
                     std::span<const double> bonus, double eta)
{
    const std::size_t A = shape.num_actions();
    Policy next = pi;
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        double mx = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < A; ++a)
            if (pi(x, a) > 0.0)
                mx = std::max(mx, -eta * (q_hat[shape.pair(x, a)] - bonus[shape.pair(x, a)]));
        double total = 0.0;
        auto row = next.row(x);
        for (ActionId a = 0; a < A; ++a) {
            const PairId p = shape.pair(x, a);
            row[a] = pi(x, a) > 0.0 ? pi(x, a) * std::exp(-eta * (q_hat[p] - bonus[p]) - mx) : 0.0;
            total += row[a];
        }
        if (!(total > 0.0) || !std::isfinite(total))
            throw std::runtime_error("policy update produced a degenerate row at state " + std::to_string(x));
        for (auto& w : row)
            w /= total;
    }
    return next;
}

void policy_update_log(const LayeredShape& shape, std::span<double> log_weights, std::span<const double> q_hat,
                       std::span<const double> bonus, double eta, Policy& pi_out)
{
    const std::size_t A = shape.num_actions();
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        const PairId first = shape.pair(x, 0);
        double mx = -std::numeric_limits<double>::infinity();
        for (ActionId a = 0; a < A; ++a) {
            double& w = log_weights[first + a];
            w -= eta * (q_hat[first + a] - bonus[first + a]);
            mx = std::max(mx, w);
        }
        double total = 0.0;
        for (ActionId a = 0; a < A; ++a)
            total += std::exp(log_weights[first + a] - mx);
        if (!(total >= 1.0) || !std::isfinite(total))
            throw std::runtime_error("policy update produced a degenerate row at state " + std::to_string(x));
        const double lse = mx + std::log(total);
        for (ActionId a = 0; a < A; ++a) {
            log_weights[first + a] -= lse;
            pi_out.prob[first + a] = std::exp(log_weights[first + a]);
        }
    }
}

double policy_entropy(const LayeredShape& shape, const Policy& pi)
{
    const std::size_t n = shape.num_states() - 1;
    double total = 0.0;
    for (StateId x = 0; x < n; ++x)
        for (double w : pi.row(x))
            if (w > 0.0)
                total -= w * std::log(w);
    return total / static_cast<double>(n);
}

namespace {

std::vector<double> initial_log_weights(const LayeredShape& shape)
{
    return std::vector<double>(shape.num_pairs(), -std::log(static_cast<double>(shape.num_actions())));
}

} // namespace

PoDbLearner::PoDbLearner(const LayeredShape& shape, const PrimalParams& params)
    : shape_(shape),
      params_(params),
      pi_(initial_policy(shape)),
      log_weights_(initial_log_weights(shape)),
      u_(shape.num_pairs()),
      q_hat_(shape.num_pairs()),
      bonus_(shape.num_pairs()),
      reach_(shape.num_states()),
      state_bonus_(shape.num_states()),
      order_(shape.max_row_width())
{
    check_primal_params(params);
}

void PoDbLearner::update(const Trajectory& traj, std::span<const double> scaled_losses,
                         const EstimatorState& estimator)
{
    estimator.transition_set(conf_);
    upper_occupancy(shape_, conf_.lo, conf_.hi, pi_, u_, reach_, order_);
    q_loss_estimate(shape_, traj, scaled_losses, u_, params_.gamma, q_hat_);
    dilated_bonus(shape_, conf_.lo, conf_.hi, pi_, u_, params_.gamma, params_.beta, bonus_, state_bonus_, order_);
    policy_update_log(shape_, log_weights_, q_hat_, bonus_, params_.eta, pi_);
}

KnownTransitionLearner::KnownTransitionLearner(const LayeredShape& shape, const TransitionKernel& kernel,
                                               const PrimalParams& params)
    : shape_(shape),
      kernel_(kernel),
      params_(params),
      pi_(initial_policy(shape)),
      log_weights_(initial_log_weights(shape)),
      u_(shape.num_pairs()),
      q_hat_(shape.num_pairs()),
      zero_bonus_(shape.num_pairs(), 0.0),
      state_mass_(shape.num_states())
{
    check_primal_params(params);
}

void KnownTransitionLearner::update(const Trajectory& traj, std::span<const double> scaled_losses,
                                    const EstimatorState&)
{
    update(traj, scaled_losses);
}

void KnownTransitionLearner::update(const Trajectory& traj, std::span<const double> scaled_losses)
{
    occupancy_measure(shape_, kernel_, pi_, u_, state_mass_);
    q_loss_estimate(shape_, traj, scaled_losses, u_, params_.gamma, q_hat_);
    policy_update_log(shape_, log_weights_, q_hat_, zero_bonus_, params_.eta, pi_);
}

std::unique_ptr<PrimalLearner> make_primal_learner(const CmdpInstance& inst, const PrimalParams& params)
{
    if (params.mode == PrimalMode::known_transition)
        return std::make_unique<KnownTransitionLearner>(inst.shape, inst.transition, params);
    return std::make_unique<PoDbLearner>(inst.shape, params);
}

} // namespace cpdpo

#pragma once

#include "cpdpo/cmdp.hpp"
#include "cpdpo/lp.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace cpdpo {

class InfeasibleInstance : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Occupancy-measure LP over q(x, a) under the instance kernel: initial-state mass,
/// per-layer mass and flow conservation rows, plus one cost row per constraint.
/// With `margin` set, one free margin variable s = s+ - s- (the last two columns) is
/// added to every cost row and the objective becomes s.
LpProblem occupancy_lp(const CmdpInstance& inst, bool margin);

/// pi(a|x) = q(x,a) / sum_a q(x,a); states with no mass get uniform rows.
Policy policy_from_occupancy(const LayeredShape& shape, std::span<const double> q);

struct OracleResult {
    double opt = 0.0;
    std::vector<double> q_star;
    Policy pi_star;
    std::vector<double> opt_costs; // V^{pi*}(g_i)
    double rho = 0.0;
    std::vector<double> q_rho;
    Policy pi_rho;
    double lp_reduced_cost_violation = 0.0;
};

/// OPT and an optimal policy. Throws InfeasibleInstance when no policy satisfies the
/// constraints, std::runtime_error when the LP solver fails.
OracleResult solve_opt(const CmdpInstance& inst);

struct RhoResult {
    double rho = 0.0;
    std::vector<double> q;
    Policy pi;
    double lp_reduced_cost_violation = 0.0;
};

/// rho = max_pi min_i (alpha_i - V^pi(g_i)), possibly nonpositive.
RhoResult compute_rho(const CmdpInstance& inst);

/// solve_opt followed by compute_rho.
OracleResult solve_oracle(const CmdpInstance& inst);

/// V^pi(r) - sum_i lambda_i (V^pi(g_i) - alpha_i), exact under the instance kernel.
double lagrangian_value(const CmdpInstance& inst, const Policy& pi, std::span<const double> lambda);

/// Values V^pi(r) and V^pi(g_i) under the instance kernel.
struct PolicyValues {
    double reward = 0.0;
    std::vector<double> costs;
};
PolicyValues policy_values(const CmdpInstance& inst, const Policy& pi);

struct StrongPlusCheck {
    bool holds = false;
    double lhs = 0.0;   // V^pi(r) - max_{lambda in [0,(L+1)/rho]^m} sum_i lambda_i (V^pi(g_i) - alpha_i)
    double slack = 0.0; // OPT - lhs
};

StrongPlusCheck check_strong_plus(const CmdpInstance& inst, const Policy& pi, double rho, double opt);

/// max over deterministic policies of V^pi(v), with a maximizing policy (ties to the lowest action).
struct GreedyResult {
    double value = 0.0;
    Policy pi;
};
GreedyResult greedy_value(const LayeredShape& shape, const TransitionKernel& kernel, std::span<const double> v);

/// max_pi L(pi, lambda), exact.
double lagrangian_dual_value(const CmdpInstance& inst, std::span<const double> lambda);

/// min over {lambda >= 0, |lambda|_1 <= bound} of max_pi L(pi, lambda), solved as an LP.
double bounded_dual_value(const CmdpInstance& inst, double bound);

struct LimStrongCheck {
    bool holds = false;
    double opt = 0.0;
    double bounded_dual = 0.0; // exact, radius L/rho
    double grid_min = 0.0;     // min over the lambda grid of max_pi L
    double grid_slack = 0.0;   // allowed excess of grid_min over OPT
};

/// Checks that restricting the multipliers to |lambda|_1 <= L/rho keeps the saddle
/// value at OPT, exactly (LP) and on a grid with `steps` subdivisions per unit simplex.
LimStrongCheck check_lim_strong(const CmdpInstance& inst, double rho, double opt, std::size_t steps = 24);

} // namespace cpdpo

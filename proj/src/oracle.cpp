#include "cpdpo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace cpdpo {

LpProblem occupancy_lp(const CmdpInstance& inst, bool margin)
{
    const LayeredShape& shape = inst.shape;
    const std::size_t P = shape.num_pairs();
    const std::size_t A = shape.num_actions();
    const std::size_t n = P + (margin ? 2 : 0);
    LpProblem lp;
    lp.num_vars = n;
    lp.objective.assign(n, 0.0);
    if (margin) {
        lp.objective[P] = 1.0;
        lp.objective[P + 1] = -1.0;
    } else {
        lp.objective.assign(inst.reward_mean.begin(), inst.reward_mean.end());
    }

    for (std::size_t k = 0; k < shape.horizon(); ++k) {
        std::vector<double> row(n, 0.0);
        for (StateId x = shape.layer_begin(k); x < shape.layer_end(k); ++x)
            for (ActionId a = 0; a < A; ++a)
                row[shape.pair(x, a)] = 1.0;
        lp.add_eq(std::move(row), 1.0);
    }
    for (std::size_t k = 1; k < shape.horizon(); ++k) {
        for (StateId y = shape.layer_begin(k); y < shape.layer_end(k); ++y) {
            std::vector<double> row(n, 0.0);
            for (ActionId a = 0; a < A; ++a)
                row[shape.pair(y, a)] = 1.0;
            const std::size_t j = shape.index_in_layer(y);
            for (StateId x = shape.layer_begin(k - 1); x < shape.layer_end(k - 1); ++x)
                for (ActionId a = 0; a < A; ++a)
                    row[shape.pair(x, a)] -= inst.transition.row(shape, x, a)[j];
            lp.add_eq(std::move(row), 0.0);
        }
    }
    for (std::size_t i = 0; i < inst.num_constraints(); ++i) {
        std::vector<double> row(n, 0.0);
        std::copy(inst.cost_means[i].begin(), inst.cost_means[i].end(), row.begin());
        if (margin) {
            row[P] = 1.0;
            row[P + 1] = -1.0;
        }
        lp.add_le(std::move(row), inst.thresholds[i]);
    }
    return lp;
}

Policy policy_from_occupancy(const LayeredShape& shape, std::span<const double> q)
{
    Policy pi = Policy::uniform(shape);
    const std::size_t A = shape.num_actions();
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        double mass = 0.0;
        for (ActionId a = 0; a < A; ++a)
            mass += std::max(0.0, q[shape.pair(x, a)]);
        if (mass <= 1e-12)
            continue;
        for (ActionId a = 0; a < A; ++a)
            pi.prob[shape.pair(x, a)] = std::max(0.0, q[shape.pair(x, a)]) / mass;
    }
    return pi;
}

PolicyValues policy_values(const CmdpInstance& inst, const Policy& pi)
{
    PolicyValues out;
    std::vector<double> values(inst.shape.num_states());
    value_function(inst.shape, inst.transition, pi, inst.reward_mean, values);
    out.reward = values[0];
    for (const auto& g : inst.cost_means) {
        value_function(inst.shape, inst.transition, pi, g, values);
        out.costs.push_back(values[0]);
    }
    return out;
}

namespace {

void require_solved(const LpSolution& sol, const char* what)
{
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error(std::string(what) + ": LP solver returned " + lp_status_name(sol.status));
}

} // namespace

OracleResult solve_opt(const CmdpInstance& inst)
{
    const LpSolution sol = lp_solve(occupancy_lp(inst, false));
    if (sol.status == LpStatus::infeasible)
        throw InfeasibleInstance("no policy satisfies every constraint");
    require_solved(sol, "solve_opt");
    OracleResult res;
    res.q_star = sol.x;
    res.pi_star = policy_from_occupancy(inst.shape, sol.x);
    const PolicyValues v = policy_values(inst, res.pi_star);
    res.opt = v.reward;
    res.opt_costs = v.costs;
    res.lp_reduced_cost_violation = sol.max_reduced_cost_violation;
    if (std::abs(v.reward - sol.objective) > 1e-8)
        throw std::runtime_error("solve_opt: derived policy does not reproduce the LP optimum");
    return res;
}

RhoResult compute_rho(const CmdpInstance& inst)
{
    const std::size_t P = inst.shape.num_pairs();
    RhoResult res;
    if (inst.num_constraints() == 0) {
        res.rho = static_cast<double>(inst.horizon());
        res.pi = Policy::uniform(inst.shape);
        res.q = occupancy_measure(inst.shape, inst.transition, res.pi).q;
        return res;
    }
    const LpSolution sol = lp_solve(occupancy_lp(inst, true));
    require_solved(sol, "compute_rho");
    res.q.assign(sol.x.begin(), sol.x.begin() + static_cast<std::ptrdiff_t>(P));
    res.pi = policy_from_occupancy(inst.shape, res.q);
    const PolicyValues v = policy_values(inst, res.pi);
    res.rho = inst.thresholds[0] - v.costs[0];
    for (std::size_t i = 1; i < v.costs.size(); ++i)
        res.rho = std::min(res.rho, inst.thresholds[i] - v.costs[i]);
    res.lp_reduced_cost_violation = sol.max_reduced_cost_violation;
    if (std::abs(res.rho - sol.objective) > 1e-8)
        throw std::runtime_error("compute_rho: derived policy does not reproduce the LP optimum");
    return res;
}

OracleResult solve_oracle(const CmdpInstance& inst)
{
    OracleResult res = solve_opt(inst);
    RhoResult rho = compute_rho(inst);
    res.rho = rho.rho;
    res.q_rho = std::move(rho.q);
    res.pi_rho = std::move(rho.pi);
    res.lp_reduced_cost_violation = std::max(res.lp_reduced_cost_violation, rho.lp_reduced_cost_violation);
    return res;
}

double lagrangian_value(const CmdpInstance& inst, const Policy& pi, std::span<const double> lambda)
{
    if (lambda.size() != inst.num_constraints())
        throw std::invalid_argument("lagrangian: multiplier count mismatch");
    const PolicyValues v = policy_values(inst, pi);
    double out = v.reward;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        out -= lambda[i] * (v.costs[i] - inst.thresholds[i]);
    return out;
}

StrongPlusCheck check_strong_plus(const CmdpInstance& inst, const Policy& pi, double rho, double opt)
{
    const double cap = (static_cast<double>(inst.horizon()) + 1.0) / rho;
    const PolicyValues v = policy_values(inst, pi);
    StrongPlusCheck out;
    out.lhs = v.reward;
    for (std::size_t i = 0; i < v.costs.size(); ++i)
        out.lhs -= cap * std::max(0.0, v.costs[i] - inst.thresholds[i]);
    out.slack = opt - out.lhs;
    out.holds = out.slack >= -1e-8;
    return out;
}

GreedyResult greedy_value(const LayeredShape& shape, const TransitionKernel& kernel, std::span<const double> v)
{
    const std::size_t A = shape.num_actions();
    GreedyResult out;
    out.pi.num_actions = A;
    out.pi.prob.assign(shape.num_pairs(), 0.0);
    std::vector<double> values(shape.num_states(), 0.0);
    for (std::size_t k = shape.horizon(); k-- > 0;) {
        const StateId next0 = shape.layer_begin(k + 1);
        for (StateId x = shape.layer_begin(k); x < shape.layer_end(k); ++x) {
            double best = -std::numeric_limits<double>::infinity();
            ActionId arg = 0;
            for (ActionId a = 0; a < A; ++a) {
                double q = v[shape.pair(x, a)];
                const auto row = kernel.row(shape, x, a);
                for (std::size_t j = 0; j < row.size(); ++j)
                    q += row[j] * values[next0 + j];
                if (q > best) {
                    best = q;
                    arg = a;
                }
            }
            values[x] = best;
            out.pi.prob[shape.pair(x, arg)] = 1.0;
        }
    }
    out.value = values[0];
    return out;
}

double lagrangian_dual_value(const CmdpInstance& inst, std::span<const double> lambda)
{
    std::vector<double> v = inst.reward_mean;
    double constant = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        constant += lambda[i] * inst.thresholds[i];
        for (std::size_t p = 0; p < v.size(); ++p)
            v[p] -= lambda[i] * inst.cost_means[i][p];
    }
    return greedy_value(inst.shape, inst.transition, v).value + constant;
}

double bounded_dual_value(const CmdpInstance& inst, double bound)
{
    // Variables: lambda (m), then V+ and V- for every non-terminal state.
    const LayeredShape& shape = inst.shape;
    const std::size_t m = inst.num_constraints();
    const std::size_t S = shape.num_states() - 1;
    const std::size_t A = shape.num_actions();
    const std::size_t n = m + 2 * S;
    auto vp = [&](StateId x) { return m + x; };
    auto vm = [&](StateId x) { return m + S + x; };

    LpProblem lp;
    lp.num_vars = n;
    lp.objective.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        lp.objective[i] = -inst.thresholds[i];
    lp.objective[vp(0)] = -1.0;
    lp.objective[vm(0)] = 1.0;
    // V(x) >= r(x,a) - sum_i lambda_i g_i(x,a) + sum_x' P(x'|x,a) V(x'), written as <=.
    for (StateId x = 0; x < S; ++x) {
        const StateId next0 = shape.first_successor(x);
        for (ActionId a = 0; a < A; ++a) {
            const PairId p = shape.pair(x, a);
            std::vector<double> row(n, 0.0);
            row[vp(x)] -= 1.0;
            row[vm(x)] += 1.0;
            for (std::size_t i = 0; i < m; ++i)
                row[i] = -inst.cost_means[i][p];
            const auto prow = inst.transition.row(shape, x, a);
            for (std::size_t j = 0; j < prow.size(); ++j) {
                const StateId y = next0 + j;
                if (shape.is_terminal(y))
                    continue;
                row[vp(y)] += prow[j];
                row[vm(y)] -= prow[j];
            }
            lp.add_le(std::move(row), -inst.reward_mean[p]);
        }
    }
    std::vector<double> ball(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        ball[i] = 1.0;
    lp.add_le(std::move(ball), bound);

    const LpSolution sol = lp_solve(lp);
    require_solved(sol, "bounded_dual_value");
    return -sol.objective;
}

LimStrongCheck check_lim_strong(const CmdpInstance& inst, double rho, double opt, std::size_t steps)
{
    if (!(rho > 0.0))
        throw std::invalid_argument("lim_strong check needs a positive rho");
    if (steps == 0)
        throw std::invalid_argument("lim_strong check needs at least one grid step");
    const std::size_t m = inst.num_constraints();
    const double L = static_cast<double>(inst.horizon());
    const double bound = L / rho;

    LimStrongCheck out;
    out.opt = opt;
    out.bounded_dual = bounded_dual_value(inst, bound);
    out.grid_min = std::numeric_limits<double>::infinity();
    out.grid_slack = L * static_cast<double>(m) * bound / static_cast<double>(steps);

    std::vector<std::size_t> counts(m, 0);
    std::vector<double> lambda(m, 0.0);
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t i, std::size_t left) {
        if (i == m) {
            for (std::size_t j = 0; j < m; ++j)
                lambda[j] = bound * static_cast<double>(counts[j]) / static_cast<double>(steps);
            out.grid_min = std::min(out.grid_min, lagrangian_dual_value(inst, lambda));
            return;
        }
        for (std::size_t c = 0; c <= left; ++c) {
            counts[i] = c;
            walk(i + 1, left - c);
        }
    };
    walk(0, steps);

    out.holds = std::abs(out.bounded_dual - opt) <= 1e-8 && out.grid_min >= opt - 1e-8 &&
                out.grid_min <= opt + out.grid_slack + 1e-8;
    return out;
}

} // namespace cpdpo

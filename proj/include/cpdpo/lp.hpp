#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cpdpo {

/// maximize c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0.  Rows are dense.
struct LpProblem {
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<std::vector<double>> eq_rows;
    std::vector<double> eq_rhs;
    std::vector<std::vector<double>> le_rows;
    std::vector<double> le_rhs;

    void add_eq(std::vector<double> row, double rhs);
    void add_le(std::vector<double> row, double rhs);
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

const char* lp_status_name(LpStatus status);

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    /// Largest improving reduced cost left at termination (0 at a verified optimum).
    double max_reduced_cost_violation = 0.0;
    std::size_t iterations = 0;
};

struct LpOptions {
    double tolerance = 1e-9;
    std::size_t max_iterations = 100000;
};

/// Dense two-phase simplex with Bland's rule. Redundant equality rows are dropped
/// after phase one.
LpSolution lp_solve(const LpProblem& problem, const LpOptions& options = {});

} // namespace cpdpo

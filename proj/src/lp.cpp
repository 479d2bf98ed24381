#include "cpdpo/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cpdpo {

void LpProblem::add_eq(std::vector<double> row, double rhs)
{
    if (row.size() != num_vars)
        throw std::invalid_argument("LP row has the wrong width");
    eq_rows.push_back(std::move(row));
    eq_rhs.push_back(rhs);
}

void LpProblem::add_le(std::vector<double> row, double rhs)
{
    if (row.size() != num_vars)
        throw std::invalid_argument("LP row has the wrong width");
    le_rows.push_back(std::move(row));
    le_rhs.push_back(rhs);
}

const char* lp_status_name(LpStatus status)
{
    switch (status) {
    case LpStatus::optimal:
        return "optimal";
    case LpStatus::infeasible:
        return "infeasible";
    case LpStatus::unbounded:
        return "unbounded";
    case LpStatus::iteration_limit:
        return "iteration_limit";
    }
    return "unknown";
}

namespace {

// Rows 0..m-1 are constraints, row m is the reduced-cost row z_j = c_B B^-1 A_j - c_j.
// The last column holds the right-hand side.
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, cols_); }
    double& z(std::size_t c) { return at(rows_, c); }

    void pivot(std::size_t pr, std::size_t pc)
    {
        const double inv = 1.0 / at(pr, pc);
        for (std::size_t c = 0; c <= cols_; ++c)
            at(pr, c) *= inv;
        at(pr, pc) = 1.0;
        for (std::size_t r = 0; r <= rows_; ++r) {
            if (r == pr)
                continue;
            const double f = at(r, pc);
            if (f == 0.0)
                continue;
            for (std::size_t c = 0; c <= cols_; ++c)
                at(r, c) -= f * at(pr, c);
            at(r, pc) = 0.0;
        }
        basis[pr] = pc;
    }

    void drop_row(std::size_t r)
    {
        const auto first = a_.begin() + static_cast<std::ptrdiff_t>(r * (cols_ + 1));
        a_.erase(first, first + static_cast<std::ptrdiff_t>(cols_ + 1));
        basis.erase(basis.begin() + static_cast<std::ptrdiff_t>(r));
        --rows_;
    }

    std::vector<std::size_t> basis;

private:
    std::size_t rows_, cols_;
    std::vector<double> a_;
};

enum class Outcome { optimal, unbounded, iteration_limit };

Outcome run_simplex(Tableau& tab, std::size_t allowed_cols, const LpOptions& opt, std::size_t& iterations)
{
    const double tol = opt.tolerance;
    while (true) {
        std::size_t enter = allowed_cols;
        for (std::size_t c = 0; c < allowed_cols; ++c)
            if (tab.z(c) < -tol) {
                enter = c;
                break;
            }
        if (enter == allowed_cols)
            return Outcome::optimal;
        if (iterations >= opt.max_iterations)
            return Outcome::iteration_limit;

        std::size_t leave = tab.rows();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < tab.rows(); ++r) {
            const double coef = tab.at(r, enter);
            if (coef <= tol)
                continue;
            const double ratio = tab.rhs(r) / coef;
            if (leave == tab.rows() || ratio < best - 1e-12) {
                best = ratio;
                leave = r;
            } else if (ratio <= best + 1e-12 && tab.basis[r] < tab.basis[leave]) {
                leave = r;
            }
        }
        if (leave == tab.rows())
            return Outcome::unbounded;
        tab.pivot(leave, enter);
        ++iterations;
    }
}

} // namespace

LpSolution lp_solve(const LpProblem& lp, const LpOptions& opt)
{
    const std::size_t n = lp.num_vars;
    if (lp.objective.size() != n || lp.eq_rows.size() != lp.eq_rhs.size() || lp.le_rows.size() != lp.le_rhs.size())
        throw std::invalid_argument("LP dimensions are inconsistent");
    for (const auto& row : lp.eq_rows)
        if (row.size() != n)
            throw std::invalid_argument("LP row has the wrong width");
    for (const auto& row : lp.le_rows)
        if (row.size() != n)
            throw std::invalid_argument("LP row has the wrong width");

    const std::size_t m_eq = lp.eq_rows.size();
    const std::size_t m_le = lp.le_rows.size();
    const std::size_t m = m_eq + m_le;

    // Columns: original vars, one slack per <= row, then artificials where needed.
    std::vector<bool> needs_art(m, false);
    std::size_t num_art = 0;
    for (std::size_t r = 0; r < m_eq; ++r) {
        needs_art[r] = true;
        ++num_art;
    }
    for (std::size_t r = 0; r < m_le; ++r)
        if (lp.le_rhs[r] < 0.0) {
            needs_art[m_eq + r] = true;
            ++num_art;
        }
    const std::size_t slack0 = n;
    const std::size_t art0 = n + m_le;
    const std::size_t cols = art0 + num_art;

    Tableau tab(m, cols);
    tab.basis.assign(m, 0);
    std::size_t next_art = art0;
    for (std::size_t r = 0; r < m; ++r) {
        const bool is_eq = r < m_eq;
        const auto& row = is_eq ? lp.eq_rows[r] : lp.le_rows[r - m_eq];
        double b = is_eq ? lp.eq_rhs[r] : lp.le_rhs[r - m_eq];
        const double sign = b < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < n; ++c)
            tab.at(r, c) = sign * row[c];
        if (!is_eq)
            tab.at(r, slack0 + (r - m_eq)) = sign;
        tab.rhs(r) = sign * b;
        if (needs_art[r]) {
            tab.at(r, next_art) = 1.0;
            tab.basis[r] = next_art++;
        } else {
            tab.basis[r] = slack0 + (r - m_eq);
        }
    }

    LpSolution sol;
    std::size_t iterations = 0;

    // Phase one: maximize -sum(artificials).
    if (num_art > 0) {
        for (std::size_t c = art0; c < cols; ++c)
            tab.z(c) = 1.0;
        for (std::size_t r = 0; r < m; ++r)
            if (tab.basis[r] >= art0)
                for (std::size_t c = 0; c <= cols; ++c)
                    tab.at(m, c) -= tab.at(r, c);
        const Outcome out = run_simplex(tab, cols, opt, iterations);
        sol.iterations = iterations;
        if (out == Outcome::iteration_limit) {
            sol.status = LpStatus::iteration_limit;
            return sol;
        }
        double scale = 1.0;
        for (std::size_t r = 0; r < m; ++r)
            scale = std::max(scale, std::abs(tab.rhs(r)));
        if (tab.rhs(tab.rows()) < -1e-7 * scale) {
            sol.status = LpStatus::infeasible;
            return sol;
        }
        // Drive remaining (zero-level) artificials out of the basis; drop redundant rows.
        for (std::size_t r = 0; r < tab.rows();) {
            if (tab.basis[r] < art0) {
                ++r;
                continue;
            }
            std::size_t pc = art0;
            double best = opt.tolerance;
            for (std::size_t c = 0; c < art0; ++c)
                if (std::abs(tab.at(r, c)) > best) {
                    best = std::abs(tab.at(r, c));
                    pc = c;
                }
            if (pc < art0) {
                tab.pivot(r, pc);
                ++r;
            } else {
                tab.drop_row(r);
            }
        }
    }

    // Phase two on the original objective; artificial columns may not re-enter.
    const std::size_t rows = tab.rows();
    auto cost = [&](std::size_t c) { return c < n ? lp.objective[c] : 0.0; };
    for (std::size_t c = 0; c <= cols; ++c) {
        double z = c < cols ? -cost(c) : 0.0;
        for (std::size_t r = 0; r < rows; ++r)
            z += cost(tab.basis[r]) * tab.at(r, c);
        tab.z(c) = z;
    }
    const Outcome out = run_simplex(tab, art0, opt, iterations);
    sol.iterations = iterations;
    if (out == Outcome::unbounded) {
        sol.status = LpStatus::unbounded;
        return sol;
    }
    if (out == Outcome::iteration_limit) {
        sol.status = LpStatus::iteration_limit;
        return sol;
    }

    sol.status = LpStatus::optimal;
    sol.x.assign(n, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        if (tab.basis[r] < n)
            sol.x[tab.basis[r]] = std::max(0.0, tab.rhs(r));
    sol.objective = 0.0;
    for (std::size_t c = 0; c < n; ++c)
        sol.objective += lp.objective[c] * sol.x[c];
    double violation = 0.0;
    for (std::size_t c = 0; c < art0; ++c)
        violation = std::max(violation, -tab.z(c));
    sol.max_reduced_cost_violation = violation;
    return sol;
}

} // namespace cpdpo

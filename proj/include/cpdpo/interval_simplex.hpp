#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cpdpo {

struct IntervalSimplexSolution {
    std::vector<double> p;
    double value = 0.0;
};

/**
 * max <p, values> over distributions p with |p(i) - p_hat(i)| <= eps(i).
 *
 * The intervals are first clipped to [0, 1]; the solver then starts from the lower
 * ends and pours the remaining mass greedily into the entries with the largest
 * values, each up to its upper end. Since lo <= p_hat <= hi the result is always a
 * valid distribution. Throws std::invalid_argument if p_hat is not a distribution
 * (tolerance 1e-9), eps has a negative entry, or the sizes differ.
 */
IntervalSimplexSolution max_linear_over_interval_simplex(std::span<const double> p_hat, std::span<const double> eps,
                                                         std::span<const double> values);

/// Greedy core on pre-clipped bounds (sum(lo) <= 1 <= sum(hi)). `order` is scratch
/// of the same size; `p_out` may be empty when only the value is needed.
double greedy_box_simplex_max(std::span<const double> lo, std::span<const double> hi, std::span<const double> values,
                              std::span<std::size_t> order, std::span<double> p_out = {});

} // namespace cpdpo

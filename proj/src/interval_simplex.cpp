#include "cpdpo/interval_simplex.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cpdpo {

double greedy_box_simplex_max(std::span<const double> lo, std::span<const double> hi, std::span<const double> values,
                              std::span<std::size_t> order, std::span<double> p_out)
{
    const std::size_t n = lo.size();
    // Stable insertion sort by descending value; rows are a handful of entries wide.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i;
        while (j > 0 && values[order[j - 1]] < values[i]) {
            order[j] = order[j - 1];
            --j;
        }
        order[j] = i;
    }

    double remaining = 1.0;
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        remaining -= lo[i];
        value += lo[i] * values[i];
    }
    remaining = std::max(remaining, 0.0);
    if (!p_out.empty())
        std::copy(lo.begin(), lo.end(), p_out.begin());
    for (std::size_t r = 0; r < n && remaining > 0.0; ++r) {
        const std::size_t i = order[r];
        const double add = std::min(hi[i] - lo[i], remaining);
        remaining -= add;
        value += add * values[i];
        if (!p_out.empty())
            p_out[i] += add;
    }
    return value;
}

IntervalSimplexSolution max_linear_over_interval_simplex(std::span<const double> p_hat, std::span<const double> eps,
                                                         std::span<const double> values)
{
    const std::size_t n = p_hat.size();
    if (eps.size() != n || values.size() != n || n == 0)
        throw std::invalid_argument("interval simplex: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(p_hat[i] >= 0.0))
            throw std::invalid_argument("interval simplex: p_hat has a negative entry");
        if (!(eps[i] >= 0.0))
            throw std::invalid_argument("interval simplex: negative radius");
        sum += p_hat[i];
    }
    if (!(std::abs(sum - 1.0) <= 1e-9))
        throw std::invalid_argument("interval simplex: p_hat is not a distribution");

    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = std::clamp(p_hat[i] - eps[i], 0.0, 1.0);
        hi[i] = std::clamp(p_hat[i] + eps[i], 0.0, 1.0);
    }
    std::vector<std::size_t> order(n);
    IntervalSimplexSolution out;
    out.p.resize(n);
    out.value = greedy_box_simplex_max(lo, hi, values, order, out.p);
    return out;
}

} // namespace cpdpo

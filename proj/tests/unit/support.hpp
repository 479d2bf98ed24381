#pragma once

#include "cpdpo/cmdp.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace testsupport {

using namespace cpdpo;

inline std::vector<double> random_distribution(Rng& rng, std::size_t n)
{
    std::vector<double> p(n);
    double s = 0.0;
    for (auto& v : p) {
        v = -std::log1p(-rng.uniform());
        s += v;
    }
    for (auto& v : p)
        v /= s;
    return p;
}

inline CmdpInstance random_instance(Rng& rng, std::vector<std::size_t> layers, std::size_t actions, std::size_t m,
                                    NoiseKind noise = NoiseKind::bernoulli)
{
    CmdpInstance inst;
    inst.shape = LayeredShape(std::move(layers), actions);
    const auto& shape = inst.shape;
    inst.transition.prob.assign(shape.kernel_size(), 0.0);
    for (StateId x = 0; x + 1 < shape.num_states(); ++x)
        for (ActionId a = 0; a < actions; ++a) {
            auto row = inst.transition.row(shape, x, a);
            const auto p = random_distribution(rng, row.size());
            std::copy(p.begin(), p.end(), row.begin());
        }
    inst.reward_mean.resize(shape.num_pairs());
    for (auto& r : inst.reward_mean)
        r = rng.uniform();
    inst.cost_means.assign(m, std::vector<double>(shape.num_pairs()));
    for (auto& g : inst.cost_means)
        for (auto& v : g)
            v = rng.uniform();
    inst.thresholds.assign(m, static_cast<double>(shape.horizon()));
    inst.reward_noise.assign(shape.num_pairs(), noise);
    inst.cost_noise.assign(shape.num_pairs(), noise);
    return inst;
}

/// Random layer sizes with singleton ends, `inner` inner layers of size 1..max_width.
inline std::vector<std::size_t> random_layers(Rng& rng, std::size_t inner, std::size_t max_width)
{
    std::vector<std::size_t> layers{1};
    for (std::size_t k = 0; k < inner; ++k)
        layers.push_back(1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_width)));
    layers.push_back(1);
    return layers;
}

inline Policy random_policy(const LayeredShape& shape, Rng& rng)
{
    Policy pi;
    pi.num_actions = shape.num_actions();
    pi.prob.resize(shape.num_pairs());
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        const auto p = random_distribution(rng, shape.num_actions());
        std::copy(p.begin(), p.end(), pi.row(x).begin());
    }
    return pi;
}

inline Policy deterministic_policy(const LayeredShape& shape, const std::vector<std::size_t>& choice)
{
    Policy pi;
    pi.num_actions = shape.num_actions();
    pi.prob.assign(shape.num_pairs(), 0.0);
    for (StateId x = 0; x + 1 < shape.num_states(); ++x)
        pi.prob[shape.pair(x, choice[x])] = 1.0;
    return pi;
}

/// Visits every (path, action sequence) with its probability; independent of the
/// library's DP code.
inline void enumerate_paths(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                            const std::function<void(const std::vector<PairId>&, double)>& visit)
{
    std::vector<PairId> path;
    std::function<void(StateId, double)> rec = [&](StateId x, double prob) {
        if (shape.is_terminal(x)) {
            visit(path, prob);
            return;
        }
        for (ActionId a = 0; a < shape.num_actions(); ++a) {
            const double pa = pi.prob[shape.pair(x, a)];
            if (pa == 0.0)
                continue;
            const std::size_t off = shape.row_offset(x, a);
            for (std::size_t j = 0; j < shape.row_width(x); ++j) {
                const double pj = kernel.prob[off + j];
                if (pj == 0.0)
                    continue;
                path.push_back(shape.pair(x, a));
                rec(shape.first_successor(x) + j, prob * pa * pj);
                path.pop_back();
            }
        }
    };
    rec(0, 1.0);
}

inline double path_value(const LayeredShape& shape, const TransitionKernel& kernel, const Policy& pi,
                         const std::vector<double>& v)
{
    double total = 0.0;
    enumerate_paths(shape, kernel, pi, [&](const std::vector<PairId>& path, double prob) {
        double s = 0.0;
        for (auto p : path)
            s += v[p];
        total += prob * s;
    });
    return total;
}

} // namespace testsupport

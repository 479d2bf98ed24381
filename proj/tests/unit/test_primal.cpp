#include "doctest.h"
#include "support.hpp"

#include "cpdpo/dual.hpp"
#include "cpdpo/primal.hpp"

#include <algorithm>

using namespace cpdpo;
using namespace testsupport;

namespace {

TransitionConfidenceSet box_around(const TransitionKernel& kernel, double eps)
{
    TransitionConfidenceSet c;
    c.p_hat = kernel;
    c.eps.assign(kernel.prob.size(), eps);
    c.lo.resize(kernel.prob.size());
    c.hi.resize(kernel.prob.size());
    for (std::size_t i = 0; i < kernel.prob.size(); ++i) {
        c.lo[i] = std::clamp(kernel.prob[i] - eps, 0.0, 1.0);
        c.hi[i] = std::clamp(kernel.prob[i] + eps, 0.0, 1.0);
    }
    return c;
}

// A random kernel whose rows lie inside the box of `conf`.
TransitionKernel sample_inside(const LayeredShape& s, const TransitionConfidenceSet& conf, Rng& rng)
{
    TransitionKernel k = conf.p_hat;
    for (StateId x = 0; x + 1 < s.num_states(); ++x)
        for (ActionId a = 0; a < s.num_actions(); ++a) {
            const std::size_t off = s.row_offset(x, a), w = s.row_width(x);
            // Mix p_hat with a random distribution, shrinking until the row fits.
            const auto d = random_distribution(rng, w);
            double t = 1.0;
            for (int it = 0; it < 60; ++it, t *= 0.5) {
                bool ok = true;
                for (std::size_t j = 0; j < w; ++j) {
                    const double v = (1 - t) * conf.p_hat.prob[off + j] + t * d[j];
                    ok = ok && v >= conf.lo[off + j] && v <= conf.hi[off + j];
                }
                if (ok)
                    break;
            }
            for (std::size_t j = 0; j < w; ++j)
                k.prob[off + j] = (1 - t) * conf.p_hat.prob[off + j] + t * d[j];
        }
    return k;
}

Trajectory path(const LayeredShape& s, std::vector<StateId> states, std::vector<ActionId> actions)
{
    Trajectory t;
    t.episode = 1;
    t.states = std::move(states);
    t.actions = std::move(actions);
    t.rewards.assign(t.actions.size(), 0.0);
    (void)s;
    return t;
}

} // namespace

TEST_CASE("initial policy is uniform")
{
    for (std::size_t A : {1u, 2u, 5u}) {
        const LayeredShape s({1, 3, 1}, A);
        const Policy pi = initial_policy(s);
        for (StateId x = 0; x + 1 < s.num_states(); ++x) {
            double sum = 0.0;
            for (ActionId a = 0; a < A; ++a) {
                CHECK(pi(x, a) == doctest::Approx(1.0 / static_cast<double>(A)).epsilon(1e-15));
                sum += pi(x, a);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
        CHECK(policy_entropy(s, pi) == doctest::Approx(std::log(static_cast<double>(A))).epsilon(1e-12));
    }
}

TEST_CASE("scale_loss and the loss range constant")
{
    const double C = loss_scale(2, 1, 0.5);
    CHECK(C == 24.0);
    CHECK(scale_loss(5.7, C) == doctest::Approx(0.2375).epsilon(1e-15));
    CHECK(scale_loss(0.0, C) == 0.0);
    CHECK(scale_loss(C, C) == 1.0);
    CHECK(scale_loss(-3.0, C) == 0.0);
    CHECK(scale_loss(30.0, C) == 1.0);
    CHECK_THROWS_AS(scale_loss(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("default and overridden primal parameters")
{
    const LayeredShape s({1, 2, 3, 2, 1}, 3);
    const PrimalParams d = default_primal_params(s, 1000);
    CHECK(d.eta == doctest::Approx(std::sqrt(3 * std::log(3.0) / (4.0 * 1000))).epsilon(1e-15));
    CHECK(d.gamma == d.eta);
    CHECK(d.beta == 1.0);
    CHECK(d.mode == PrimalMode::full);

    PrimalOverrides ov;
    ov.eta = 0.2;
    PrimalParams p = resolve_primal_params(s, 1000, ov);
    CHECK(p.eta == 0.2);
    CHECK(p.gamma == 0.2);
    ov.gamma = 0.01;
    ov.mode = PrimalMode::known_transition;
    p = resolve_primal_params(s, 1000, ov);
    CHECK(p.gamma == 0.01);
    CHECK(p.mode == PrimalMode::known_transition);
    ov.eta = -1.0;
    CHECK_THROWS_AS(resolve_primal_params(s, 1000, ov), std::invalid_argument);
    CHECK(parse_primal_mode("full") == PrimalMode::full);
    CHECK_THROWS_AS(parse_primal_mode("fast"), std::invalid_argument);
}

TEST_CASE("upper occupancy with zero radius is the empirical occupancy")
{
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const CmdpInstance inst = random_instance(rng, random_layers(rng, 3, 3), 3, 0);
        const Policy pi = random_policy(inst.shape, rng);
        const auto u = upper_occupancy(inst.shape, box_around(inst.transition, 0.0), pi);
        const auto q = occupancy_measure(inst.shape, inst.transition, pi).q;
        for (std::size_t p = 0; p < q.size(); ++p)
            CHECK(std::abs(u[p] - q[p]) <= 1e-12);
    }
}

TEST_CASE("upper occupancy on a single path is the policy probability at x0")
{
    const LayeredShape s({1, 1, 1}, 2);
    TransitionKernel k;
    k.prob.assign(s.kernel_size(), 1.0);
    Policy pi;
    pi.num_actions = 2;
    pi.prob = {0.3, 0.7, 0.6, 0.4};
    const auto u = upper_occupancy(s, box_around(k, 0.5), pi);
    CHECK(u[s.pair(0, 0)] == 0.3);
    CHECK(u[s.pair(0, 1)] == 0.7);
    CHECK(u[s.pair(1, 0)] == 0.6);
}

TEST_CASE("upper occupancy dominates kernels sampled inside the confidence set")
{
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const CmdpInstance inst = random_instance(rng, {1, 2, 3, 1}, 2, 0);
        const Policy pi = random_policy(inst.shape, rng);
        const auto conf = box_around(inst.transition, 0.05);
        const auto u = upper_occupancy(inst.shape, conf, pi);
        for (int k = 0; k < 100; ++k) {
            const TransitionKernel kk = sample_inside(inst.shape, conf, rng);
            const auto q = occupancy_measure(inst.shape, kk, pi).q;
            for (std::size_t p = 0; p < q.size(); ++p)
                CHECK(q[p] <= u[p] + 1e-12);
        }
        const auto q_true = occupancy_measure(inst.shape, inst.transition, pi).q;
        for (std::size_t p = 0; p < q_true.size(); ++p)
            CHECK(q_true[p] <= u[p] + 1e-12);
    }
}

TEST_CASE("upper occupancy equals the maximum over all vertex kernels")
{
    // Rows of width 2: the box meets the simplex in a segment, so each row has two
    // vertices and the occupancy (multilinear in rows) peaks at one of 2^rows kernels.
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const CmdpInstance inst = random_instance(rng, {1, 2, 2, 1}, 2, 0);
        const LayeredShape& s = inst.shape;
        const Policy pi = random_policy(s, rng);
        const auto conf = box_around(inst.transition, 0.1 + 0.2 * rng.uniform());
        const auto u = upper_occupancy(s, conf, pi);
        std::vector<std::size_t> rows;
        for (StateId x = 0; x + 1 < s.num_states(); ++x)
            if (s.row_width(x) == 2)
                for (ActionId a = 0; a < 2; ++a)
                    rows.push_back(s.row_offset(x, a));
        std::vector<double> best(s.num_pairs(), 0.0);
        for (std::size_t mask = 0; mask < (1u << rows.size()); ++mask) {
            TransitionKernel k = inst.transition;
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const std::size_t off = rows[r];
                const double lo0 = std::max(conf.lo[off], 1.0 - conf.hi[off + 1]);
                const double hi0 = std::min(conf.hi[off], 1.0 - conf.lo[off + 1]);
                k.prob[off] = (mask >> r) & 1 ? hi0 : lo0;
                k.prob[off + 1] = 1.0 - k.prob[off];
            }
            const auto q = occupancy_measure(s, k, pi).q;
            for (std::size_t p = 0; p < q.size(); ++p)
                best[p] = std::max(best[p], q[p]);
        }
        for (std::size_t p = 0; p < u.size(); ++p)
            CHECK(std::abs(u[p] - best[p]) <= 1e-12);
    }
}

TEST_CASE("loss estimate: formula, unvisited pairs and the gamma limit")
{
    const LayeredShape s({1, 1}, 2);
    const Trajectory t = path(s, {0, 1}, {0});
    const std::vector<double> u{0.5, 0.5}, loss{0.4};
    const auto q = q_loss_estimate(s, t, loss, u, 0.0);
    CHECK(q[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(q[1] == 0.0);
    const auto q_big = q_loss_estimate(s, t, loss, u, 1e12);
    CHECK(q_big[0] < 1e-12);

    const LayeredShape s3({1, 2, 1, 1}, 2);
    const Trajectory t3 = path(s3, {0, 2, 3, 4}, {1, 0, 1});
    std::vector<double> u3(s3.num_pairs(), 0.25);
    const auto q3 = q_loss_estimate(s3, t3, std::vector<double>{0.1, 0.2, 0.3}, u3, 0.05);
    CHECK(q3[s3.pair(0, 1)] == doctest::Approx(0.6 / 0.3).epsilon(1e-14));
    CHECK(q3[s3.pair(2, 0)] == doctest::Approx(0.5 / 0.3).epsilon(1e-14));
    CHECK(q3[s3.pair(3, 1)] == doctest::Approx(0.3 / 0.3).epsilon(1e-14));
    CHECK(q3[s3.pair(1, 0)] == 0.0);
}

TEST_CASE("loss estimate is unbiased with exact occupancies and no exploration")
{
    Rng gen(5);
    const CmdpInstance inst = random_instance(gen, {1, 2, 2, 1}, 2, 0);
    const LayeredShape& s = inst.shape;
    const Policy pi = random_policy(s, gen);
    std::vector<double> loss(s.num_pairs());
    for (auto& l : loss)
        l = gen.uniform();
    const auto occ = occupancy_measure(s, inst.transition, pi).q;
    // True loss-to-go Q(x,a) = l(x,a) + E[V(x')].
    const StateValues V = value_function(s, inst.transition, pi, loss);
    std::vector<double> Q(s.num_pairs());
    for (PairId p = 0; p < s.num_pairs(); ++p) {
        const StateId x = s.pair_state(p);
        Q[p] = loss[p];
        const auto row = inst.transition.row(s, x, s.pair_action(p));
        for (std::size_t j = 0; j < row.size(); ++j)
            Q[p] += row[j] * V.per_state[s.first_successor(x) + j];
    }
    const int n = 100000;
    std::vector<double> sum(s.num_pairs(), 0.0), sq(s.num_pairs(), 0.0);
    Rng rng(99);
    Trajectory traj;
    std::vector<double> step_loss(s.horizon()), q_hat(s.num_pairs());
    for (int e = 0; e < n; ++e) {
        simulate_episode(inst, pi, rng, traj);
        for (std::size_t k = 0; k < traj.length(); ++k)
            step_loss[k] = loss[traj.pair(s, k)];
        q_loss_estimate(s, traj, step_loss, occ, 0.0, q_hat);
        for (PairId p = 0; p < s.num_pairs(); ++p) {
            sum[p] += q_hat[p];
            sq[p] += q_hat[p] * q_hat[p];
        }
    }
    for (PairId p = 0; p < s.num_pairs(); ++p) {
        const double mean = sum[p] / n;
        const double se = std::sqrt(std::max(sq[p] / n - mean * mean, 0.0) / n);
        CHECK(std::abs(mean - Q[p]) <= 3.0 * se);
    }
}

TEST_CASE("dilated bonus: zero cases and the one-step example")
{
    Rng rng(1);
    const CmdpInstance inst = random_instance(rng, {1, 2, 2, 1}, 2, 0);
    const Policy pi = random_policy(inst.shape, rng);
    const auto conf = box_around(inst.transition, 0.2);
    const auto u = upper_occupancy(inst.shape, conf, pi);
    for (double v : dilated_bonus(inst.shape, conf, pi, u, 0.1, 0.0))
        CHECK(v == 0.0);
    for (double v : dilated_bonus(inst.shape, conf, pi, u, 0.0, 1.0))
        CHECK(v == 0.0);
    for (double v : dilated_bonus(inst.shape, conf, pi, u, 0.1, 1.0))
        CHECK(v >= 0.0);

    const LayeredShape one({1, 1}, 1);
    TransitionKernel k;
    k.prob = {1.0};
    const std::vector<double> u1{0.5};
    const auto B = dilated_bonus(one, box_around(k, 0.0), Policy::uniform(one), u1, 0.1, 1.0);
    CHECK(B[0] == doctest::Approx(0.1 / 0.6).epsilon(1e-14));
}

TEST_CASE("dilated bonus follows the backward recursion")
{
    Rng rng(2);
    const CmdpInstance inst = random_instance(rng, {1, 3, 2, 1}, 2, 0);
    const LayeredShape& s = inst.shape;
    const Policy pi = random_policy(s, rng);
    const auto conf = box_around(inst.transition, 0.15);
    const auto u = upper_occupancy(s, conf, pi);
    const double gamma = 0.05, beta = 0.7, L = 3.0;
    const auto B = dilated_bonus(s, conf, pi, u, gamma, beta);
    std::vector<double> Bx(s.num_states(), 0.0);
    for (StateId x = s.num_states() - 1; x-- > 0;) {
        double b = 0.0;
        for (ActionId a = 0; a < 2; ++a)
            b += beta * pi(x, a) * gamma * L / (u[s.pair(x, a)] + gamma);
        for (ActionId a = 0; a < 2; ++a) {
            const std::size_t off = s.row_offset(x, a), w = s.row_width(x);
            std::vector<double> lo(conf.lo.begin() + off, conf.lo.begin() + off + w),
                hi(conf.hi.begin() + off, conf.hi.begin() + off + w),
                v(Bx.begin() + s.first_successor(x), Bx.begin() + s.first_successor(x) + w);
            // Best row value by vertex enumeration over the box-simplex intersection.
            double best = -1e300;
            for (std::size_t f = 0; f < w; ++f)
                for (std::size_t mask = 0; mask < (1u << w); ++mask) {
                    if (mask & (1u << f))
                        continue;
                    double sum = 0.0, val = 0.0;
                    for (std::size_t i = 0; i < w; ++i)
                        if (i != f) {
                            const double p = (mask >> i) & 1 ? hi[i] : lo[i];
                            sum += p;
                            val += p * v[i];
                        }
                    const double pf = 1.0 - sum;
                    if (pf >= lo[f] - 1e-12 && pf <= hi[f] + 1e-12)
                        best = std::max(best, val + pf * v[f]);
                }
            const double expect = b + (1.0 + 1.0 / L) * best;
            CHECK(B[s.pair(x, a)] == doctest::Approx(expect).epsilon(1e-12));
            Bx[x] += pi(x, a) * expect;
        }
    }
}

TEST_CASE("policy update: no-op, closed form and shift invariance")
{
    const LayeredShape s({1, 1}, 2);
    const Policy pi = Policy::uniform(s);
    const std::vector<double> zero(2, 0.0);
    CHECK(policy_update(s, pi, zero, zero, 0.7).prob == pi.prob);

    const Policy next = policy_update(s, pi, std::vector<double>{1.0, 0.0}, zero, 1.0);
    CHECK(next(0, 0) == doctest::Approx(std::exp(-1.0) / (std::exp(-1.0) + 1)).epsilon(1e-14));
    CHECK(next(0, 1) == doctest::Approx(1 / (std::exp(-1.0) + 1)).epsilon(1e-14));
    CHECK(next(0, 0) == doctest::Approx(0.2689).epsilon(1e-4));

    Rng rng(8);
    const CmdpInstance inst = random_instance(rng, {1, 3, 2, 1}, 4, 0);
    const Policy p0 = random_policy(inst.shape, rng);
    std::vector<double> q(inst.shape.num_pairs()), b(q.size()), q_shift(q.size());
    for (std::size_t p = 0; p < q.size(); ++p) {
        q[p] = rng.uniform() * 50;
        b[p] = rng.uniform();
    }
    for (StateId x = 0; x + 1 < inst.shape.num_states(); ++x) {
        const double c = rng.uniform() * 1000 - 500;
        for (ActionId a = 0; a < 4; ++a)
            q_shift[inst.shape.pair(x, a)] = q[inst.shape.pair(x, a)] + c;
    }
    const Policy p1 = policy_update(inst.shape, p0, q, b, 0.3);
    const Policy p2 = policy_update(inst.shape, p0, q_shift, b, 0.3);
    check_policy(inst.shape, p1);
    for (std::size_t p = 0; p < q.size(); ++p)
        CHECK(std::abs(p1.prob[p] - p2.prob[p]) <= 1e-12);

    // Huge exponents stay finite.
    const Policy p3 = policy_update(s, pi, std::vector<double>{1e6, -1e6}, zero, 10.0);
    check_policy(s, p3);
    CHECK(p3(0, 1) == 1.0);
}

TEST_CASE("policy update in log space agrees with the direct update")
{
    Rng rng(10);
    const CmdpInstance inst = random_instance(rng, {1, 2, 2, 1}, 3, 0);
    const LayeredShape& s = inst.shape;
    Policy pi = Policy::uniform(s), direct = pi;
    std::vector<double> logw(s.num_pairs(), 0.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> q(s.num_pairs()), b(s.num_pairs());
        for (std::size_t p = 0; p < q.size(); ++p) {
            q[p] = rng.uniform() * 3;
            b[p] = rng.uniform() * 0.5;
        }
        direct = policy_update(s, direct, q, b, 0.4);
        policy_update_log(s, logw, q, b, 0.4, pi);
        for (std::size_t p = 0; p < q.size(); ++p)
            CHECK(std::abs(pi.prob[p] - direct.prob[p]) <= 1e-12);
    }
}

TEST_CASE("learners emit valid policies and move toward lower losses")
{
    Rng gen(4);
    CmdpInstance inst = random_instance(gen, {1, 2, 1}, 2, 1, NoiseKind::degenerate);
    const LayeredShape& s = inst.shape;
    for (int mode = 0; mode < 2; ++mode) {
        PrimalParams params = default_primal_params(s, 2000);
        params.eta = 0.05;
        params.gamma = 0.001;
        params.mode = mode ? PrimalMode::known_transition : PrimalMode::full;
        auto learner = make_primal_learner(inst, params);
        EstimatorState est(s, 1, 2000, 0.1);
        Rng rng(1);
        Trajectory traj;
        std::vector<double> losses(s.horizon());
        for (std::uint64_t t = 1; t <= 2000; ++t) {
            simulate_episode(inst, learner->policy(), rng, traj);
            traj.episode = t;
            est.ingest(traj);
            // Action 1 is always cheaper.
            for (std::size_t k = 0; k < traj.length(); ++k)
                losses[k] = traj.actions[k] == 1 ? 0.1 : 0.9;
            learner->update(traj, losses, est);
            check_policy(s, learner->policy());
        }
        CHECK(learner->policy()(0, 1) > 0.9);
    }
}

#include "cpdpo/dual.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace cpdpo {

void check_run_config(const RunConfig& cfg, const CmdpInstance& inst)
{
    const double L = static_cast<double>(inst.horizon());
    if (cfg.episodes == 0)
        throw std::invalid_argument("run config: T must be at least 1");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
        throw std::invalid_argument("run config: delta must lie in (0,1)");
    if (!(cfg.rho > 0.0 && cfg.rho <= L))
        throw std::invalid_argument("run config: rho must lie in (0, L]");
    if (inst.num_constraints() == 0)
        throw std::invalid_argument("run config: the instance has no constraints");
    if (cfg.metric_every == 0)
        throw std::invalid_argument("run config: metric cadence must be at least 1");
    if (cfg.dual_rule == DualRule::gradient && !std::isfinite(cfg.dual_step))
        throw std::invalid_argument("run config: dual step must be finite");
    if (cfg.primal)
        check_primal_params(*cfg.primal);
    if (!cfg.dump_at.empty() && cfg.dump_dir.empty())
        throw std::invalid_argument("run config: estimator dumps need a directory");
}

double dual_multiplier(double estimate, double alpha, double rho, std::size_t horizon)
{
    if (!(rho > 0.0))
        throw std::invalid_argument("dual update: rho must be positive");
    return estimate - alpha > 0.0 ? (static_cast<double>(horizon) + 1.0) / rho : 0.0;
}

LagrangeVector dual_update(const LayeredShape& shape, const TransitionKernel& p_hat, const Policy& pi,
                           const std::vector<std::vector<double>>& g_under, std::span<const double> alpha,
                           double rho)
{
    if (g_under.size() != alpha.size())
        throw std::invalid_argument("dual update: constraint count mismatch");
    LagrangeVector lambda(alpha.size());
    std::vector<double> values(shape.num_states());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        value_function(shape, p_hat, pi, g_under[i], values);
        lambda[i] = dual_multiplier(values[shape.initial_state()], alpha[i], rho, shape.horizon());
    }
    return lambda;
}

double lagrangian_loss(double r_bar, std::span<const double> g_under, std::span<const double> lambda,
                       std::span<const double> alpha, std::size_t horizon, double rho)
{
    const double L = static_cast<double>(horizon);
    const double m = static_cast<double>(alpha.size());
    double penalty = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
        penalty += lambda[i] * (g_under[i] - alpha[i] / L);
    return (L + 1.0) * m / rho - (r_bar - penalty);
}

std::vector<double> lagrangian_losses(const LayeredShape& shape, const Trajectory& traj, const ConfidenceVectors& conf,
                                      std::span<const double> lambda, std::span<const double> alpha, double rho)
{
    std::vector<double> losses(traj.length());
    std::vector<double> g(alpha.size());
    for (std::size_t k = 0; k < traj.length(); ++k) {
        const PairId p = traj.pair(shape, k);
        for (std::size_t i = 0; i < alpha.size(); ++i)
            g[i] = conf.g_under[i][p];
        losses[k] = lagrangian_loss(conf.r_bar[p], g, lambda, alpha, shape.horizon(), rho);
    }
    return losses;
}

double loss_scale(std::size_t horizon, std::size_t num_constraints, double rho)
{
    const double L = static_cast<double>(horizon);
    return 2.0 * L * (L + 1.0) * static_cast<double>(num_constraints) / rho;
}

StrongMetrics strong_metrics(std::span<const double> v_r, std::span<const double> v_g, double opt,
                             std::span<const double> alpha)
{
    const std::size_t m = alpha.size();
    if (v_g.size() != v_r.size() * m)
        throw std::invalid_argument("strong metrics: value arrays disagree");
    StrongMetrics out;
    std::vector<double> excess(m, 0.0);
    for (std::size_t t = 0; t < v_r.size(); ++t) {
        out.regret += std::max(0.0, opt - v_r[t]);
        for (std::size_t i = 0; i < m; ++i)
            excess[i] += std::max(0.0, v_g[t * m + i] - alpha[i]);
    }
    for (double e : excess)
        out.violation = std::max(out.violation, e);
    return out;
}

namespace {

void tally_coverage(const CmdpInstance& inst, const EstimatorState& est, const ConfidenceVectors& conf,
                    const TransitionKernel& p_hat, CoverageTally& tally)
{
    const LayeredShape& shape = inst.shape;
    const std::size_t m = inst.num_constraints();
    for (PairId p = 0; p < shape.num_pairs(); ++p) {
        ++tally.reward_events;
        if (std::abs(conf.r_hat[p] - inst.reward_mean[p]) > conf.phi[p])
            ++tally.reward_violations;
        for (std::size_t i = 0; i < m; ++i) {
            ++tally.cost_events;
            if (std::abs(conf.g_hat[i][p] - inst.cost_means[i][p]) > conf.xi[p])
                ++tally.cost_violations;
        }
        const std::size_t off = shape.row_offset(p);
        for (std::size_t j = 0; j < shape.row_width(shape.pair_state(p)); ++j) {
            ++tally.transition_events;
            if (std::abs(p_hat.prob[off + j] - inst.transition.prob[off + j]) > est.transition_radius(p, j))
                ++tally.transition_violations;
        }
    }
}

} // namespace

RunRecord run_primal_dual(const CmdpInstance& inst, const RunConfig& cfg, const MetricReference& ref)
{
    check_run_config(cfg, inst);
    const auto started = std::chrono::steady_clock::now();
    const LayeredShape& shape = inst.shape;
    const std::size_t L = shape.horizon();
    const std::size_t m = inst.num_constraints();
    const std::uint64_t T = cfg.episodes;
    const std::span<const double> alpha = inst.thresholds;
    if (cfg.audit && ref.opt_costs.size() != m)
        throw std::invalid_argument("auditing needs the cost values of the optimal policy");

    const PrimalParams primal = cfg.primal.value_or(default_primal_params(shape, T));
    auto learner = make_primal_learner(inst, primal);
    EstimatorState est(shape, m, T, cfg.delta);
    Rng rng(cfg.seed);

    const double lambda_max = (static_cast<double>(L) + 1.0) / cfg.rho;
    const double C = loss_scale(L, m, cfg.rho);
    const double dual_step = cfg.dual_step < 0.0 ? 1.0 / std::sqrt(static_cast<double>(T)) : cfg.dual_step;

    RunRecord rec;
    rec.num_constraints = m;
    const std::size_t rows = static_cast<std::size_t>(T / cfg.metric_every + 1);
    rec.t.reserve(rows);
    rec.v_r.reserve(rows);
    rec.v_g.reserve(rows * m);
    rec.lambda.reserve(rows * m);
    rec.regret.reserve(rows);
    rec.violation.reserve(rows);

    RunSummary& sum = rec.summary;
    sum.algorithm = cfg.dual_rule == DualRule::two_point ? "cpdpo" : "weak_pd";
    sum.seed = cfg.seed;
    sum.episodes = T;
    sum.delta = cfg.delta;
    sum.rho = cfg.rho;
    sum.opt = ref.opt;
    sum.primal = primal;
    sum.dual_step = cfg.dual_rule == DualRule::gradient ? dual_step : 0.0;
    sum.loss_scale = C;
    sum.metric_every = cfg.metric_every;
    sum.approximate = cfg.metric_every > 1;
    sum.audited = cfg.audit;

    std::vector<std::uint64_t> dump_at = cfg.dump_at;
    std::sort(dump_at.begin(), dump_at.end());
    if (!dump_at.empty())
        std::filesystem::create_directories(cfg.dump_dir);

    Trajectory traj;
    ConfidenceVectors conf;
    TransitionKernel p_hat;
    std::vector<double> values(shape.num_states());
    std::vector<double> lambda(m, 0.0), v_g(m), g_at(m), excess(m, 0.0), weak_excess(m, 0.0);
    std::vector<double> raw(L), scaled(L);
    std::vector<double> q_true(shape.num_pairs()), q_est(shape.num_pairs()), mass(shape.num_states());
    double regret = 0.0, weak_regret = 0.0;
    std::uint64_t last_eval = 0;

    for (std::uint64_t t = 1; t <= T; ++t) {
        const Policy& pi = learner->policy();
        const bool evaluate = t % cfg.metric_every == 0 || t == T;
        double v_r = 0.0;
        if (evaluate || cfg.audit) {
            value_function(shape, inst.transition, pi, inst.reward_mean, values);
            v_r = values[0];
            for (std::size_t i = 0; i < m; ++i) {
                value_function(shape, inst.transition, pi, inst.cost_means[i], values);
                v_g[i] = values[0];
            }
        }
        if (evaluate) {
            const double weight = static_cast<double>(t - last_eval);
            last_eval = t;
            regret += weight * std::max(0.0, ref.opt - v_r);
            weak_regret += weight * (ref.opt - v_r);
            for (std::size_t i = 0; i < m; ++i) {
                excess[i] += weight * std::max(0.0, v_g[i] - alpha[i]);
                weak_excess[i] += weight * (v_g[i] - alpha[i]);
            }
        }
        if (cfg.entropy_log)
            *cfg.entropy_log << t << ' ' << policy_entropy(shape, pi) << '\n';

        simulate_episode(inst, pi, rng, traj);
        traj.episode = t;
        est.ingest(traj);
        est.confidence_vectors(conf);
        est.empirical_kernel(p_hat);

        for (std::size_t i = 0; i < m; ++i) {
            value_function(shape, p_hat, pi, conf.g_under[i], values);
            const double estimate = values[0];
            if (cfg.dual_rule == DualRule::two_point)
                lambda[i] = dual_multiplier(estimate, alpha[i], cfg.rho, L);
            else
                lambda[i] = std::clamp(lambda[i] + dual_step * (estimate - alpha[i]), 0.0, lambda_max);
        }

        if (cfg.audit) {
            tally_coverage(inst, est, conf, p_hat, sum.coverage);
            double lag_star = ref.opt, lag_t = v_r, lag_t_cor = v_r;
            const double shrink = static_cast<double>(L) / (static_cast<double>(L) + 1.0);
            for (std::size_t i = 0; i < m; ++i) {
                lag_star -= lambda[i] * (ref.opt_costs[i] - alpha[i]);
                lag_t -= lambda[i] * (v_g[i] - alpha[i]);
                lag_t_cor -= shrink * lambda[i] * (v_g[i] - alpha[i]);
            }
            value_function(shape, inst.transition, pi, conf.xi, values);
            const double v_xi = values[0];
            occupancy_measure(shape, inst.transition, pi, q_true, mass);
            occupancy_measure(shape, p_hat, pi, q_est, mass);
            double gap = 0.0;
            for (std::size_t p = 0; p < q_true.size(); ++p)
                gap += std::abs(q_est[p] - q_true[p]);
            const double Lm_rho = static_cast<double>(L * m) / cfg.rho;
            ++sum.coverage.lagrangian_checks;
            if (lag_star < lag_t - 4.0 * Lm_rho * v_xi - 8.0 * Lm_rho * gap - 1e-9)
                ++sum.coverage.lagrangian_violations;
            if (lag_star < lag_t_cor - 2.0 * Lm_rho * v_xi - 4.0 * Lm_rho * gap - 1e-9)
                ++sum.coverage.lagrangian_cor_violations;
        }

        for (std::size_t k = 0; k < L; ++k) {
            const PairId p = traj.pair(shape, k);
            for (std::size_t i = 0; i < m; ++i)
                g_at[i] = conf.g_under[i][p];
            raw[k] = lagrangian_loss(conf.r_bar[p], g_at, lambda, alpha, L, cfg.rho);
            if (raw[k] < 0.0 || raw[k] > C)
                ++sum.clamped_losses;
            scaled[k] = std::clamp(raw[k] / C, 0.0, 1.0);
        }
        sum.losses += L;

        if (evaluate) {
            rec.t.push_back(t);
            rec.v_r.push_back(v_r);
            double violation = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                rec.v_g.push_back(v_g[i]);
                rec.lambda.push_back(lambda[i]);
                violation = std::max(violation, excess[i]);
            }
            rec.regret.push_back(regret);
            rec.violation.push_back(violation);
        }

        learner->update(traj, scaled, est);

        if (std::binary_search(dump_at.begin(), dump_at.end(), t)) {
            const auto path = std::filesystem::path(cfg.dump_dir) / ("estimator_" + std::to_string(t) + ".txt");
            std::ofstream out(path);
            if (!out)
                throw std::runtime_error("cannot write estimator dump '" + path.string() + "'");
            write_estimator_dump(est, out);
        }
    }

    sum.final_regret = regret;
    sum.final_violation = rec.violation.empty() ? 0.0 : rec.violation.back();
    sum.weak_regret = weak_regret;
    sum.weak_violation = *std::max_element(weak_excess.begin(), weak_excess.end());
    sum.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

RunRecord run_cpdpo(const CmdpInstance& inst, RunConfig cfg, const MetricReference& ref)
{
    cfg.dual_rule = DualRule::two_point;
    return run_primal_dual(inst, cfg, ref);
}

} // namespace cpdpo

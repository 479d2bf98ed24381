#pragma once

#include "cpdpo/cmdp.hpp"
#include "cpdpo/estimation.hpp"
#include "cpdpo/primal.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpdpo {

using LagrangeVector = std::vector<double>;

/// How the multipliers are chosen each episode.
enum class DualRule {
    two_point, // argmax over {0, (L+1)/rho}
    gradient,  // projected gradient step with rate dual_step
};

struct RunConfig {
    std::uint64_t episodes = 1;
    double delta = 0.1;
    double rho = 0.0;
    std::uint64_t seed = 0;
    std::optional<PrimalParams> primal; // defaults from default_primal_params
    DualRule dual_rule = DualRule::two_point;
    double dual_step = -1.0;            // gradient rule; negative means 1/sqrt(T)
    std::uint64_t metric_every = 1;     // > 1 thins the record and flags it approximate
    bool audit = false;                 // confidence coverage and Lagrangian gap checks
    std::vector<std::uint64_t> dump_at; // episodes after which the estimator is dumped
    std::string dump_dir;
    std::ostream* entropy_log = nullptr; // "t entropy" per episode
};

void check_run_config(const RunConfig& cfg, const CmdpInstance& inst);

/// Ground truth the metrics are measured against.
struct MetricReference {
    double opt = 0.0;
    std::vector<double> opt_costs; // V^{pi*}(g_i), needed only when auditing
};

/// Per-run tallies of confidence events (event = one (t, x, a) or (t, x, a, x') check).
struct CoverageTally {
    std::uint64_t reward_events = 0, reward_violations = 0;
    std::uint64_t cost_events = 0, cost_violations = 0;
    std::uint64_t transition_events = 0, transition_violations = 0;
    std::uint64_t lagrangian_checks = 0, lagrangian_violations = 0;
    std::uint64_t lagrangian_cor_violations = 0;
};

struct RunSummary {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::uint64_t episodes = 0;
    double delta = 0.0;
    double rho = 0.0;
    double opt = 0.0;
    PrimalParams primal;
    double dual_step = 0.0;
    double loss_scale = 0.0;
    std::uint64_t metric_every = 1;
    bool approximate = false;
    double final_regret = 0.0;
    double final_violation = 0.0;
    double weak_regret = 0.0;
    double weak_violation = 0.0;
    std::uint64_t losses = 0;
    std::uint64_t clamped_losses = 0;
    double wall_seconds = 0.0;
    bool audited = false;
    CoverageTally coverage;
};

/// Metric stream; one row per evaluated episode. Per-constraint columns are row-major.
struct RunRecord {
    std::size_t num_constraints = 0;
    std::vector<std::uint64_t> t;
    std::vector<double> v_r;
    std::vector<double> v_g;
    std::vector<double> lambda;
    std::vector<double> regret;
    std::vector<double> violation;
    RunSummary summary;

    std::size_t rows() const { return t.size(); }
    double value_g(std::size_t row, std::size_t i) const { return v_g[row * num_constraints + i]; }
    double lambda_at(std::size_t row, std::size_t i) const { return lambda[row * num_constraints + i]; }
};

/// (L+1)/rho when estimate - alpha > 0, else 0.
double dual_multiplier(double estimate, double alpha, double rho, std::size_t horizon);

/// Multipliers from the optimistic constraint values V^{pi, P_hat}(g_under_i).
LagrangeVector dual_update(const LayeredShape& shape, const TransitionKernel& p_hat, const Policy& pi,
                           const std::vector<std::vector<double>>& g_under, std::span<const double> alpha,
                           double rho);

/// (L+1)m/rho - [r_bar - sum_i lambda_i (g_under_i - alpha_i / L)] for one pair.
double lagrangian_loss(double r_bar, std::span<const double> g_under, std::span<const double> lambda,
                       std::span<const double> alpha, std::size_t horizon, double rho);

/// Raw losses along the visited pairs of a trajectory.
std::vector<double> lagrangian_losses(const LayeredShape& shape, const Trajectory& traj, const ConfidenceVectors& conf,
                                      std::span<const double> lambda, std::span<const double> alpha, double rho);

/// 2L(L+1)m/rho.
double loss_scale(std::size_t horizon, std::size_t num_constraints, double rho);

struct StrongMetrics {
    double regret = 0.0;
    double violation = 0.0;
};

/// R = sum_t [OPT - V_r(t)]^+, V = max_i sum_t [V_g(t, i) - alpha_i]^+; v_g is row-major.
StrongMetrics strong_metrics(std::span<const double> v_r, std::span<const double> v_g, double opt,
                             std::span<const double> alpha);

/// The primal-dual loop: simulate, ingest, dual update, loss, primal update.
RunRecord run_primal_dual(const CmdpInstance& inst, const RunConfig& cfg, const MetricReference& ref);

/// run_primal_dual with the two-point dual rule.
RunRecord run_cpdpo(const CmdpInstance& inst, RunConfig cfg, const MetricReference& ref);

} // namespace cpdpo

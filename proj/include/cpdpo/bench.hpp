#pragma once

#include "cpdpo/cmdp.hpp"
#include "cpdpo/dual.hpp"
#include "cpdpo/oracle.hpp"
#include "cpdpo/primal.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpdpo {

// ---------------------------------------------------------------- generation

struct GeneratorParams {
    std::vector<std::size_t> layer_sizes{1, 2, 3, 2, 1};
    std::size_t num_actions = 3;
    std::size_t num_constraints = 2;
    double rho_floor = 0.15;
    double margin_spread = 0.2;     // margins drawn from [rho_floor, rho_floor + spread]
    double cost_reward_link = 0.5;  // weight of the reward mean inside each cost mean
    bool require_binding = false;   // reward-greedy policy must violate constraint 0
    NoiseKind noise = NoiseKind::bernoulli;
    std::size_t max_retries = 500;
};

struct GeneratedInstance {
    CmdpInstance instance;
    OracleResult oracle;
    std::size_t attempts = 0;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Random layered instance with thresholds alpha_i = V^{uniform}(g_i) + margin_i, so
/// that the oracle rho is at least rho_floor. Deterministic in the seed.
GeneratedInstance generate_instance(const GeneratorParams& params, std::uint64_t seed);

// ---------------------------------------------------------------- runs

/// Same loop as run_cpdpo with the projected-gradient dual rule.
RunRecord run_weak_baseline(const CmdpInstance& inst, RunConfig cfg, const MetricReference& ref);

/// Oblivious adversarial loss sequence over pairs, values in [0, 1].
class AdversarialSchedule {
public:
    AdversarialSchedule(const LayeredShape& shape, std::uint64_t seed);
    /// Losses of episode t (1-based), one per pair.
    void losses(std::uint64_t t, std::span<double> out) const;
    std::size_t num_pairs() const { return base_.size(); }

private:
    std::vector<double> base_, swing_;
};

struct PrimalOnlyConfig {
    std::uint64_t episodes = 1;
    std::uint64_t seed = 0;
    std::uint64_t schedule_seed = 7;
    double delta = 0.1;
    std::optional<PrimalParams> primal;
    std::vector<std::uint64_t> checkpoints; // regret is recorded after these episodes
};

struct PrimalOnlyResult {
    std::vector<std::uint64_t> checkpoints;
    std::vector<double> regret;  // against the best fixed deterministic policy up to the checkpoint
    double final_regret = 0.0;
    double best_fixed_loss = 0.0;
    PrimalParams primal;
};

/// Feeds the primal learner the schedule's losses along its own trajectories
/// (bandit feedback, loss scale 1) and measures expected regret against the best
/// deterministic policy found by enumeration.
PrimalOnlyResult run_primal_only(const CmdpInstance& inst, const PrimalOnlyConfig& cfg);

/// All deterministic policies of a shape (|A|^(|X|-1) of them); throws when more than `limit`.
std::vector<Policy> enumerate_deterministic_policies(const LayeredShape& shape, std::size_t limit = 1u << 20);

// ---------------------------------------------------------------- analysis

/// {T/64, T/32, ..., T}; requires T >= 64.
std::vector<std::uint64_t> checkpoint_grid(std::uint64_t T);

enum class SlopeKind { fitted, zero_metric, undefined };

struct SlopeFit {
    SlopeKind kind = SlopeKind::undefined;
    double slope = 0.0;
};

/// Least-squares slope of log(values) against log(ts) over the upper half of the
/// points (index >= n/2). All-zero upper half is a zero metric; a zero inside an
/// otherwise positive upper half leaves the slope undefined.
SlopeFit loglog_slope(std::span<const std::uint64_t> ts, std::span<const double> values);

struct SeedSummary {
    std::string algorithm;
    std::uint64_t seed = 0;
    double final_regret = 0.0;
    double final_violation = 0.0;
    std::vector<double> regret_at, violation_at; // at the checkpoints
    SlopeFit regret_slope, violation_slope;
};

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

MeanSd mean_sd(std::span<const double> values);

struct SweepSummary {
    std::vector<std::uint64_t> checkpoints;
    std::vector<SeedSummary> seeds;
    MeanSd regret_slope, violation_slope; // over fitted seeds
    std::size_t regret_zero = 0, violation_zero = 0;
    std::size_t regret_undefined = 0, violation_undefined = 0;
    std::vector<double> mean_regret_at, mean_violation_at;
};

/// Requires every record to contain rows at all checkpoints of checkpoint_grid(T).
SweepSummary analyze_sublinearity(const std::vector<RunRecord>& records, std::uint64_t T);

/// Metric value at episode t (exact row lookup).
double record_value_at(const RunRecord& rec, std::uint64_t t, bool violation);

// ---------------------------------------------------------------- audit

struct CoverageReport {
    std::size_t runs = 0;
    double delta = 0.0;
    // Fraction of runs with at least one violated event.
    double reward_run_rate = 0.0, cost_run_rate = 0.0, transition_run_rate = 0.0;
    // Fraction of violated events among all checked events.
    double reward_event_rate = 0.0, cost_event_rate = 0.0, transition_event_rate = 0.0;
    double lagrangian_run_rate = 0.0, lagrangian_cor_run_rate = 0.0;
    // Checks of estimator dumps against the instance (0 when no dumps were found).
    std::size_t dumps = 0;
    std::uint64_t dump_events = 0, dump_violations = 0;
    bool reward_ok = false, cost_ok = false, transition_ok = false;
};

CoverageReport audit_confidence(const std::vector<RunSummary>& summaries);

/// Violations of |p_hat - P| <= eps, |r_hat - r| <= phi, |g_hat - g| <= xi in one dump.
void audit_dump(const CmdpInstance& inst, const EstimatorDump& dump, std::uint64_t& events,
                std::uint64_t& violations);

/// Reads every *.summary file and every estimator dump under `dir` (the instance is
/// expected at dir/instance).
CoverageReport audit_directory(const std::string& dir);

// ---------------------------------------------------------------- sweeps

struct ExperimentSpec {
    std::string instance_path;              // empty means generate
    GeneratorParams generator;
    std::uint64_t generator_seed = 1;
    std::vector<std::string> algorithms{"cpdpo"};
    std::vector<std::uint64_t> seeds{1};
    std::uint64_t episodes = 1000;
    double delta = 0.1;
    std::optional<double> rho;              // default: oracle rho
    PrimalOverrides primal;
    double dual_step = -1.0;
    std::uint64_t metric_every = 1;
    bool audit = false;
    std::uint64_t dump_every = 0;           // 0: no estimator dumps
    std::size_t threads = 1;
    std::string out_dir;
};

/// Parses the key-value sweep format (see README). Throws ParseError.
ExperimentSpec parse_experiment_spec(std::istream& in);
ExperimentSpec load_experiment_spec(const std::string& path);
void write_experiment_spec(const ExperimentSpec& spec, std::ostream& out);

struct SweepResult {
    CmdpInstance instance;
    OracleResult oracle;
    std::vector<std::string> algorithms;             // per run
    std::vector<RunRecord> records;                  // per run, algorithm-major
    std::vector<SweepSummary> per_algorithm;         // one per spec algorithm (empty for primal_only)
    std::vector<PrimalOnlyResult> primal_only;       // primal_only runs
};

/// Runs every (algorithm, seed) pair on `spec.threads` worker threads and writes the
/// experiment directory when spec.out_dir is set.
SweepResult run_sweep(const ExperimentSpec& spec);

/// Writes <algo>_seed<s>.csv and <algo>_seed<s>.summary into `dir`.
void write_run_files(const RunRecord& rec, const std::string& dir);

} // namespace cpdpo

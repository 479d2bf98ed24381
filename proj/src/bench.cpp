#include "cpdpo/bench.hpp"

#include "cpdpo/instance_io.hpp"
#include "cpdpo/run_io.hpp"
#include "cpdpo/text_format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cpdpo {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- generation

GeneratedInstance generate_instance(const GeneratorParams& params, std::uint64_t seed)
{
    if (params.num_constraints == 0)
        throw std::invalid_argument("generator: at least one constraint is required");
    if (!(params.rho_floor >= 0.0) || !(params.margin_spread >= 0.0))
        throw std::invalid_argument("generator: rho floor and margin spread must be nonnegative");
    if (!(params.cost_reward_link >= 0.0 && params.cost_reward_link <= 1.0))
        throw std::invalid_argument("generator: cost/reward link must lie in [0,1]");

    const LayeredShape shape(params.layer_sizes, params.num_actions);
    const std::size_t P = shape.num_pairs();
    const std::size_t m = params.num_constraints;
    const double L = static_cast<double>(shape.horizon());
    Rng rng(seed);
    const Policy uniform = Policy::uniform(shape);

    for (std::size_t attempt = 1; attempt <= params.max_retries; ++attempt) {
        CmdpInstance inst;
        inst.shape = shape;
        inst.transition.prob.assign(shape.kernel_size(), 0.0);
        for (PairId p = 0; p < P; ++p) {
            auto row = inst.transition.row(shape, shape.pair_state(p), shape.pair_action(p));
            double total = 0.0;
            for (auto& w : row) {
                w = -std::log1p(-rng.uniform());
                total += w;
            }
            if (!(total > 0.0)) {
                std::fill(row.begin(), row.end(), 0.0);
                row[0] = total = 1.0;
            }
            for (auto& w : row)
                w /= total;
        }
        inst.reward_mean.resize(P);
        for (auto& r : inst.reward_mean)
            r = rng.uniform();
        inst.cost_means.assign(m, std::vector<double>(P));
        for (auto& g : inst.cost_means)
            for (PairId p = 0; p < P; ++p)
                g[p] = std::clamp(params.cost_reward_link * inst.reward_mean[p] +
                                      (1.0 - params.cost_reward_link) * rng.uniform(),
                                  0.0, 1.0);
        inst.reward_noise.assign(P, params.noise);
        inst.cost_noise.assign(P, params.noise);

        inst.thresholds.resize(m);
        bool in_range = true;
        for (std::size_t i = 0; i < m; ++i) {
            const double base = value_function(shape, inst.transition, uniform, inst.cost_means[i]).initial();
            inst.thresholds[i] = base + params.rho_floor + params.margin_spread * rng.uniform();
            in_range = in_range && inst.thresholds[i] <= L;
        }
        if (!in_range)
            continue;
        if (params.require_binding) {
            const GreedyResult greedy = greedy_value(shape, inst.transition, inst.reward_mean);
            const double cost = value_function(shape, inst.transition, greedy.pi, inst.cost_means[0]).initial();
            if (!(cost > inst.thresholds[0] + 1e-6))
                continue;
        }
        check_instance(inst);
        GeneratedInstance out;
        out.oracle = solve_oracle(inst);
        if (out.oracle.rho < params.rho_floor - 1e-9)
            continue;
        out.instance = std::move(inst);
        out.attempts = attempt;
        return out;
    }
    throw GenerationError("generator: no instance met the requirements within " +
                          std::to_string(params.max_retries) + " attempts");
}

// ---------------------------------------------------------------- runs

RunRecord run_weak_baseline(const CmdpInstance& inst, RunConfig cfg, const MetricReference& ref)
{
    cfg.dual_rule = DualRule::gradient;
    return run_primal_dual(inst, cfg, ref);
}

AdversarialSchedule::AdversarialSchedule(const LayeredShape& shape, std::uint64_t seed)
    : base_(shape.num_pairs()), swing_(shape.num_pairs())
{
    Rng rng(seed);
    for (std::size_t p = 0; p < base_.size(); ++p) {
        base_[p] = 0.2 + 0.6 * rng.uniform();
        swing_[p] = 0.4 * rng.uniform() - 0.2;
    }
}

void AdversarialSchedule::losses(std::uint64_t t, std::span<double> out) const
{
    // Blocks of doubling length alternate the sign of the swing component.
    int block = 0;
    for (std::uint64_t v = t; v > 1; v >>= 1)
        ++block;
    const double sign = block % 2 == 0 ? 1.0 : -1.0;
    for (std::size_t p = 0; p < base_.size(); ++p)
        out[p] = std::clamp(base_[p] + sign * swing_[p], 0.0, 1.0);
}

std::vector<Policy> enumerate_deterministic_policies(const LayeredShape& shape, std::size_t limit)
{
    const std::size_t S = shape.num_states() - 1;
    const std::size_t A = shape.num_actions();
    double count = std::pow(static_cast<double>(A), static_cast<double>(S));
    if (count > static_cast<double>(limit))
        throw std::invalid_argument("too many deterministic policies to enumerate");
    std::vector<Policy> out;
    std::vector<std::size_t> choice(S, 0);
    while (true) {
        Policy pi;
        pi.num_actions = A;
        pi.prob.assign(shape.num_pairs(), 0.0);
        for (StateId x = 0; x < S; ++x)
            pi.prob[shape.pair(x, choice[x])] = 1.0;
        out.push_back(std::move(pi));
        std::size_t i = 0;
        while (i < S && ++choice[i] == A)
            choice[i++] = 0;
        if (i == S)
            break;
    }
    return out;
}

PrimalOnlyResult run_primal_only(const CmdpInstance& inst, const PrimalOnlyConfig& cfg)
{
    if (cfg.episodes == 0)
        throw std::invalid_argument("primal_only: T must be at least 1");
    const LayeredShape& shape = inst.shape;
    const std::size_t P = shape.num_pairs();
    PrimalOnlyResult res;
    res.primal = cfg.primal.value_or(default_primal_params(shape, cfg.episodes));
    res.checkpoints = cfg.checkpoints.empty() ? std::vector<std::uint64_t>{cfg.episodes} : cfg.checkpoints;
    std::sort(res.checkpoints.begin(), res.checkpoints.end());

    const auto policies = enumerate_deterministic_policies(shape);
    std::vector<std::vector<double>> occupancies;
    occupancies.reserve(policies.size());
    for (const auto& pi : policies)
        occupancies.push_back(occupancy_measure(shape, inst.transition, pi).q);

    const AdversarialSchedule schedule(shape, cfg.schedule_seed);
    auto learner = make_primal_learner(inst, res.primal);
    EstimatorState est(shape, inst.num_constraints(), cfg.episodes, cfg.delta);
    Rng rng(cfg.seed);
    Trajectory traj;
    std::vector<double> loss(P), cumulative(P, 0.0), q(P), mass(shape.num_states()), scaled(shape.horizon());
    double learner_loss = 0.0;
    std::size_t next_cp = 0;

    auto best_fixed = [&] {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& occ : occupancies)
            best = std::min(best, dot(occ, cumulative));
        return best;
    };

    for (std::uint64_t t = 1; t <= cfg.episodes; ++t) {
        schedule.losses(t, loss);
        const Policy& pi = learner->policy();
        occupancy_measure(shape, inst.transition, pi, q, mass);
        learner_loss += dot(q, loss);
        for (std::size_t p = 0; p < P; ++p)
            cumulative[p] += loss[p];

        simulate_episode(inst, pi, rng, traj);
        traj.episode = t;
        est.ingest(traj);
        for (std::size_t k = 0; k < traj.length(); ++k)
            scaled[k] = loss[traj.pair(shape, k)];
        learner->update(traj, scaled, est);

        while (next_cp < res.checkpoints.size() && res.checkpoints[next_cp] == t) {
            res.regret.push_back(learner_loss - best_fixed());
            ++next_cp;
        }
    }
    res.best_fixed_loss = best_fixed();
    res.final_regret = learner_loss - res.best_fixed_loss;
    return res;
}

// ---------------------------------------------------------------- analysis

std::vector<std::uint64_t> checkpoint_grid(std::uint64_t T)
{
    if (T < 64)
        throw std::invalid_argument("checkpoint grid needs T >= 64");
    std::vector<std::uint64_t> out;
    for (std::uint64_t d = 64; d >= 1; d /= 2)
        out.push_back(T / d);
    return out;
}

SlopeFit loglog_slope(std::span<const std::uint64_t> ts, std::span<const double> values)
{
    if (ts.size() != values.size() || ts.size() < 2)
        throw std::invalid_argument("slope fit needs matching series of at least two points");
    const std::size_t first = ts.size() / 2;
    SlopeFit fit;
    bool all_zero = true, any_zero = false;
    for (std::size_t i = first; i < ts.size(); ++i) {
        all_zero = all_zero && values[i] == 0.0;
        any_zero = any_zero || !(values[i] > 0.0);
    }
    if (all_zero) {
        fit.kind = SlopeKind::zero_metric;
        return fit;
    }
    if (any_zero || ts.size() - first < 2) {
        fit.kind = SlopeKind::undefined;
        fit.slope = std::nan("");
        return fit;
    }
    double sx = 0.0, sy = 0.0;
    const double n = static_cast<double>(ts.size() - first);
    for (std::size_t i = first; i < ts.size(); ++i) {
        sx += std::log(static_cast<double>(ts[i]));
        sy += std::log(values[i]);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = first; i < ts.size(); ++i) {
        const double dx = std::log(static_cast<double>(ts[i])) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(values[i]) - my);
    }
    fit.kind = SlopeKind::fitted;
    fit.slope = sxy / sxx;
    return fit;
}

MeanSd mean_sd(std::span<const double> values)
{
    MeanSd out;
    out.count = values.size();
    if (values.empty())
        return out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - out.mean) * (v - out.mean);
        out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

double record_value_at(const RunRecord& rec, std::uint64_t t, bool violation)
{
    const auto it = std::upper_bound(rec.t.begin(), rec.t.end(), t);
    if (it == rec.t.begin())
        return 0.0;
    const auto row = static_cast<std::size_t>(it - rec.t.begin()) - 1;
    return violation ? rec.violation[row] : rec.regret[row];
}

SweepSummary analyze_sublinearity(const std::vector<RunRecord>& records, std::uint64_t T)
{
    SweepSummary out;
    out.checkpoints = checkpoint_grid(T);
    const std::size_t n = out.checkpoints.size();
    out.mean_regret_at.assign(n, 0.0);
    out.mean_violation_at.assign(n, 0.0);
    std::vector<double> r_slopes, v_slopes;
    for (const RunRecord& rec : records) {
        SeedSummary s;
        s.algorithm = rec.summary.algorithm;
        s.seed = rec.summary.seed;
        for (std::size_t c = 0; c < n; ++c) {
            s.regret_at.push_back(record_value_at(rec, out.checkpoints[c], false));
            s.violation_at.push_back(record_value_at(rec, out.checkpoints[c], true));
            out.mean_regret_at[c] += s.regret_at.back() / static_cast<double>(records.size());
            out.mean_violation_at[c] += s.violation_at.back() / static_cast<double>(records.size());
        }
        s.final_regret = s.regret_at.back();
        s.final_violation = s.violation_at.back();
        s.regret_slope = loglog_slope(out.checkpoints, s.regret_at);
        s.violation_slope = loglog_slope(out.checkpoints, s.violation_at);
        auto tally = [](const SlopeFit& f, std::vector<double>& slopes, std::size_t& zero, std::size_t& undefined) {
            if (f.kind == SlopeKind::fitted)
                slopes.push_back(f.slope);
            else if (f.kind == SlopeKind::zero_metric)
                ++zero;
            else
                ++undefined;
        };
        tally(s.regret_slope, r_slopes, out.regret_zero, out.regret_undefined);
        tally(s.violation_slope, v_slopes, out.violation_zero, out.violation_undefined);
        out.seeds.push_back(std::move(s));
    }
    out.regret_slope = mean_sd(r_slopes);
    out.violation_slope = mean_sd(v_slopes);
    return out;
}

// ---------------------------------------------------------------- audit

CoverageReport audit_confidence(const std::vector<RunSummary>& summaries)
{
    CoverageReport rep;
    rep.runs = summaries.size();
    std::size_t r_runs = 0, c_runs = 0, t_runs = 0, l_runs = 0, lc_runs = 0;
    CoverageTally total;
    for (const RunSummary& s : summaries) {
        if (!s.audited)
            throw std::invalid_argument("audit needs runs executed with auditing enabled");
        rep.delta = s.delta;
        const CoverageTally& c = s.coverage;
        r_runs += c.reward_violations > 0;
        c_runs += c.cost_violations > 0;
        t_runs += c.transition_violations > 0;
        l_runs += c.lagrangian_violations > 0;
        lc_runs += c.lagrangian_cor_violations > 0;
        total.reward_events += c.reward_events;
        total.reward_violations += c.reward_violations;
        total.cost_events += c.cost_events;
        total.cost_violations += c.cost_violations;
        total.transition_events += c.transition_events;
        total.transition_violations += c.transition_violations;
    }
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    const double runs = static_cast<double>(rep.runs);
    rep.reward_run_rate = ratio(static_cast<double>(r_runs), runs);
    rep.cost_run_rate = ratio(static_cast<double>(c_runs), runs);
    rep.transition_run_rate = ratio(static_cast<double>(t_runs), runs);
    rep.lagrangian_run_rate = ratio(static_cast<double>(l_runs), runs);
    rep.lagrangian_cor_run_rate = ratio(static_cast<double>(lc_runs), runs);
    rep.reward_event_rate =
        ratio(static_cast<double>(total.reward_violations), static_cast<double>(total.reward_events));
    rep.cost_event_rate = ratio(static_cast<double>(total.cost_violations), static_cast<double>(total.cost_events));
    rep.transition_event_rate =
        ratio(static_cast<double>(total.transition_violations), static_cast<double>(total.transition_events));
    rep.reward_ok = rep.runs > 0 && rep.reward_run_rate <= rep.delta;
    rep.cost_ok = rep.runs > 0 && rep.cost_run_rate <= rep.delta;
    rep.transition_ok = rep.runs > 0 && rep.transition_run_rate <= 4.0 * rep.delta;
    return rep;
}

void audit_dump(const CmdpInstance& inst, const EstimatorDump& dump, std::uint64_t& events,
                std::uint64_t& violations)
{
    const LayeredShape& shape = inst.shape;
    if (dump.layers != shape.layer_sizes() || dump.num_actions != shape.num_actions() ||
        dump.num_constraints != inst.num_constraints())
        throw std::invalid_argument("estimator dump does not match the instance");
    for (PairId p = 0; p < shape.num_pairs(); ++p) {
        ++events;
        violations += std::abs(dump.r_hat[p] - inst.reward_mean[p]) > dump.phi[p];
        for (std::size_t i = 0; i < inst.num_constraints(); ++i) {
            ++events;
            violations += std::abs(dump.g_hat[i][p] - inst.cost_means[i][p]) > dump.xi[p];
        }
        const std::size_t off = shape.row_offset(p);
        for (std::size_t j = 0; j < shape.row_width(shape.pair_state(p)); ++j) {
            ++events;
            violations += std::abs(dump.p_hat[off + j] - inst.transition.prob[off + j]) > dump.eps[off + j];
        }
    }
}

CoverageReport audit_directory(const std::string& dir)
{
    if (!fs::is_directory(dir))
        throw std::invalid_argument("'" + dir + "' is not a directory");
    std::vector<fs::path> summaries, dumps;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        const auto name = entry.path().filename().string();
        if (entry.path().extension() == ".summary")
            summaries.push_back(entry.path());
        else if (name.rfind("estimator_", 0) == 0 && entry.path().extension() == ".txt")
            dumps.push_back(entry.path());
    }
    std::sort(summaries.begin(), summaries.end());
    std::sort(dumps.begin(), dumps.end());
    std::vector<RunSummary> runs;
    for (const auto& p : summaries) {
        RunSummary s = read_run_summary_file(p.string());
        if (s.audited)
            runs.push_back(std::move(s));
    }
    if (runs.empty())
        throw std::invalid_argument("no audited run summaries under '" + dir + "'");
    CoverageReport rep = audit_confidence(runs);
    if (!dumps.empty()) {
        const CmdpInstance inst = load_instance((fs::path(dir) / "instance").string());
        for (const auto& p : dumps) {
            std::ifstream in(p);
            audit_dump(inst, read_estimator_dump(in), rep.dump_events, rep.dump_violations);
            ++rep.dumps;
        }
    }
    return rep;
}

// ---------------------------------------------------------------- sweeps

namespace {

bool parse_flag(const KvLine& kv)
{
    const auto v = uints_of(kv, 1)[0];
    if (v > 1)
        throw ParseError("'" + kv.key + "' expects 0 or 1 on line " + std::to_string(kv.line));
    return v == 1;
}

std::string one_word(const KvLine& kv)
{
    if (kv.values.size() != 1)
        throw ParseError("'" + kv.key + "' expects one value on line " + std::to_string(kv.line));
    return kv.values[0];
}

} // namespace

ExperimentSpec parse_experiment_spec(std::istream& in)
{
    ExperimentSpec spec;
    for (const KvLine& kv : read_kv(in)) {
        const std::string& k = kv.key;
        if (k == "instance") {
            spec.instance_path = one_word(kv);
        } else if (k == "layers") {
            spec.generator.layer_sizes.clear();
            for (auto v : uints_of(kv))
                spec.generator.layer_sizes.push_back(static_cast<std::size_t>(v));
        } else if (k == "actions") {
            spec.generator.num_actions = static_cast<std::size_t>(uints_of(kv, 1)[0]);
        } else if (k == "constraints") {
            spec.generator.num_constraints = static_cast<std::size_t>(uints_of(kv, 1)[0]);
        } else if (k == "rho_floor") {
            spec.generator.rho_floor = doubles_of(kv, 1)[0];
        } else if (k == "margin_spread") {
            spec.generator.margin_spread = doubles_of(kv, 1)[0];
        } else if (k == "cost_reward_link") {
            spec.generator.cost_reward_link = doubles_of(kv, 1)[0];
        } else if (k == "require_binding") {
            spec.generator.require_binding = parse_flag(kv);
        } else if (k == "noise") {
            spec.generator.noise = parse_noise(one_word(kv), kv.line);
        } else if (k == "generator_seed") {
            spec.generator_seed = uints_of(kv, 1)[0];
        } else if (k == "algorithms") {
            if (kv.values.empty())
                throw ParseError("'algorithms' needs at least one value on line " + std::to_string(kv.line));
            for (const auto& a : kv.values)
                if (a != "cpdpo" && a != "weak_pd" && a != "primal_only")
                    throw ParseError("unknown algorithm '" + a + "' on line " + std::to_string(kv.line));
            spec.algorithms = kv.values;
        } else if (k == "seeds") {
            spec.seeds = uints_of(kv);
            if (spec.seeds.empty())
                throw ParseError("'seeds' needs at least one value on line " + std::to_string(kv.line));
        } else if (k == "seed_count") {
            const auto n = uints_of(kv, 1)[0];
            spec.seeds.clear();
            for (std::uint64_t s = 1; s <= n; ++s)
                spec.seeds.push_back(s);
        } else if (k == "T") {
            spec.episodes = uints_of(kv, 1)[0];
        } else if (k == "delta") {
            spec.delta = doubles_of(kv, 1)[0];
        } else if (k == "rho") {
            spec.rho = doubles_of(kv, 1)[0];
        } else if (k == "eta") {
            spec.primal.eta = doubles_of(kv, 1)[0];
        } else if (k == "gamma") {
            spec.primal.gamma = doubles_of(kv, 1)[0];
        } else if (k == "beta") {
            spec.primal.beta = doubles_of(kv, 1)[0];
        } else if (k == "primal_mode") {
            spec.primal.mode = parse_primal_mode(one_word(kv));
        } else if (k == "dual_step") {
            spec.dual_step = doubles_of(kv, 1)[0];
        } else if (k == "metric_every") {
            spec.metric_every = uints_of(kv, 1)[0];
        } else if (k == "audit") {
            spec.audit = parse_flag(kv);
        } else if (k == "dump_every") {
            spec.dump_every = uints_of(kv, 1)[0];
        } else if (k == "threads") {
            spec.threads = static_cast<std::size_t>(uints_of(kv, 1)[0]);
        } else if (k == "out") {
            spec.out_dir = one_word(kv);
        } else {
            throw ParseError("unknown sweep key '" + k + "' on line " + std::to_string(kv.line));
        }
    }
    if (spec.episodes == 0)
        throw ParseError("sweep: T must be at least 1");
    if (spec.threads == 0)
        spec.threads = 1;
    return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open sweep spec '" + path + "'");
    return parse_experiment_spec(in);
}

void write_experiment_spec(const ExperimentSpec& spec, std::ostream& out)
{
    if (!spec.instance_path.empty()) {
        out << "instance " << spec.instance_path << '\n';
    } else {
        const GeneratorParams& g = spec.generator;
        out << "layers";
        for (auto s : g.layer_sizes)
            out << ' ' << s;
        out << "\nactions " << g.num_actions << "\nconstraints " << g.num_constraints << "\nrho_floor "
            << format_double(g.rho_floor) << "\nmargin_spread " << format_double(g.margin_spread)
            << "\ncost_reward_link " << format_double(g.cost_reward_link) << "\nrequire_binding "
            << (g.require_binding ? 1 : 0) << "\nnoise " << noise_name(g.noise) << "\ngenerator_seed "
            << spec.generator_seed << '\n';
    }
    out << "algorithms";
    for (const auto& a : spec.algorithms)
        out << ' ' << a;
    out << "\nseeds";
    for (auto s : spec.seeds)
        out << ' ' << s;
    out << "\nT " << spec.episodes << "\ndelta " << format_double(spec.delta) << '\n';
    if (spec.rho)
        out << "rho " << format_double(*spec.rho) << '\n';
    if (spec.primal.eta)
        out << "eta " << format_double(*spec.primal.eta) << '\n';
    if (spec.primal.gamma)
        out << "gamma " << format_double(*spec.primal.gamma) << '\n';
    if (spec.primal.beta)
        out << "beta " << format_double(*spec.primal.beta) << '\n';
    if (spec.primal.mode)
        out << "primal_mode " << primal_mode_name(*spec.primal.mode) << '\n';
    if (spec.dual_step >= 0.0)
        out << "dual_step " << format_double(spec.dual_step) << '\n';
    out << "metric_every " << spec.metric_every << "\naudit " << (spec.audit ? 1 : 0) << "\ndump_every "
        << spec.dump_every << "\nthreads " << spec.threads << '\n';
    if (!spec.out_dir.empty())
        out << "out " << spec.out_dir << '\n';
}

void write_run_files(const RunRecord& rec, const std::string& dir)
{
    const std::string stem = rec.summary.algorithm + "_seed" + std::to_string(rec.summary.seed);
    write_run_csv(rec, (fs::path(dir) / (stem + ".csv")).string());
    write_run_summary(rec.summary, (fs::path(dir) / (stem + ".summary")).string());
}

namespace {

const char* slope_kind_name(SlopeKind kind)
{
    switch (kind) {
    case SlopeKind::fitted:
        return "fitted";
    case SlopeKind::zero_metric:
        return "zero_metric";
    case SlopeKind::undefined:
        return "undefined";
    }
    return "undefined";
}

nlohmann::json slope_json(const SlopeFit& f)
{
    nlohmann::json j;
    j["kind"] = slope_kind_name(f.kind);
    if (f.kind == SlopeKind::fitted)
        j["slope"] = f.slope;
    return j;
}

void write_sweep_outputs(const ExperimentSpec& spec, const SweepResult& res)
{
    const fs::path dir(spec.out_dir);
    std::ofstream summary(dir / "summary");
    nlohmann::json doc;
    summary << "OPT " << format_double(res.oracle.opt) << "\nrho_oracle " << format_double(res.oracle.rho) << '\n';
    doc["OPT"] = res.oracle.opt;
    doc["rho_oracle"] = res.oracle.rho;
    doc["T"] = spec.episodes;

    std::size_t sweep_index = 0;
    for (const auto& algo : spec.algorithms) {
        nlohmann::json ja;
        ja["algorithm"] = algo;
        if (algo == "primal_only") {
            for (const auto& po : res.primal_only) {
                summary << "primal_only final_regret " << format_double(po.final_regret) << '\n';
                ja["final_regret"].push_back(po.final_regret);
            }
            doc["algorithms"].push_back(ja);
            continue;
        }
        const SweepSummary& sw = res.per_algorithm[sweep_index++];
        summary << "algorithm " << algo << '\n';
        if (!sw.checkpoints.empty()) {
            summary << algo << " checkpoints";
            for (auto c : sw.checkpoints)
                summary << ' ' << c;
            summary << '\n' << algo << " mean_R_at";
            for (double v : sw.mean_regret_at)
                summary << ' ' << format_double(v);
            summary << '\n' << algo << " mean_V_at";
            for (double v : sw.mean_violation_at)
                summary << ' ' << format_double(v);
            summary << '\n'
                    << algo << " slope_R mean " << format_double(sw.regret_slope.mean) << " sd "
                    << format_double(sw.regret_slope.sd) << " fitted " << sw.regret_slope.count << " zero "
                    << sw.regret_zero << " undefined " << sw.regret_undefined << '\n'
                    << algo << " slope_V mean " << format_double(sw.violation_slope.mean) << " sd "
                    << format_double(sw.violation_slope.sd) << " fitted " << sw.violation_slope.count << " zero "
                    << sw.violation_zero << " undefined " << sw.violation_undefined << '\n';
            ja["checkpoints"] = sw.checkpoints;
            ja["mean_R_at"] = sw.mean_regret_at;
            ja["mean_V_at"] = sw.mean_violation_at;
            ja["slope_R"] = {{"mean", sw.regret_slope.mean}, {"sd", sw.regret_slope.sd},
                             {"fitted", sw.regret_slope.count}};
            ja["slope_V"] = {{"mean", sw.violation_slope.mean}, {"sd", sw.violation_slope.sd},
                             {"fitted", sw.violation_slope.count}};
            for (const auto& s : sw.seeds) {
                summary << algo << " seed " << s.seed << " R_T " << format_double(s.final_regret) << " V_T "
                        << format_double(s.final_violation) << " slope_R "
                        << format_double(s.regret_slope.slope) << " (" << slope_kind_name(s.regret_slope.kind)
                        << ") slope_V " << format_double(s.violation_slope.slope) << " ("
                        << slope_kind_name(s.violation_slope.kind) << ")\n";
                ja["seeds"].push_back({{"seed", s.seed},
                                       {"R_T", s.final_regret},
                                       {"V_T", s.final_violation},
                                       {"slope_R", slope_json(s.regret_slope)},
                                       {"slope_V", slope_json(s.violation_slope)}});
            }
        } else {
            for (std::size_t r = 0; r < res.records.size(); ++r)
                if (res.algorithms[r] == algo)
                    summary << algo << " seed " << res.records[r].summary.seed << " R_T "
                            << format_double(res.records[r].summary.final_regret) << " V_T "
                            << format_double(res.records[r].summary.final_violation) << '\n';
        }
        doc["algorithms"].push_back(ja);
    }
    std::ofstream json_out(dir / "summary.json");
    json_out << doc.dump(2) << '\n';
}

} // namespace

SweepResult run_sweep(const ExperimentSpec& spec)
{
    SweepResult res;
    if (!spec.instance_path.empty()) {
        res.instance = load_instance(spec.instance_path);
        res.oracle = solve_oracle(res.instance);
    } else {
        GeneratedInstance gen = generate_instance(spec.generator, spec.generator_seed);
        res.instance = std::move(gen.instance);
        res.oracle = std::move(gen.oracle);
    }
    const CmdpInstance& inst = res.instance;
    const double rho = spec.rho.value_or(res.oracle.rho);
    const PrimalParams primal = resolve_primal_params(inst.shape, spec.episodes, spec.primal);
    MetricReference ref{res.oracle.opt, res.oracle.opt_costs};

    if (!spec.out_dir.empty()) {
        fs::create_directories(spec.out_dir);
        std::ofstream cfg(fs::path(spec.out_dir) / "config");
        write_experiment_spec(spec, cfg);
        save_instance(inst, (fs::path(spec.out_dir) / "instance").string());
    }

    struct Task {
        std::string algorithm;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const auto& a : spec.algorithms)
        for (auto s : spec.seeds)
            tasks.push_back({a, s});

    std::vector<RunRecord> records(tasks.size());
    std::vector<PrimalOnlyResult> primal_results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                const Task& task = tasks[i];
                if (task.algorithm == "primal_only") {
                    PrimalOnlyConfig pc;
                    pc.episodes = spec.episodes;
                    pc.seed = task.seed;
                    pc.delta = spec.delta;
                    pc.primal = primal;
                    if (spec.episodes >= 64)
                        pc.checkpoints = checkpoint_grid(spec.episodes);
                    primal_results[i] = run_primal_only(inst, pc);
                    continue;
                }
                RunConfig cfg;
                cfg.episodes = spec.episodes;
                cfg.delta = spec.delta;
                cfg.rho = rho;
                cfg.seed = task.seed;
                cfg.primal = primal;
                cfg.dual_step = spec.dual_step;
                cfg.metric_every = spec.metric_every;
                cfg.audit = spec.audit;
                cfg.dual_rule = task.algorithm == "weak_pd" ? DualRule::gradient : DualRule::two_point;
                if (spec.dump_every > 0 && !spec.out_dir.empty()) {
                    for (std::uint64_t t = spec.dump_every; t <= spec.episodes; t += spec.dump_every)
                        cfg.dump_at.push_back(t);
                    cfg.dump_dir = (fs::path(spec.out_dir) /
                                    ("dumps_" + task.algorithm + "_seed" + std::to_string(task.seed)))
                                       .string();
                }
                records[i] = run_primal_dual(inst, cfg, ref);
                if (!spec.out_dir.empty())
                    write_run_files(records[i], spec.out_dir);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(spec.threads, tasks.size()));
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w)
        pool.emplace_back(work);
    work();
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].algorithm == "primal_only") {
            res.primal_only.push_back(std::move(primal_results[i]));
        } else {
            res.algorithms.push_back(tasks[i].algorithm);
            res.records.push_back(std::move(records[i]));
        }
    }
    for (const auto& algo : spec.algorithms) {
        if (algo == "primal_only")
            continue;
        std::vector<RunRecord> group;
        for (std::size_t r = 0; r < res.records.size(); ++r)
            if (res.algorithms[r] == algo)
                group.push_back(res.records[r]);
        res.per_algorithm.push_back(spec.episodes >= 64 ? analyze_sublinearity(group, spec.episodes)
                                                        : SweepSummary{});
    }
    if (!spec.out_dir.empty()) {
        if (!res.primal_only.empty()) {
            std::size_t k = 0;
            for (const auto& task : tasks) {
                if (task.algorithm != "primal_only")
                    continue;
                const PrimalOnlyResult& po = res.primal_only[k++];
                std::ofstream out(fs::path(spec.out_dir) / ("primal_only_seed" + std::to_string(task.seed) + ".csv"));
                out << "t,regret\n";
                for (std::size_t c = 0; c < po.checkpoints.size(); ++c)
                    out << po.checkpoints[c] << ',' << format_double(po.regret[c]) << '\n';
            }
        }
        write_sweep_outputs(spec, res);
    }
    return res;
}

} // namespace cpdpo

#include "cpdpo/bench.hpp"
#include "cpdpo/instance_io.hpp"
#include "cpdpo/oracle.hpp"
#include "cpdpo/run_io.hpp"
#include "cpdpo/text_format.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace cpdpo;
namespace fs = std::filesystem;

namespace {

void print_policy(const LayeredShape& shape, const Policy& pi, const char* name)
{
    for (StateId x = 0; x + 1 < shape.num_states(); ++x) {
        std::cout << name << ' ' << x;
        for (ActionId a = 0; a < shape.num_actions(); ++a)
            std::cout << ' ' << format_double(pi.prob[shape.pair(x, a)]);
        std::cout << '\n';
    }
}

int cmd_validate(const std::string& path)
{
    const CmdpInstance inst = load_instance(path);
    std::cout << "ok layers " << inst.horizon() << " states " << inst.shape.num_states() << " actions "
              << inst.shape.num_actions() << " constraints " << inst.num_constraints() << '\n';
    return 0;
}

int cmd_oracle(const std::string& path, bool show_policy)
{
    const CmdpInstance inst = load_instance(path);
    const OracleResult res = solve_oracle(inst);
    std::cout << "OPT " << format_double(res.opt) << '\n';
    for (std::size_t i = 0; i < res.opt_costs.size(); ++i)
        std::cout << "cost " << i << ' ' << format_double(res.opt_costs[i]) << " threshold "
                  << format_double(inst.thresholds[i]) << '\n';
    std::cout << "rho " << format_double(res.rho) << '\n';
    std::cout << "lp_reduced_cost_violation " << format_double(res.lp_reduced_cost_violation) << '\n';
    if (show_policy) {
        print_policy(inst.shape, res.pi_star, "pi_star");
        print_policy(inst.shape, res.pi_rho, "pi_rho");
    }
    return 0;
}

struct RunArgs {
    std::string algo = "cpdpo";
    std::string instance;
    std::uint64_t episodes = 0;
    std::uint64_t seed = 0;
    std::optional<double> rho;
    double delta = 0.1;
    std::string out;
    std::optional<double> eta, gamma, beta;
    std::string primal_mode;
    double dual_step = -1.0;
    std::uint64_t metric_every = 1;
    bool audit = false;
    std::string entropy_log;
};

int cmd_run(const RunArgs& args)
{
    const CmdpInstance inst = load_instance(args.instance);
    PrimalOverrides ov;
    ov.eta = args.eta;
    ov.gamma = args.gamma;
    ov.beta = args.beta;
    if (!args.primal_mode.empty())
        ov.mode = parse_primal_mode(args.primal_mode);
    const PrimalParams primal = resolve_primal_params(inst.shape, args.episodes, ov);
    fs::create_directories(args.out);
    const std::string stem = args.algo + "_seed" + std::to_string(args.seed);

    if (args.algo == "primal_only") {
        PrimalOnlyConfig pc;
        pc.episodes = args.episodes;
        pc.seed = args.seed;
        pc.delta = args.delta;
        pc.primal = primal;
        if (args.episodes >= 64)
            pc.checkpoints = checkpoint_grid(args.episodes);
        const PrimalOnlyResult res = run_primal_only(inst, pc);
        std::ofstream csv(fs::path(args.out) / (stem + ".csv"), std::ios::binary);
        csv << "t,regret\n";
        for (std::size_t c = 0; c < res.checkpoints.size(); ++c)
            csv << res.checkpoints[c] << ',' << format_double(res.regret[c]) << '\n';
        std::cout << "final_regret " << format_double(res.final_regret) << "\nbest_fixed_loss "
                  << format_double(res.best_fixed_loss) << '\n';
        return 0;
    }

    const OracleResult oracle = solve_oracle(inst);
    RunConfig cfg;
    cfg.episodes = args.episodes;
    cfg.seed = args.seed;
    cfg.delta = args.delta;
    cfg.rho = args.rho.value_or(oracle.rho);
    if (!(cfg.rho > 0.0))
        throw std::invalid_argument("instance has no strictly feasible policy (rho " + format_double(cfg.rho) + ")");
    cfg.primal = primal;
    cfg.dual_step = args.dual_step;
    cfg.metric_every = args.metric_every;
    cfg.audit = args.audit;
    cfg.dual_rule = args.algo == "weak_pd" ? DualRule::gradient : DualRule::two_point;
    std::ofstream entropy;
    if (!args.entropy_log.empty()) {
        entropy.open(args.entropy_log);
        if (!entropy)
            throw std::runtime_error("cannot open '" + args.entropy_log + "'");
        cfg.entropy_log = &entropy;
    }
    const RunRecord rec = run_primal_dual(inst, cfg, MetricReference{oracle.opt, oracle.opt_costs});
    write_run_files(rec, args.out);
    std::cout << "R_T " << format_double(rec.summary.final_regret) << "\nV_T "
              << format_double(rec.summary.final_violation) << '\n';
    return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_override)
{
    ExperimentSpec spec = load_experiment_spec(spec_path);
    if (!out_override.empty())
        spec.out_dir = out_override;
    if (spec.out_dir.empty())
        throw std::invalid_argument("sweep needs an output directory ('out' key or --out)");
    const SweepResult res = run_sweep(spec);
    std::ifstream summary(fs::path(spec.out_dir) / "summary");
    std::cout << summary.rdbuf();
    (void)res;
    return 0;
}

int cmd_audit(const std::string& dir)
{
    const CoverageReport rep = audit_directory(dir);
    std::cout << "runs " << rep.runs << "\ndelta " << format_double(rep.delta) << "\nreward_run_rate "
              << format_double(rep.reward_run_rate) << "\ncost_run_rate " << format_double(rep.cost_run_rate)
              << "\ntransition_run_rate " << format_double(rep.transition_run_rate) << "\nreward_event_rate "
              << format_double(rep.reward_event_rate) << "\ncost_event_rate " << format_double(rep.cost_event_rate)
              << "\ntransition_event_rate " << format_double(rep.transition_event_rate)
              << "\nlagrangian_run_rate " << format_double(rep.lagrangian_run_rate)
              << "\nlagrangian_cor_run_rate " << format_double(rep.lagrangian_cor_run_rate) << "\ndumps "
              << rep.dumps << "\ndump_events " << rep.dump_events << "\ndump_violations " << rep.dump_violations
              << "\nreward_ok " << rep.reward_ok << "\ncost_ok " << rep.cost_ok << "\ntransition_ok "
              << rep.transition_ok << '\n';
    return 0;
}

int cmd_generate(const GeneratorParams& params, std::uint64_t seed, const std::string& out)
{
    const GeneratedInstance gen = generate_instance(params, seed);
    if (out.empty())
        serialize_instance(gen.instance, std::cout);
    else
        save_instance(gen.instance, out);
    std::cerr << "attempts " << gen.attempts << " OPT " << format_double(gen.oracle.opt) << " rho "
              << format_double(gen.oracle.rho) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Constrained primal-dual policy optimization on layered CMDPs"};
    app.require_subcommand(1);

    std::string instance_path;
    auto* validate = app.add_subcommand("validate", "Parse and check an instance file");
    validate->add_option("instance", instance_path, "Instance file")->required();

    bool show_policy = false;
    auto* oracle = app.add_subcommand("oracle", "Solve OPT and the Slater margin by LP");
    oracle->add_option("instance", instance_path, "Instance file")->required();
    oracle->add_flag("--policy", show_policy, "Print the optimal and margin policies");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run one algorithm on one instance and seed");
    run->add_option("--algo", run_args.algo, "cpdpo | weak_pd | primal_only")
        ->check(CLI::IsMember({"cpdpo", "weak_pd", "primal_only"}));
    run->add_option("--instance", run_args.instance, "Instance file")->required();
    run->add_option("--T", run_args.episodes, "Number of episodes")->required()->check(CLI::PositiveNumber);
    run->add_option("--seed", run_args.seed, "Seed")->required();
    run->add_option("--rho", run_args.rho, "Slater margin passed to the algorithm (default: oracle value)");
    run->add_option("--delta", run_args.delta, "Confidence parameter");
    run->add_option("--out", run_args.out, "Output directory")->required();
    run->add_option("--eta", run_args.eta, "Primal learning rate");
    run->add_option("--gamma", run_args.gamma, "Implicit exploration");
    run->add_option("--beta", run_args.beta, "Bonus coefficient");
    run->add_option("--primal-mode", run_args.primal_mode, "full | known_transition");
    run->add_option("--dual-step", run_args.dual_step, "Baseline dual step (default 1/sqrt(T))");
    run->add_option("--metric-every", run_args.metric_every, "Evaluate metrics every k episodes");
    run->add_flag("--audit", run_args.audit, "Track confidence coverage and Lagrangian checks");
    run->add_option("--entropy-log", run_args.entropy_log, "Write per-episode policy entropy to this file");

    std::string spec_path, sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Run a multi-seed experiment from a spec file");
    sweep->add_option("--spec", spec_path, "Sweep spec file")->required();
    sweep->add_option("--out", sweep_out, "Output directory (overrides the spec)");

    std::string audit_dir;
    auto* audit = app.add_subcommand("audit", "Confidence coverage report over an experiment directory");
    audit->add_option("--dir", audit_dir, "Experiment directory")->required();

    GeneratorParams gen;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    std::string gen_noise = "bernoulli";
    auto* generate = app.add_subcommand("generate", "Generate a random instance with a Slater margin floor");
    generate->add_option("--layers", gen.layer_sizes, "Layer sizes");
    generate->add_option("--actions", gen.num_actions, "Actions per state");
    generate->add_option("--constraints", gen.num_constraints, "Number of constraints");
    generate->add_option("--rho-floor", gen.rho_floor, "Minimum oracle rho");
    generate->add_option("--margin-spread", gen.margin_spread, "Width of the margin draw");
    generate->add_option("--link", gen.cost_reward_link, "Weight of the reward inside each cost");
    generate->add_flag("--binding", gen.require_binding, "Reward-greedy policy must violate constraint 0");
    generate->add_option("--noise", gen_noise, "bernoulli | degenerate");
    generate->add_option("--retries", gen.max_retries, "Retry budget");
    generate->add_option("--seed", gen_seed, "Seed");
    generate->add_option("--out", gen_out, "Output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*validate)
            return cmd_validate(instance_path);
        if (*oracle)
            return cmd_oracle(instance_path, show_policy);
        if (*run)
            return cmd_run(run_args);
        if (*sweep)
            return cmd_sweep(spec_path, sweep_out);
        if (*audit)
            return cmd_audit(audit_dir);
        if (*generate) {
            gen.noise = parse_noise(gen_noise);
            return cmd_generate(gen, gen_seed, gen_out);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

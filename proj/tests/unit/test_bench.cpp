#include "doctest.h"
#include "support.hpp"

#include "cpdpo/bench.hpp"
#include "cpdpo/instance_io.hpp"
#include "cpdpo/run_io.hpp"
#include "cpdpo/text_format.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cpdpo;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

RunRecord synthetic_record(std::uint64_t T, double (*regret)(double), double (*violation)(double))
{
    RunRecord rec;
    rec.num_constraints = 1;
    for (std::uint64_t t = 1; t <= T; ++t) {
        rec.t.push_back(t);
        rec.v_r.push_back(0.0);
        rec.v_g.push_back(0.0);
        rec.lambda.push_back(0.0);
        rec.regret.push_back(regret(static_cast<double>(t)));
        rec.violation.push_back(violation(static_cast<double>(t)));
    }
    return rec;
}

fs::path scratch_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("cpdpo_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("generator is deterministic and honours the rho floor")
{
    GeneratorParams params;
    params.layer_sizes = {1, 2, 2, 1};
    params.num_actions = 2;
    params.num_constraints = 2;
    params.rho_floor = 0.2;
    const GeneratedInstance a = generate_instance(params, 5);
    const GeneratedInstance b = generate_instance(params, 5);
    CHECK(serialize_instance(a.instance) == serialize_instance(b.instance));
    CHECK(a.oracle.rho >= 0.2 - 1e-9);
    CHECK(std::abs(compute_rho(a.instance).rho - a.oracle.rho) <= 1e-10);
    CHECK(serialize_instance(generate_instance(params, 6).instance) != serialize_instance(a.instance));

    params.rho_floor = 0.0;
    CHECK_NOTHROW(generate_instance(params, 1));

    params.require_binding = true;
    params.rho_floor = 0.1;
    const GeneratedInstance bind = generate_instance(params, 3);
    const GreedyResult greedy = greedy_value(bind.instance.shape, bind.instance.transition, bind.instance.reward_mean);
    CHECK(path_value(bind.instance.shape, bind.instance.transition, greedy.pi, bind.instance.cost_means[0]) >
          bind.instance.thresholds[0]);

    params.rho_floor = 50.0;
    params.max_retries = 3;
    CHECK_THROWS_AS(generate_instance(params, 1), GenerationError);
}

TEST_CASE("checkpoint grid")
{
    const auto g = checkpoint_grid(6400);
    CHECK(g == std::vector<std::uint64_t>{100, 200, 400, 800, 1600, 3200, 6400});
    CHECK_THROWS(checkpoint_grid(63));
}

TEST_CASE("log-log slope is exact on power laws")
{
    const std::vector<std::uint64_t> ts{1000, 2000, 4000, 8000, 16000, 32000, 64000};
    std::vector<double> sq, lin, zero(ts.size(), 0.0), holey;
    for (auto t : ts) {
        sq.push_back(3.0 * std::sqrt(static_cast<double>(t)));
        lin.push_back(0.25 * static_cast<double>(t));
    }
    const SlopeFit a = loglog_slope(ts, sq);
    CHECK(a.kind == SlopeKind::fitted);
    CHECK(std::abs(a.slope - 0.5) <= 1e-6);
    const SlopeFit b = loglog_slope(ts, lin);
    CHECK(std::abs(b.slope - 1.0) <= 1e-6);
    CHECK(loglog_slope(ts, zero).kind == SlopeKind::zero_metric);
    holey = sq;
    holey[5] = 0.0;
    CHECK(loglog_slope(ts, holey).kind == SlopeKind::undefined);
    // Only the upper half enters the fit.
    std::vector<double> bent = sq;
    bent[0] = 1e9;
    CHECK(std::abs(loglog_slope(ts, bent).slope - 0.5) <= 1e-6);
}

TEST_CASE("mean and sample standard deviation")
{
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const MeanSd s = mean_sd(v);
    CHECK(s.mean == 2.5);
    CHECK(s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
    CHECK(s.count == 4);
    CHECK(mean_sd(std::vector<double>{}).count == 0);
}

TEST_CASE("sublinearity analysis on synthetic records")
{
    std::vector<RunRecord> recs;
    recs.push_back(synthetic_record(
        6400, [](double t) { return 2.0 * std::sqrt(t); }, [](double) { return 0.0; }));
    recs.push_back(synthetic_record(
        6400, [](double t) { return 0.5 * t; }, [](double t) { return std::pow(t, 0.7); }));
    const SweepSummary s = analyze_sublinearity(recs, 6400);
    CHECK(s.seeds.size() == 2);
    CHECK(std::abs(s.seeds[0].regret_slope.slope - 0.5) <= 1e-6);
    CHECK(std::abs(s.seeds[1].regret_slope.slope - 1.0) <= 1e-6);
    CHECK(std::abs(s.regret_slope.mean - 0.75) <= 1e-6);
    CHECK(s.violation_zero == 1);
    CHECK(std::abs(s.violation_slope.mean - 0.7) <= 1e-6);
    CHECK(s.mean_regret_at.back() == doctest::Approx((2.0 * 80.0 + 3200.0) / 2.0).epsilon(1e-12));
    CHECK(record_value_at(recs[1], 100, false) == 50.0);
}

TEST_CASE("sweep spec parsing")
{
    std::istringstream in("# comment\ninstance data/small.instance\nalgorithms cpdpo weak_pd\nseed_count 3\n"
                          "T 256\ndelta 0.05\neta 0.01\ngamma 0.001\naudit 1\ndump_every 64\nthreads 2\n");
    const ExperimentSpec spec = parse_experiment_spec(in);
    CHECK(spec.instance_path == "data/small.instance");
    CHECK(spec.algorithms == std::vector<std::string>{"cpdpo", "weak_pd"});
    CHECK(spec.seeds == std::vector<std::uint64_t>{1, 2, 3});
    CHECK(spec.episodes == 256);
    CHECK(spec.delta == 0.05);
    CHECK(*spec.primal.eta == 0.01);
    CHECK(*spec.primal.gamma == 0.001);
    CHECK(spec.audit);
    CHECK(spec.dump_every == 64);
    CHECK(spec.threads == 2);

    std::ostringstream out;
    write_experiment_spec(spec, out);
    std::istringstream again(out.str());
    const ExperimentSpec back = parse_experiment_spec(again);
    CHECK(back.seeds == spec.seeds);
    CHECK(back.algorithms == spec.algorithms);
    CHECK(*back.primal.eta == 0.01);

    std::istringstream bad("algorithms ppo\nT 10\n");
    CHECK_THROWS_AS(parse_experiment_spec(bad), ParseError);
    std::istringstream unknown("T 10\nfoo 1\n");
    CHECK_THROWS_AS(parse_experiment_spec(unknown), ParseError);
}

TEST_CASE("sweep emits one record per seed and algorithm")
{
    ExperimentSpec spec;
    spec.instance_path = "data/small.instance";
    spec.algorithms = {"cpdpo", "weak_pd"};
    spec.seeds = {1, 2, 3};
    spec.episodes = 128;
    spec.threads = 2;
    spec.out_dir = scratch_dir("sweep").string();
    const SweepResult res = run_sweep(spec);
    REQUIRE(res.records.size() == 6);
    CHECK(res.per_algorithm.size() == 2);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(res.records[i].summary.algorithm == spec.algorithms[i / 3]);
        CHECK(res.records[i].summary.seed == spec.seeds[i % 3]);
        const fs::path csv = fs::path(spec.out_dir) / (spec.algorithms[i / 3] + "_seed" +
                                                        std::to_string(spec.seeds[i % 3]) + ".csv");
        REQUIRE(fs::exists(csv));
        const RunRecord back = read_run_csv_file(csv.string());
        CHECK(back.regret == res.records[i].regret);
    }
    CHECK(fs::exists(fs::path(spec.out_dir) / "summary"));
    CHECK(fs::exists(fs::path(spec.out_dir) / "summary.json"));
    CHECK(fs::exists(fs::path(spec.out_dir) / "config"));

    // Threading does not change results.
    spec.threads = 1;
    spec.out_dir.clear();
    const SweepResult serial = run_sweep(spec);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(serial.records[i].regret == res.records[i].regret);
}

TEST_CASE("audit with degenerate noise and deterministic transitions finds no violations")
{
    Rng rng(6);
    CmdpInstance inst = random_instance(rng, {1, 1, 1, 1}, 2, 1, NoiseKind::degenerate);
    inst.thresholds = {2.5};
    const fs::path dir = scratch_dir("audit");
    {
        std::ofstream out(dir / "instance.txt");
        out << serialize_instance(inst);
    }
    ExperimentSpec spec;
    spec.instance_path = (dir / "instance.txt").string();
    spec.seeds = {1, 2};
    spec.episodes = 200;
    spec.audit = true;
    spec.dump_every = 50;
    spec.out_dir = (dir / "run").string();
    run_sweep(spec);
    const CoverageReport rep = audit_directory(spec.out_dir);
    CHECK(rep.runs == 2);
    CHECK(rep.dumps == 8);
    CHECK(rep.dump_events > 0);
    CHECK(rep.dump_violations == 0);
    CHECK(rep.reward_run_rate == 0.0);
    CHECK(rep.cost_run_rate == 0.0);
    CHECK(rep.transition_run_rate == 0.0);
    CHECK(rep.reward_ok);
    CHECK(rep.cost_ok);
    CHECK(rep.transition_ok);

    std::vector<RunSummary> unaudited(1);
    CHECK_THROWS(audit_confidence(unaudited));
}

TEST_CASE("adversarial schedule and primal-only runs")
{
    const CmdpInstance inst = load_instance("data/small.instance");
    const AdversarialSchedule sched(inst.shape, 7);
    std::vector<double> l1(sched.num_pairs()), l2(sched.num_pairs());
    for (std::uint64_t t : {1u, 2u, 3u, 100u, 5000u}) {
        sched.losses(t, l1);
        for (double v : l1)
            CHECK((v >= 0.0 && v <= 1.0));
    }
    sched.losses(2, l1);
    sched.losses(4, l2);
    CHECK(l1 != l2);

    const auto policies = enumerate_deterministic_policies(inst.shape);
    CHECK(policies.size() == std::size_t{1} << (inst.shape.num_states() - 1));
    CHECK_THROWS(enumerate_deterministic_policies(inst.shape, 2));

    PrimalOnlyConfig cfg;
    cfg.episodes = 500;
    cfg.seed = 1;
    cfg.checkpoints = {100, 500};
    const PrimalOnlyResult a = run_primal_only(inst, cfg);
    const PrimalOnlyResult b = run_primal_only(inst, cfg);
    CHECK(a.regret == b.regret);
    CHECK(a.checkpoints == cfg.checkpoints);
    CHECK(a.final_regret == a.regret.back());
    // Regret against the best fixed policy is bounded by the episode count.
    CHECK(a.final_regret <= 500.0 * static_cast<double>(inst.horizon()));
}

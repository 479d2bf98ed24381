#include "cpdpo/run_io.hpp"

#include "cpdpo/text_format.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace cpdpo {

std::string run_csv_header(std::size_t num_constraints)
{
    std::string h = "t,V_r";
    for (std::size_t i = 1; i <= num_constraints; ++i)
        h += ",V_g_" + std::to_string(i);
    for (std::size_t i = 1; i <= num_constraints; ++i)
        h += ",lambda_" + std::to_string(i);
    h += ",R_t,V_t";
    return h;
}

void write_run_csv(const RunRecord& rec, std::ostream& out)
{
    const std::size_t m = rec.num_constraints;
    out << run_csv_header(m) << '\n';
    std::string line;
    for (std::size_t r = 0; r < rec.rows(); ++r) {
        line = std::to_string(rec.t[r]);
        line += ',';
        line += format_double(rec.v_r[r]);
        for (std::size_t i = 0; i < m; ++i) {
            line += ',';
            line += format_double(rec.value_g(r, i));
        }
        for (std::size_t i = 0; i < m; ++i) {
            line += ',';
            line += format_double(rec.lambda_at(r, i));
        }
        line += ',';
        line += format_double(rec.regret[r]);
        line += ',';
        line += format_double(rec.violation[r]);
        line += '\n';
        out << line;
    }
}

void write_run_csv(const RunRecord& rec, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    write_run_csv(rec, out);
}

namespace {

std::vector<std::string> split_commas(const std::string& text)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(text);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    if (!text.empty() && text.back() == ',')
        cells.emplace_back();
    return cells;
}

} // namespace

RunRecord read_run_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("empty run CSV");
    const auto header = split_commas(line);
    if (header.size() < 4 || (header.size() - 4) % 2 != 0)
        throw ParseError("malformed run CSV header");
    RunRecord rec;
    rec.num_constraints = (header.size() - 4) / 2;
    if (line != run_csv_header(rec.num_constraints))
        throw ParseError("unexpected run CSV header '" + line + "'");
    const std::size_t m = rec.num_constraints;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw ParseError("wrong number of columns on line " + std::to_string(line_no));
        rec.t.push_back(parse_uint(cells[0], line_no));
        rec.v_r.push_back(parse_double(cells[1], line_no));
        for (std::size_t i = 0; i < m; ++i)
            rec.v_g.push_back(parse_double(cells[2 + i], line_no));
        for (std::size_t i = 0; i < m; ++i)
            rec.lambda.push_back(parse_double(cells[2 + m + i], line_no));
        rec.regret.push_back(parse_double(cells[2 + 2 * m], line_no));
        rec.violation.push_back(parse_double(cells[3 + 2 * m], line_no));
    }
    return rec;
}

RunRecord read_run_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open '" + path + "'");
    return read_run_csv(in);
}

void write_run_summary(const RunSummary& s, std::ostream& out, bool with_timing)
{
    auto num = [&](const char* key, double v) { out << key << ' ' << format_double(v) << '\n'; };
    auto cnt = [&](const char* key, std::uint64_t v) { out << key << ' ' << v << '\n'; };
    out << "algorithm " << s.algorithm << '\n';
    cnt("seed", s.seed);
    cnt("T", s.episodes);
    num("delta", s.delta);
    num("rho", s.rho);
    num("OPT", s.opt);
    num("eta", s.primal.eta);
    num("gamma", s.primal.gamma);
    num("beta", s.primal.beta);
    out << "primal_mode " << primal_mode_name(s.primal.mode) << '\n';
    num("dual_step", s.dual_step);
    num("loss_scale", s.loss_scale);
    cnt("metric_every", s.metric_every);
    cnt("approximate", s.approximate ? 1 : 0);
    num("R_T", s.final_regret);
    num("V_T", s.final_violation);
    num("weak_R_T", s.weak_regret);
    num("weak_V_T", s.weak_violation);
    cnt("losses", s.losses);
    cnt("clamped_losses", s.clamped_losses);
    cnt("audited", s.audited ? 1 : 0);
    if (s.audited) {
        const CoverageTally& c = s.coverage;
        cnt("reward_events", c.reward_events);
        cnt("reward_violations", c.reward_violations);
        cnt("cost_events", c.cost_events);
        cnt("cost_violations", c.cost_violations);
        cnt("transition_events", c.transition_events);
        cnt("transition_violations", c.transition_violations);
        cnt("lagrangian_checks", c.lagrangian_checks);
        cnt("lagrangian_violations", c.lagrangian_violations);
        cnt("lagrangian_cor_violations", c.lagrangian_cor_violations);
    }
    if (with_timing)
        num("wall_seconds", s.wall_seconds);
}

void write_run_summary(const RunSummary& sum, const std::string& path, bool with_timing)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    write_run_summary(sum, out, with_timing);
}

RunSummary read_run_summary(std::istream& in)
{
    RunSummary s;
    for (const KvLine& kv : read_kv(in)) {
        const std::string& k = kv.key;
        auto num = [&] { return doubles_of(kv, 1)[0]; };
        auto cnt = [&] { return uints_of(kv, 1)[0]; };
        if (k == "algorithm") {
            if (kv.values.size() != 1)
                throw ParseError("'algorithm' expects one value on line " + std::to_string(kv.line));
            s.algorithm = kv.values[0];
        } else if (k == "seed") s.seed = cnt();
        else if (k == "T") s.episodes = cnt();
        else if (k == "delta") s.delta = num();
        else if (k == "rho") s.rho = num();
        else if (k == "OPT") s.opt = num();
        else if (k == "eta") s.primal.eta = num();
        else if (k == "gamma") s.primal.gamma = num();
        else if (k == "beta") s.primal.beta = num();
        else if (k == "primal_mode") {
            if (kv.values.size() != 1)
                throw ParseError("'primal_mode' expects one value on line " + std::to_string(kv.line));
            s.primal.mode = parse_primal_mode(kv.values[0]);
        } else if (k == "dual_step") s.dual_step = num();
        else if (k == "loss_scale") s.loss_scale = num();
        else if (k == "metric_every") s.metric_every = cnt();
        else if (k == "approximate") s.approximate = cnt() != 0;
        else if (k == "R_T") s.final_regret = num();
        else if (k == "V_T") s.final_violation = num();
        else if (k == "weak_R_T") s.weak_regret = num();
        else if (k == "weak_V_T") s.weak_violation = num();
        else if (k == "losses") s.losses = cnt();
        else if (k == "clamped_losses") s.clamped_losses = cnt();
        else if (k == "audited") s.audited = cnt() != 0;
        else if (k == "reward_events") s.coverage.reward_events = cnt();
        else if (k == "reward_violations") s.coverage.reward_violations = cnt();
        else if (k == "cost_events") s.coverage.cost_events = cnt();
        else if (k == "cost_violations") s.coverage.cost_violations = cnt();
        else if (k == "transition_events") s.coverage.transition_events = cnt();
        else if (k == "transition_violations") s.coverage.transition_violations = cnt();
        else if (k == "lagrangian_checks") s.coverage.lagrangian_checks = cnt();
        else if (k == "lagrangian_violations") s.coverage.lagrangian_violations = cnt();
        else if (k == "lagrangian_cor_violations") s.coverage.lagrangian_cor_violations = cnt();
        else if (k == "wall_seconds") s.wall_seconds = num();
    }
    return s;
}

RunSummary read_run_summary_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open '" + path + "'");
    return read_run_summary(in);
}

} // namespace cpdpo

#include "cpdpo/instance_io.hpp"

#include "cpdpo/text_format.hpp"

#include <fstream>
#include <sstream>

namespace cpdpo {

const char* noise_name(NoiseKind kind)
{
    return kind == NoiseKind::degenerate ? "degenerate" : "bernoulli";
}

NoiseKind parse_noise(const std::string& text, std::size_t line)
{
    if (text == "bernoulli")
        return NoiseKind::bernoulli;
    if (text == "degenerate")
        return NoiseKind::degenerate;
    throw ParseError("unknown noise kind '" + text + "' on line " + std::to_string(line));
}

RawInstance parse_instance(std::istream& in)
{
    RawInstance raw;
    bool have_layers = false, have_actions = false;
    for (const KvLine& kv : read_kv(in)) {
        const auto n = kv.values.size();
        auto idx = [&](std::size_t i) { return static_cast<std::size_t>(parse_uint(kv.values[i], kv.line)); };
        auto num = [&](std::size_t i) { return parse_double(kv.values[i], kv.line); };
        if (kv.key == "layers") {
            for (auto v : uints_of(kv))
                raw.layers.push_back(static_cast<std::size_t>(v));
            have_layers = true;
        } else if (kv.key == "actions") {
            raw.actions = static_cast<std::size_t>(uints_of(kv, 1).front());
            have_actions = true;
        } else if (kv.key == "thresholds") {
            raw.thresholds = doubles_of(kv);
        } else if (kv.key == "noise") {
            if (n == 1) {
                raw.default_noise = parse_noise(kv.values[0], kv.line);
            } else if (n == 5) {
                raw.noise.push_back({idx(0), idx(1), idx(2), parse_noise(kv.values[3], kv.line),
                                     parse_noise(kv.values[4], kv.line), kv.line});
            } else {
                throw ParseError("'noise' expects 1 or 5 values on line " + std::to_string(kv.line));
            }
        } else if (kv.key == "transition") {
            if (n != 5)
                throw ParseError("'transition' expects k x a x' p on line " + std::to_string(kv.line));
            raw.transitions.push_back({idx(0), idx(1), idx(2), idx(3), num(4), kv.line});
        } else if (kv.key == "reward_mean") {
            if (n != 4)
                throw ParseError("'reward_mean' expects k x a r on line " + std::to_string(kv.line));
            raw.reward_means.push_back({0, idx(0), idx(1), idx(2), num(3), kv.line});
        } else if (kv.key == "cost_means") {
            if (n != 5)
                throw ParseError("'cost_means' expects i k x a g on line " + std::to_string(kv.line));
            raw.cost_means.push_back({idx(0), idx(1), idx(2), idx(3), num(4), kv.line});
        } else {
            throw ParseError("unknown key '" + kv.key + "' on line " + std::to_string(kv.line));
        }
    }
    if (!have_layers)
        throw ParseError("missing 'layers'");
    if (!have_actions)
        throw ParseError("missing 'actions'");
    return raw;
}

RawInstance parse_instance_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open instance file '" + path + "'");
    return parse_instance(in);
}

CmdpInstance load_instance(const std::string& path) { return validate_instance(parse_instance_file(path)); }

void serialize_instance(const CmdpInstance& inst, std::ostream& out)
{
    const RawInstance raw = to_raw(inst);
    out << "# cpdpo instance\n";
    out << "layers";
    for (auto s : raw.layers)
        out << ' ' << s;
    out << "\nactions " << raw.actions << "\nthresholds";
    for (double a : raw.thresholds)
        out << ' ' << format_double(a);
    out << "\nnoise " << noise_name(raw.default_noise) << '\n';
    for (const auto& nz : raw.noise)
        out << "noise " << nz.layer << ' ' << nz.state << ' ' << nz.action << ' ' << noise_name(nz.reward) << ' '
            << noise_name(nz.cost) << '\n';
    for (const auto& t : raw.transitions)
        out << "transition " << t.layer << ' ' << t.state << ' ' << t.action << ' ' << t.next << ' '
            << format_double(t.prob) << '\n';
    for (const auto& r : raw.reward_means)
        out << "reward_mean " << r.layer << ' ' << r.state << ' ' << r.action << ' ' << format_double(r.value) << '\n';
    for (const auto& c : raw.cost_means)
        out << "cost_means " << c.constraint << ' ' << c.layer << ' ' << c.state << ' ' << c.action << ' '
            << format_double(c.value) << '\n';
}

std::string serialize_instance(const CmdpInstance& inst)
{
    std::ostringstream os;
    serialize_instance(inst, os);
    return os.str();
}

void save_instance(const CmdpInstance& inst, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write instance file '" + path + "'");
    serialize_instance(inst, out);
}

} // namespace cpdpo

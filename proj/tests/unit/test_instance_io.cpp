#include "doctest.h"
#include "support.hpp"

#include "cpdpo/instance_io.hpp"
#include "cpdpo/text_format.hpp"

#include <cstring>
#include <sstream>

using namespace cpdpo;
using namespace testsupport;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

CmdpInstance reparse(const std::string& text)
{
    std::istringstream in(text);
    return validate_instance(parse_instance(in));
}

} // namespace

TEST_CASE("format_double round-trips every double exactly")
{
    Rng rng(2);
    for (int i = 0; i < 10000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, static_cast<int>(rng.uniform() * 40) - 20);
        const double back = parse_double(format_double(v));
        CHECK(std::memcmp(&v, &back, sizeof v) == 0);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0) == "1");
}

TEST_CASE("serialize/parse/serialize is bit-identical")
{
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        CmdpInstance inst = random_instance(rng, random_layers(rng, 3, 3), 1 + trial % 3, trial % 3,
                                            trial % 2 ? NoiseKind::degenerate : NoiseKind::bernoulli);
        for (auto& a : inst.thresholds)
            a = rng.uniform() * static_cast<double>(inst.horizon());
        if (!inst.reward_noise.empty())
            inst.reward_noise[0] = NoiseKind::degenerate;
        const std::string text = serialize_instance(inst);
        const CmdpInstance back = reparse(text);
        CHECK(back.shape == inst.shape);
        CHECK(same_bits(back.transition.prob, inst.transition.prob));
        CHECK(same_bits(back.reward_mean, inst.reward_mean));
        REQUIRE(back.cost_means.size() == inst.cost_means.size());
        for (std::size_t i = 0; i < inst.cost_means.size(); ++i)
            CHECK(same_bits(back.cost_means[i], inst.cost_means[i]));
        CHECK(same_bits(back.thresholds, inst.thresholds));
        CHECK(back.reward_noise == inst.reward_noise);
        CHECK(back.cost_noise == inst.cost_noise);
        CHECK(serialize_instance(back) == text);
    }
}

TEST_CASE("to_raw/validate reproduces the dense instance")
{
    Rng rng(5);
    const CmdpInstance inst = random_instance(rng, {1, 3, 2, 1}, 2, 2);
    const CmdpInstance back = validate_instance(to_raw(inst));
    CHECK(same_bits(back.transition.prob, inst.transition.prob));
    CHECK(same_bits(back.reward_mean, inst.reward_mean));
}

TEST_CASE("parse errors are reported with their line")
{
    auto parse_error = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_instance(in);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    CHECK(parse_error("actions 1\n").find("missing 'layers'") != std::string::npos);
    CHECK(parse_error("layers 1 1\n").find("missing 'actions'") != std::string::npos);
    CHECK(parse_error("layers 1 1\nactions 1\nbogus 3\n").find("line 3") != std::string::npos);
    CHECK(parse_error("layers 1 1\nactions 1\ntransition 0 0 0 1\n").find("line 3") != std::string::npos);
    CHECK(parse_error("layers 1 1\nactions x\n") != "accepted");
    CHECK(parse_error("layers 1 1\nactions 1\nnoise gaussian\n").find("unknown noise") != std::string::npos);
}

TEST_CASE("per-pair noise overrides the default")
{
    const CmdpInstance inst = reparse("layers 1 1\nactions 2\nnoise degenerate\nnoise 0 0 1 bernoulli degenerate\n"
                                      "transition 0 0 0 0 1\ntransition 0 0 1 0 1\n");
    CHECK(inst.reward_noise[0] == NoiseKind::degenerate);
    CHECK(inst.reward_noise[1] == NoiseKind::bernoulli);
    CHECK(inst.cost_noise[1] == NoiseKind::degenerate);
}

TEST_CASE("shipped instances load and validate")
{
    const CmdpInstance ref = load_instance("data/reference.instance");
    CHECK(ref.horizon() == 4);
    CHECK(ref.shape.num_states() == 9);
    CHECK(ref.shape.num_actions() == 3);
    CHECK(ref.num_constraints() == 2);
    const CmdpInstance small = load_instance("data/small.instance");
    CHECK(small.horizon() == 3);
    CHECK(small.shape.num_states() == 5);
    CHECK(small.shape.num_actions() == 2);
}

#pragma once

#include "cpdpo/cmdp.hpp"

#include <iosfwd>
#include <string>

namespace cpdpo {

// Instance files are line-oriented text; see README.md.
//
//   layers 1 2 1            # sizes of X_0..X_L
//   actions 2
//   thresholds 1.5          # one alpha per constraint
//   noise bernoulli         # default noise: bernoulli | degenerate
//   noise 1 0 1 degenerate bernoulli   # per pair: k x a reward-kind cost-kind
//   transition 0 0 0 1 0.25 # k x a x' p   (x in layer k, x' in layer k+1)
//   reward_mean 0 0 1 0.5   # k x a r
//   cost_means 0 0 0 1 0.3  # i k x a g_i
//
// Unlisted transitions and means are 0.

/// Syntax-level parse; throws ParseError. Invariants are checked by validate_instance.
RawInstance parse_instance(std::istream& in);
RawInstance parse_instance_file(const std::string& path);

/// Parse + validate.
CmdpInstance load_instance(const std::string& path);

/// Writes every value with shortest round-trip formatting, so that
/// parse(serialize(inst)) reproduces inst bit for bit.
void serialize_instance(const CmdpInstance& inst, std::ostream& out);
std::string serialize_instance(const CmdpInstance& inst);
void save_instance(const CmdpInstance& inst, const std::string& path);

const char* noise_name(NoiseKind kind);
NoiseKind parse_noise(const std::string& text, std::size_t line = 0);

} // namespace cpdpo

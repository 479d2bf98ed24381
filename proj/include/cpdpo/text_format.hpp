#pragma once

// Line-oriented "key value value ..." text used by instance files, run summaries,
// estimator dumps and sweep specs. '#' starts a comment.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cpdpo {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KvLine {
    std::string key;
    std::vector<std::string> values;
    std::size_t line = 0;
};

std::vector<KvLine> read_kv(std::istream& in);

/// Last occurrence of each key.
std::map<std::string, KvLine> index_kv(const std::vector<KvLine>& lines);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text, std::size_t line = 0);
std::uint64_t parse_uint(std::string_view text, std::size_t line = 0);

/// Values of a line as doubles / unsigned integers, with an exact arity check when
/// `arity` is nonzero.
std::vector<double> doubles_of(const KvLine& kv, std::size_t arity = 0);
std::vector<std::uint64_t> uints_of(const KvLine& kv, std::size_t arity = 0);

} // namespace cpdpo

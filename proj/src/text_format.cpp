#include "cpdpo/text_format.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

namespace cpdpo {

namespace {

std::string where(std::size_t line)
{
    return line == 0 ? std::string{} : " on line " + std::to_string(line);
}

} // namespace

std::vector<KvLine> read_kv(std::istream& in)
{
    std::vector<KvLine> out;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (const auto hash = text.find('#'); hash != std::string::npos)
            text.erase(hash);
        std::istringstream tokens(text);
        KvLine kv;
        if (!(tokens >> kv.key))
            continue;
        std::string value;
        while (tokens >> value)
            kv.values.push_back(value);
        kv.line = line_no;
        out.push_back(std::move(kv));
    }
    return out;
}

std::map<std::string, KvLine> index_kv(const std::vector<KvLine>& lines)
{
    std::map<std::string, KvLine> out;
    for (const auto& kv : lines)
        out[kv.key] = kv;
    return out;
}

std::string format_double(double value)
{
    if (std::isnan(value))
        return "nan";
    if (std::isinf(value))
        return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::size_t line)
{
    if (text == "nan")
        return std::nan("");
    if (text == "inf")
        return HUGE_VAL;
    if (text == "-inf")
        return -HUGE_VAL;
    double value = 0.0;
    const char* first = text.data();
    // from_chars does not accept a leading '+'.
    if (!text.empty() && text.front() == '+')
        ++first;
    const auto res = std::from_chars(first, text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError("expected a number, got '" + std::string(text) + "'" + where(line));
    return value;
}

std::uint64_t parse_uint(std::string_view text, std::size_t line)
{
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ParseError("expected a non-negative integer, got '" + std::string(text) + "'" + where(line));
    return value;
}

std::vector<double> doubles_of(const KvLine& kv, std::size_t arity)
{
    if (arity != 0 && kv.values.size() != arity)
        throw ParseError("'" + kv.key + "' expects " + std::to_string(arity) + " values" + where(kv.line));
    std::vector<double> out;
    out.reserve(kv.values.size());
    for (const auto& v : kv.values)
        out.push_back(parse_double(v, kv.line));
    return out;
}

std::vector<std::uint64_t> uints_of(const KvLine& kv, std::size_t arity)
{
    if (arity != 0 && kv.values.size() != arity)
        throw ParseError("'" + kv.key + "' expects " + std::to_string(arity) + " values" + where(kv.line));
    std::vector<std::uint64_t> out;
    out.reserve(kv.values.size());
    for (const auto& v : kv.values)
        out.push_back(parse_uint(v, kv.line));
    return out;
}

} // namespace cpdpo

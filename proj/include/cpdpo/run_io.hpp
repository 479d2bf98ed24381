#pragma once

#include "cpdpo/dual.hpp"

#include <iosfwd>
#include <string>

namespace cpdpo {

/// Header line: t,V_r,V_g_1..V_g_m,lambda_1..lambda_m,R_t,V_t.
std::string run_csv_header(std::size_t num_constraints);

/// Rows in shortest round-trip decimal form; identical records give identical bytes.
void write_run_csv(const RunRecord& rec, std::ostream& out);
void write_run_csv(const RunRecord& rec, const std::string& path);

/// Parses a run CSV (rows only; the summary is left default). Throws ParseError.
RunRecord read_run_csv(std::istream& in);
RunRecord read_run_csv_file(const std::string& path);

/// Key-value summary. Wall-clock time is included only when `with_timing` is set.
void write_run_summary(const RunSummary& sum, std::ostream& out, bool with_timing = true);
void write_run_summary(const RunSummary& sum, const std::string& path, bool with_timing = true);
RunSummary read_run_summary(std::istream& in);
RunSummary read_run_summary_file(const std::string& path);

} // namespace cpdpo

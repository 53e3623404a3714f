#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "fragsim/experiments.hpp"

namespace fragsim {

/// The report without raw samples, in a stable key order.
Json report_json(const ConvergenceReport& report);

/// Compact JSON text ending in a newline; equal reports give equal bytes.
std::string report_text(const ConvergenceReport& report);

/// RFC 4180 style CSV with a header row and '.' decimals (17 significant digits).
void write_csv(std::ostream& out, const Table& table);

/// Quotes a CSV field when it contains a separator, quote or line break.
std::string csv_field(const std::string& field);

/// One JSON object per line: {"name": ..., "values": [...]}.
void write_raw_jsonl(std::ostream& out, const ConvergenceReport& report);

/// Writes report.json, one <table>.csv per table and, if requested, raw_samples.jsonl.
void write_report_files(const std::filesystem::path& dir, const ConvergenceReport& report, bool raw);

}  // namespace fragsim

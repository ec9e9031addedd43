#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mdlpdf/core_types.hpp"

namespace mdlpdf {

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has no header row
  std::vector<std::vector<std::string>> rows;
};

/// Parses comma-separated text. The first row is a header iff one of its
/// cells (ignoring `ignore_column` for header detection) is non-empty and
/// not a number.
CsvTable parse_csv(std::string_view text, std::optional<std::size_t> ignore_column = std::nullopt);
CsvTable read_csv(const std::filesystem::path& path, std::optional<std::size_t> ignore_column = std::nullopt);

/// Numeric table; empty cells become missing. Columns listed in `skip` are dropped.
SampleMatrix csv_to_samples(const CsvTable& table, const std::vector<std::size_t>& skip = {},
                            bool require_two_distinct = true);

/// Resolves a column given by header name or 0-based index; negative index counts from the end.
std::size_t resolve_column(const CsvTable& table, std::string_view spec);

std::vector<std::string> column_strings(const CsvTable& table, std::size_t col);

std::string format_double(double v);
std::string samples_to_csv(const SampleMatrix& m);

}  // namespace mdlpdf

#include "mdlpdf/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "mdlpdf/serialization.hpp"

namespace mdlpdf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

}  // namespace

CsvTable parse_csv(std::string_view text, std::optional<std::size_t> ignore_column) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  CsvTable table;
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (trim(line).empty()) continue;
    rows.push_back(split_line(line));
  }
  if (rows.empty()) fail(ErrorCode::EmptyInput, "CSV input has no rows");
  const auto& first = rows.front();
  bool header = false;
  for (std::size_t c = 0; c < first.size(); ++c) {
    if (ignore_column && *ignore_column == c) continue;
    if (!first[c].empty() && !parse_number(first[c])) header = true;
  }
  if (header) {
    table.header = first;
    rows.erase(rows.begin());
  }
  const std::size_t width = header ? table.header.size() : rows.front().size();
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].size() != width)
      fail(ErrorCode::ShapeMismatch, "CSV row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                         " cells, expected " + std::to_string(width));
  table.rows = std::move(rows);
  return table;
}

CsvTable read_csv(const std::filesystem::path& path, std::optional<std::size_t> ignore_column) {
  return parse_csv(read_text_file(path), ignore_column);
}

SampleMatrix csv_to_samples(const CsvTable& table, const std::vector<std::size_t>& skip, bool require_two_distinct) {
  if (table.rows.empty()) fail(ErrorCode::EmptyInput, "CSV has a header but no data rows");
  const std::size_t width = table.rows.front().size();
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < width; ++c)
    if (std::find(skip.begin(), skip.end(), c) == skip.end()) keep.push_back(c);
  RawTable raw;
  raw.rows = table.rows.size();
  raw.cols = keep.size();
  for (std::size_t c : keep)
    if (!table.header.empty()) raw.dim_names.push_back(table.header[c]);
  raw.values.reserve(raw.rows * raw.cols);
  raw.observed.reserve(raw.rows * raw.cols);
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    for (std::size_t c : keep) {
      const std::string& cell = table.rows[t][c];
      if (trim(cell).empty()) {
        raw.values.push_back(0.0);
        raw.observed.push_back(0);
        continue;
      }
      const auto v = parse_number(cell);
      if (!v)
        fail(ErrorCode::InvalidArgument, "non-numeric cell '" + cell + "' at data row " + std::to_string(t + 1) +
                                             ", column " + std::to_string(c));
      raw.values.push_back(*v);
      raw.observed.push_back(1);
    }
  }
  return validate_sample_matrix(std::move(raw), require_two_distinct);
}

std::size_t resolve_column(const CsvTable& table, std::string_view spec) {
  const std::size_t width = table.header.empty() ? table.rows.front().size() : table.header.size();
  const auto it = std::find(table.header.begin(), table.header.end(), spec);
  if (it != table.header.end()) return static_cast<std::size_t>(it - table.header.begin());
  long idx = 0;
  const auto [ptr, ec] = std::from_chars(spec.data(), spec.data() + spec.size(), idx);
  if (ec != std::errc() || ptr != spec.data() + spec.size())
    fail(ErrorCode::InvalidArgument, "unknown column '" + std::string(spec) + "'");
  if (idx < 0) idx += static_cast<long>(width);
  if (idx < 0 || static_cast<std::size_t>(idx) >= width)
    fail(ErrorCode::InvalidArgument, "column index " + std::string(spec) + " out of range");
  return static_cast<std::size_t>(idx);
}

std::vector<std::string> column_strings(const CsvTable& table, std::size_t col) {
  std::vector<std::string> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back(row.at(col));
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string samples_to_csv(const SampleMatrix& m) {
  std::string out;
  if (!m.dim_names().empty()) {
    for (std::size_t n = 0; n < m.cols(); ++n) out += (n ? "," : "") + m.dim_names()[n];
  } else {
    for (std::size_t n = 0; n < m.cols(); ++n) out += (n ? ",x" : "x") + std::to_string(n + 1);
  }
  out += '\n';
  for (std::size_t t = 0; t < m.rows(); ++t) {
    for (std::size_t n = 0; n < m.cols(); ++n) {
      if (n) out += ',';
      if (m.observed(t, n)) out += format_double(m.value(t, n));
    }
    out += '\n';
  }
  return out;
}

}  // namespace mdlpdf

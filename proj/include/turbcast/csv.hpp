#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace turbcast {

// Minimal CSV support for the project's file formats: comma-separated,
// no quoting, '#' lines are comments, empty cell means missing value.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  // column index by exact header name, -1 if absent
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(const std::string& line);

// Numeric cell helpers. Empty string -> nullopt; garbage -> throws io_error.
std::optional<double> parse_cell(const std::string& cell);

// Shortest round-trip double formatting; used by every CSV writer so that
// outputs are byte-stable.
std::string format_double(double v);

}  // namespace turbcast

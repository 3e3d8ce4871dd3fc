#include "turbcast/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "turbcast/common.hpp"

namespace turbcast {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open file: " + path.string());
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      table.header = split_csv_line(line);
      have_header = true;
      continue;
    }
    table.rows.push_back(split_csv_line(line));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw io_error("empty input: " + path.string());
  return table;
}

std::optional<double> parse_cell(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* begin = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') throw io_error("bad numeric cell: '" + cell + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  // %.17g round-trips any double; trim to the shortest representation that
  // still parses back exactly.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace turbcast

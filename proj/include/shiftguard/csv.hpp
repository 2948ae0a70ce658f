#pragma once

#include <string>
#include <vector>

namespace shiftguard {

// Minimal CSV table: a header row plus string cells. Values are written with
// enough digits to round-trip doubles; writes go through a temp file and an
// atomic rename.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws ParseError naming the column
  double number(std::size_t row, int col) const;
};

std::string format_double(double v);

void write_csv(const CsvTable& table, const std::string& path);
CsvTable read_csv(const std::string& path);

}  // namespace shiftguard

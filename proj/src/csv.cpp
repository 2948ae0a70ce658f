#include "shiftguard/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "shiftguard/errors.hpp"

namespace shiftguard {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  throw ParseError("missing CSV column: " + name);
}

double CsvTable::number(std::size_t row, int col) const {
  const std::string& cell = rows.at(row).at(col);
  if (cell.empty()) throw ParseError("empty CSV cell");
  return std::stod(cell);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot open " + tmp + " for writing");
    for (std::size_t i = 0; i < table.header.size(); ++i) {
      if (i) out << ',';
      out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << row[i];
      }
      out << '\n';
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move " + tmp + " into place");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      table.header = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  if (first) throw ParseError("empty CSV file: " + path);
  return table;
}

}  // namespace shiftguard

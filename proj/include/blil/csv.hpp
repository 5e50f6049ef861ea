#pragma once

// Minimal CSV reading/writing. Reals are printed with 17 significant digits so
// that every double round-trips exactly.

#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "blil/error.hpp"

namespace blil {

inline std::string fmt17(double x) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DomainError("missing CSV column '" + name + "'");
  }

  std::vector<double> numeric(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
      if (c >= r.size()) throw ParseError("short CSV row", name);
      try {
        out.push_back(r[c].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(r[c]));
      } catch (const std::logic_error&) {
        throw ParseError("non-numeric CSV cell in column " + name, r[c]);
      }
    }
    return out;
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
  }
  return t;
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
  auto row = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  row(t.header);
  for (const auto& r : t.rows) row(r);
}

}  // namespace blil

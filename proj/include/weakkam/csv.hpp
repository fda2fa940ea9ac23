#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace weakkam {

/// Decimal with 12 significant digits; the single numeric format of every
/// exported table.
inline std::string fmt12(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline void write_csv_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

}  // namespace weakkam

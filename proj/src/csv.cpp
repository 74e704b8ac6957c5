#include "qlo/csv.hpp"

#include <cmath>
#include <cstdio>

namespace qlo {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header)
    : out_(out) {
  bool first = true;
  for (std::string_view h : header) {
    if (!first) out_ << ',';
    first = false;
    out_ << h;
  }
  out_ << '\n';
}

}  // namespace qlo

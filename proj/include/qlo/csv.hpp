#pragma once

#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

namespace qlo {

/// "%.17g" rendering in the C locale. Non-finite values
/// render as "nan", "inf" or "-inf".
std::string format_double(double x);

/// Writes comma-separated rows with LF line endings. Doubles are written with
/// 17 significant digits; empty optionals become empty fields.
class CsvWriter {
public:
  CsvWriter(std::ostream& out, std::initializer_list<std::string_view> header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((put(fields, first)), ...);
    out_ << '\n';
  }

private:
  template <typename T>
  void put(const T& value, bool& first) {
    if (!first) out_ << ',';
    first = false;
    write(value);
  }

  void write(double x) { out_ << format_double(x); }
  void write(std::string_view s) { out_ << s; }
  void write(const std::string& s) { out_ << s; }
  void write(const char* s) { out_ << s; }

  template <typename T>
    requires std::is_integral_v<T>
  void write(T x) {
    out_ << x;
  }

  template <typename T>
  void write(const std::optional<T>& x) {
    if (x) write(*x);
  }

  std::ostream& out_;
};

}  // namespace qlo

#include "ksg/csv.hpp"

#include <charconv>
#include <cmath>

#include "ksg/error.hpp"

namespace ksg {

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (const auto& n : names) field(n);
  end_row();
}

CsvWriter& CsvWriter::field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") != std::string::npos)
    fail(ErrorKind::InvalidArgument, "CSV field needs quoting: " + s);
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

CsvWriter& CsvWriter::field(double x) { return field(format_real(x)); }
CsvWriter& CsvWriter::field(long long x) { return field(std::to_string(x)); }

void CsvWriter::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace ksg

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ksg {

/// Shortest decimal text that parses back to exactly `x` ("inf", "-inf",
/// "nan" for non-finite values).
std::string format_real(double x);

/// Minimal CSV writer: fields never need quoting in our outputs, so a field
/// containing a comma, quote or newline is rejected with InvalidArgument.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  CsvWriter& field(const std::string& s);
  CsvWriter& field(double x);
  CsvWriter& field(long long x);
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace ksg

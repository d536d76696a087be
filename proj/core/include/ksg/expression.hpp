#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ksg {

/// Arithmetic expression over named variables, compiled once and evaluated
/// many times. Grammar: numbers, variables, named constants, + - * / ^
/// (right associative), unary minus, parentheses, and the functions
/// exp log sqrt sin cos tan tanh abs pow min max. `pi` is predefined.
///
/// Example: Expression::parse("chi * u / (1 + v)", {"u", "v"}, {{"chi", 2.0}}).
class Expression {
 public:
  /// Throws Parse with the character offset of the problem.
  static Expression parse(std::string_view text, std::vector<std::string> variables,
                          const std::map<std::string, double>& constants = {});

  /// `values` follows the order of the variable list given to parse().
  double operator()(std::span<const double> values) const;
  double operator()(double a, double b) const;

  const std::string& text() const noexcept { return text_; }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  /// True if the expression mentions the variable.
  bool uses(std::string_view variable) const;

  struct Node;  // parse tree, defined in the implementation

 private:
  std::string text_;
  std::vector<std::string> variables_;
  std::shared_ptr<const Node> root_;
  std::vector<bool> used_;
};

}  // namespace ksg

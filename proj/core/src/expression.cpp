#include "ksg/expression.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>

#include "ksg/error.hpp"

namespace ksg {

struct Expression::Node {
  enum class Op { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call } op = Op::Const;
  double value = 0.0;
  std::size_t var = 0;
  double (*fn1)(double) = nullptr;
  double (*fn2)(double, double) = nullptr;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(std::span<const double> v) const {
    switch (op) {
      case Op::Const: return value;
      case Op::Var: return v[var];
      case Op::Neg: return -args[0]->eval(v);
      case Op::Add: return args[0]->eval(v) + args[1]->eval(v);
      case Op::Sub: return args[0]->eval(v) - args[1]->eval(v);
      case Op::Mul: return args[0]->eval(v) * args[1]->eval(v);
      case Op::Div: return args[0]->eval(v) / args[1]->eval(v);
      case Op::Pow: return std::pow(args[0]->eval(v), args[1]->eval(v));
      case Op::Call:
        return fn1 ? fn1(args[0]->eval(v)) : fn2(args[0]->eval(v), args[1]->eval(v));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

double f_exp(double x) { return std::exp(x); }
double f_log(double x) { return std::log(x); }
double f_sqrt(double x) { return std::sqrt(x); }
double f_sin(double x) { return std::sin(x); }
double f_cos(double x) { return std::cos(x); }
double f_tan(double x) { return std::tan(x); }
double f_tanh(double x) { return std::tanh(x); }
double f_abs(double x) { return std::abs(x); }
double f_pow(double a, double b) { return std::pow(a, b); }
double f_min(double a, double b) { return std::min(a, b); }
double f_max(double a, double b) { return std::max(a, b); }

class Parser {
 public:
  Parser(std::string_view text, const std::vector<std::string>& vars, const std::map<std::string, double>& consts,
         std::vector<bool>& used)
      : s_(text), vars_(vars), consts_(consts), used_(used) {}

  NodePtr run() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  using Node = Expression::Node;
  using Op = Node::Op;

  [[noreturn]] void error(const std::string& msg) const {
    fail(ErrorKind::Parse, "expression '" + std::string(s_) + "' at offset " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  static NodePtr binary(Op op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = {std::move(a), std::move(b)};
    return n;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      if (eat('+'))
        lhs = binary(Op::Add, lhs, term());
      else if (eat('-'))
        lhs = binary(Op::Sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    while (true) {
      if (eat('*'))
        lhs = binary(Op::Mul, lhs, unary());
      else if (eat('/'))
        lhs = binary(Op::Div, lhs, unary());
      else
        return lhs;
    }
  }

  // Unary minus binds looser than ^, so -u^2 = -(u^2).
  NodePtr unary() {
    if (eat('-')) {
      auto n = std::make_shared<Node>();
      n->op = Op::Neg;
      n->args = {unary()};
      return n;
    }
    if (eat('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (eat('^')) return binary(Op::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr n = expr();
      if (!eat(')')) error("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    error("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    double x = 0.0;
    const char* begin = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(begin, s_.data() + s_.size(), x);
    if (ec != std::errc()) error("bad number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    auto n = std::make_shared<Node>();
    n->value = x;
    return n;
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id(s_.substr(start, pos_ - start));

    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      auto n = std::make_shared<Node>();
      n->op = Op::Call;
      static const std::map<std::string, double (*)(double)> unary_fns{
          {"exp", f_exp}, {"log", f_log}, {"sqrt", f_sqrt}, {"sin", f_sin},  {"cos", f_cos},
          {"tan", f_tan}, {"tanh", f_tanh}, {"abs", f_abs}};
      static const std::map<std::string, double (*)(double, double)> binary_fns{
          {"pow", f_pow}, {"min", f_min}, {"max", f_max}};
      if (auto it = unary_fns.find(id); it != unary_fns.end()) {
        n->fn1 = it->second;
        n->args = {expr()};
      } else if (auto jt = binary_fns.find(id); jt != binary_fns.end()) {
        n->fn2 = jt->second;
        NodePtr a = expr();
        if (!eat(',')) error(id + " takes two arguments");
        n->args = {a, expr()};
      } else {
        pos_ = start;
        error("unknown function '" + id + "'");
      }
      if (!eat(')')) error("expected ')'");
      return n;
    }

    auto n = std::make_shared<Node>();
    if (auto it = std::find(vars_.begin(), vars_.end(), id); it != vars_.end()) {
      n->op = Op::Var;
      n->var = static_cast<std::size_t>(it - vars_.begin());
      used_[n->var] = true;
      return n;
    }
    if (auto it = consts_.find(id); it != consts_.end()) {
      n->value = it->second;
      return n;
    }
    if (id == "pi") {
      n->value = std::numbers::pi;
      return n;
    }
    pos_ = start;
    error("unknown name '" + id + "'");
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  const std::vector<std::string>& vars_;
  const std::map<std::string, double>& consts_;
  std::vector<bool>& used_;
};

}  // namespace

Expression Expression::parse(std::string_view text, std::vector<std::string> variables,
                             const std::map<std::string, double>& constants) {
  Expression e;
  e.text_ = std::string(text);
  e.variables_ = std::move(variables);
  e.used_.assign(e.variables_.size(), false);
  Parser p(e.text_, e.variables_, constants, e.used_);
  e.root_ = p.run();
  return e;
}

double Expression::operator()(std::span<const double> values) const {
  if (values.size() != variables_.size())
    fail(ErrorKind::InvalidArgument, "expression '" + text_ + "' expects " + std::to_string(variables_.size()) +
                                         " values");
  return root_->eval(values);
}

double Expression::operator()(double a, double b) const {
  const double v[2] = {a, b};
  return (*this)(std::span<const double>(v, 2));
}

bool Expression::uses(std::string_view variable) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i] == variable) return used_[i];
  return false;
}

}  // namespace ksg

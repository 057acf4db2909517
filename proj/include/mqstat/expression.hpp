#ifndef MQSTAT_EXPRESSION_HPP
#define MQSTAT_EXPRESSION_HPP

// Small arithmetic expression language for user-supplied phi.
//
//   expr    := compare
//   compare := sum (('<' | '<=' | '>' | '>=' | '==' | '!=') sum)?
//   sum     := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := atom ('^' unary)?
//   atom    := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Variables are x1..xd; x, y, z alias x1, x2, x3. Comparisons yield 1 or 0.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <charconv>
#include <vector>

#include "mqstat/errors.hpp"
#include "mqstat/model.hpp"

namespace mqstat::expr {

class Node {
public:
  virtual ~Node() = default;
  virtual double eval(std::span<const double> x) const = 0;
};

using NodePtr = std::shared_ptr<const Node>;

namespace detail {

struct Number final : Node {
  double v;
  explicit Number(double value) : v(value) {}
  double eval(std::span<const double>) const override { return v; }
};

struct Var final : Node {
  std::size_t index;
  explicit Var(std::size_t i) : index(i) {}
  double eval(std::span<const double> x) const override { return x[index]; }
};

struct Unary final : Node {
  char op;
  NodePtr a;
  Unary(char o, NodePtr n) : op(o), a(std::move(n)) {}
  double eval(std::span<const double> x) const override { return -a->eval(x); }
};

struct Binary final : Node {
  std::string op;
  NodePtr a, b;
  Binary(std::string o, NodePtr l, NodePtr r) : op(std::move(o)), a(std::move(l)), b(std::move(r)) {}
  double eval(std::span<const double> x) const override {
    const double l = a->eval(x), r = b->eval(x);
    switch (op[0]) {
    case '+': return l + r;
    case '-': return l - r;
    case '*': return l * r;
    case '/': return l / r;
    case '^': return std::pow(l, r);
    case '<': return op.size() == 1 ? (l < r ? 1.0 : 0.0) : (l <= r ? 1.0 : 0.0);
    case '>': return op.size() == 1 ? (l > r ? 1.0 : 0.0) : (l >= r ? 1.0 : 0.0);
    case '=': return l == r ? 1.0 : 0.0;
    case '!': return l != r ? 1.0 : 0.0;
    }
    return 0.0;
  }
};

struct Call final : Node {
  std::string name;
  std::vector<NodePtr> args;
  Call(std::string n, std::vector<NodePtr> a) : name(std::move(n)), args(std::move(a)) {}
  double eval(std::span<const double> x) const override {
    const double a0 = args[0]->eval(x);
    if (name == "exp") return std::exp(a0);
    if (name == "log") return std::log(a0);
    if (name == "sqrt") return std::sqrt(a0);
    if (name == "abs") return std::abs(a0);
    if (name == "sin") return std::sin(a0);
    if (name == "cos") return std::cos(a0);
    const double a1 = args[1]->eval(x);
    if (name == "pow") return std::pow(a0, a1);
    if (name == "min") return std::min(a0, a1);
    return std::max(a0, a1);
  }
};

class Parser {
public:
  Parser(std::string_view text, std::size_t dim) : s_(text), dim_(dim) {}

  NodePtr parse() {
    auto n = compare();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

  std::size_t max_var() const noexcept { return max_var_; }

private:
  [[noreturn]] void fail(const std::string &msg) const {
    throw ConfigError("expression: " + msg + " at position " + std::to_string(pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(std::string_view tok) {
    skip();
    if (s_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  NodePtr compare() {
    auto l = sum();
    for (std::string_view op : {"<=", ">=", "==", "!=", "<", ">"}) {
      if (eat(op)) return std::make_shared<Binary>(std::string(op), l, sum());
    }
    return l;
  }

  NodePtr sum() {
    auto l = product();
    for (;;) {
      if (eat("+")) l = std::make_shared<Binary>("+", l, product());
      else if (eat("-")) l = std::make_shared<Binary>("-", l, product());
      else return l;
    }
  }

  NodePtr product() {
    auto l = unary();
    for (;;) {
      if (eat("*")) l = std::make_shared<Binary>("*", l, unary());
      else if (eat("/")) l = std::make_shared<Binary>("/", l, unary());
      else return l;
    }
  }

  NodePtr unary() {
    if (eat("-")) return std::make_shared<Unary>('-', unary());
    if (eat("+")) return unary();
    return power();
  }

  NodePtr power() {
    auto base = atom();
    // Right associative; the exponent may carry a sign.
    if (eat("^")) return std::make_shared<Binary>("^", base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    const char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = compare();
      if (!eat(")")) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return name();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    double v = 0.0;
    const char *first = s_.data() + pos_;
    const auto [ptr, ec] = std::from_chars(first, s_.data() + s_.size(), v);
    if (ec != std::errc()) fail("bad number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return std::make_shared<Number>(v);
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
      ++pos_;
    }
    const std::string id(s_.substr(start, pos_ - start));
    if (eat("(")) {
      std::vector<NodePtr> args{compare()};
      while (eat(",")) args.push_back(compare());
      if (!eat(")")) fail("expected ')' after arguments of " + id);
      std::size_t want = 0;
      if (id == "exp" || id == "log" || id == "sqrt" || id == "abs" || id == "sin" || id == "cos") want = 1;
      else if (id == "pow" || id == "min" || id == "max") want = 2;
      else fail("unknown function '" + id + "'");
      if (args.size() != want) fail(id + " takes " + std::to_string(want) + " argument(s)");
      return std::make_shared<Call>(id, std::move(args));
    }
    if (id == "pi") return std::make_shared<Number>(std::numbers::pi);
    if (id == "e") return std::make_shared<Number>(std::numbers::e);
    std::size_t index = 0;
    if (id == "x") index = 1;
    else if (id == "y") index = 2;
    else if (id == "z") index = 3;
    else if (id.size() > 1 && id[0] == 'x') {
      const auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), index);
      if (ec != std::errc() || ptr != id.data() + id.size() || index == 0) fail("bad variable '" + id + "'");
    } else {
      fail("unknown name '" + id + "'");
    }
    if (index > dim_) {
      fail("variable '" + id + "' exceeds dimension " + std::to_string(dim_));
    }
    max_var_ = std::max(max_var_, index);
    return std::make_shared<Var>(index - 1);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t dim_;
  std::size_t max_var_ = 0;
};

} // namespace detail

inline NodePtr parse(std::string_view text, std::size_t dim) {
  detail::Parser p(text, dim);
  return p.parse();
}

/// phi given by an expression over x1..x_dim.
inline FunctionSpec function(const std::string &text, std::size_t dim) {
  if (dim == 0) throw ConfigError("expression: dimension must be positive");
  auto root = parse(text, dim);
  return FunctionSpec(
      dim, [root](std::span<const double> x) { return root->eval(x); }, "expr:" + text);
}

} // namespace mqstat::expr

#endif // MQSTAT_EXPRESSION_HPP

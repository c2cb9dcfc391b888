#include "heislab/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>

namespace heislab {

ParseError::ParseError(std::size_t position, const std::string& what,
                       const std::string& text)
    : Error(ErrorKind::config, "expression",
            "parse error at position " + std::to_string(position + 1) + ": " + what +
                "\n  " + text + "\n  " + std::string(position, ' ') + "^"),
      position_(position) {}

struct Expression::Node {
  enum class Op { constant, variable, add, sub, mul, div, pow, neg, call };
  Op op = Op::constant;
  double value = 0.0;
  int var = 0;
  double (*fn)(double) = nullptr;
  std::shared_ptr<const Node> lhs, rhs;

  double eval(std::span<const double> c) const {
    switch (op) {
      case Op::constant: return value;
      case Op::variable: return c[var];
      case Op::add: return lhs->eval(c) + rhs->eval(c);
      case Op::sub: return lhs->eval(c) - rhs->eval(c);
      case Op::mul: return lhs->eval(c) * rhs->eval(c);
      case Op::div: return lhs->eval(c) / rhs->eval(c);
      case Op::pow: return std::pow(lhs->eval(c), rhs->eval(c));
      case Op::neg: return -lhs->eval(c);
      case Op::call: return fn(lhs->eval(c));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr) {
  auto node = std::make_shared<Expression::Node>();
  node->op = op;
  node->lhs = std::move(l);
  node->rhs = std::move(r);
  return node;
}

class Parser {
 public:
  Parser(const std::string& text, int n) : s_(text), n_(n) {}

  NodePtr parse() {
    NodePtr root = expr();
    skip();
    if (pos_ != s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void error(const std::string& what) const { throw ParseError(pos_, what, s_); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::add, lhs, term());
      } else if (accept('-')) {
        lhs = make(Op::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make(Op::div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make(Op::pow, base, unary());
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) error("unexpected end of expression");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr inner = expr();
      if (!accept(')')) error("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return name();
    error("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) error("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto node = std::make_shared<Expression::Node>();
    node->value = v;
    return node;
  }

  NodePtr name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);
    if (accept('(')) {
      double (*fn)(double) = lookup(id);
      if (!fn) {
        pos_ = start;
        error("unknown function '" + id + "'");
      }
      NodePtr arg = expr();
      if (!accept(')')) error("expected ')'");
      auto node = std::make_shared<Expression::Node>();
      node->op = Op::call;
      node->fn = fn;
      node->lhs = std::move(arg);
      return node;
    }
    auto node = std::make_shared<Expression::Node>();
    if (id == "pi") {
      node->value = std::numbers::pi;
      return node;
    }
    if (id == "e") {
      node->value = std::numbers::e;
      return node;
    }
    node->op = Op::variable;
    if (id == "t") {
      node->var = 2 * n_;
      return node;
    }
    if (id == "x" || id == "y") {
      node->var = id == "x" ? 0 : n_;
      return node;
    }
    if ((id[0] == 'x' || id[0] == 'y') && id.size() > 1) {
      const std::string digits = id.substr(1);
      if (digits.find_first_not_of("0123456789") == std::string::npos) {
        const int j = std::stoi(digits);
        if (j >= 1 && j <= n_) {
          node->var = (id[0] == 'x' ? 0 : n_) + j - 1;
          return node;
        }
      }
    }
    pos_ = start;
    error("unknown variable '" + id + "'");
  }

  static double (*lookup(const std::string& id))(double) {
    if (id == "sin") return [](double v) { return std::sin(v); };
    if (id == "cos") return [](double v) { return std::cos(v); };
    if (id == "tan") return [](double v) { return std::tan(v); };
    if (id == "exp") return [](double v) { return std::exp(v); };
    if (id == "log") return [](double v) { return std::log(v); };
    if (id == "sqrt") return [](double v) { return std::sqrt(v); };
    if (id == "abs") return [](double v) { return std::abs(v); };
    if (id == "tanh") return [](double v) { return std::tanh(v); };
    if (id == "sinh") return [](double v) { return std::sinh(v); };
    if (id == "cosh") return [](double v) { return std::cosh(v); };
    return nullptr;
  }

  const std::string& s_;
  int n_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, int n) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, n).parse();
  return e;
}

double Expression::evaluate(std::span<const double> coords) const { return root_->eval(coords); }

}  // namespace heislab

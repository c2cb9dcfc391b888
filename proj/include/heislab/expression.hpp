#pragma once

// Closed-form scalar expressions in the coordinates of H_n, used for
// conformal factors and measure densities given as text.
//
// Grammar: expr := term (('+'|'-') term)*, term := unary (('*'|'/') unary)*,
// unary := ('+'|'-') unary | power, power := atom ('^' unary)?,
// atom := number | name | name '(' expr ')' | '(' expr ')'.
// Names: x, y, t (aliases for x1, y1), x1..xn, y1..yn, pi, e.
// Functions: sin cos tan exp log sqrt abs tanh sinh cosh.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "heislab/error.hpp"

namespace heislab {

class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what, const std::string& text);
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  struct Node;

  /// Parses `text` for a space of dimension n. Throws ParseError.
  static Expression parse(const std::string& text, int n);

  /// Evaluates at coordinates (x^1..x^n, y^1..y^n, t).
  double evaluate(std::span<const double> coords) const;

  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace heislab

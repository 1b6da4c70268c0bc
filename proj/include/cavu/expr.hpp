#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>

namespace cavu {

// Parse failure; `offset` is the byte position in the source text.
struct ExprError : std::runtime_error {
  std::size_t offset;
  ExprError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"),
        offset(off) {}
};

// Runtime evaluation failure (division by zero, non-finite result).
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Arithmetic expressions in the single variable y.
//
// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := NUMBER | 'y' | FUNC '(' args ')' | '-' factor | '(' expr ')'
//
// Functions: exp, tanh, sin, cos, abs (unary); min, max (binary).
// Immutable after parsing; cheap to copy and safe to share across threads.
class Expr {
 public:
  Expr() = default;

  static Expr parse(const std::string& text);

  // Deterministic IEEE-754 double evaluation; identical inputs give
  // bit-identical results. Throws EvalError on division by zero or a
  // non-finite intermediate value.
  double eval(double y) const;

  // Canonical source form; parse(pretty()) reproduces an equal tree.
  std::string pretty() const;

  bool equals(const Expr& other) const;
  bool empty() const { return root_ == nullptr; }

  struct Node;  // opaque AST node, defined in the implementation

 private:
  std::shared_ptr<const Node> root_;
};

}  // namespace cavu

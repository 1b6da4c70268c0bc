#include "cavu/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <vector>

namespace cavu {

namespace {

enum class Op {
  kLiteral,
  kVar,
  kNeg,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kExp,
  kTanh,
  kSin,
  kCos,
  kAbs,
  kMin,
  kMax,
};

int arity(Op op) {
  switch (op) {
    case Op::kLiteral:
    case Op::kVar:
      return 0;
    case Op::kNeg:
    case Op::kExp:
    case Op::kTanh:
    case Op::kSin:
    case Op::kCos:
    case Op::kAbs:
      return 1;
    default:
      return 2;
  }
}

const char* func_name(Op op) {
  switch (op) {
    case Op::kExp: return "exp";
    case Op::kTanh: return "tanh";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kAbs: return "abs";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    default: return "";
  }
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

struct Expr::Node {
  Op op = Op::kLiteral;
  double value = 0.0;
  std::shared_ptr<const Node> lhs, rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_node(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr,
                  double value = 0.0) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->value = value;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr run() {
    skip_ws();
    if (pos_ >= text_.size()) throw ExprError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ExprError("unexpected trailing input", pos_);
    return e;
  }

 private:
  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        lhs = make_node(Op::kAdd, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_node(Op::kSub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        lhs = make_node(Op::kMul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = make_node(Op::kDiv, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_factor() {
    skip_ws();
    if (pos_ >= text_.size()) throw ExprError("expected a factor", pos_);
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      return make_node(Op::kNeg, parse_factor());
    }
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    throw ExprError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) throw ExprError("malformed number", start);
    pos_ += static_cast<std::size_t>(end - begin);
    return make_node(Op::kLiteral, nullptr, nullptr, value);
  }

  NodePtr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           std::isalpha(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "y") return make_node(Op::kVar);

    Op op;
    if (name == "exp") op = Op::kExp;
    else if (name == "tanh") op = Op::kTanh;
    else if (name == "sin") op = Op::kSin;
    else if (name == "cos") op = Op::kCos;
    else if (name == "abs") op = Op::kAbs;
    else if (name == "min") op = Op::kMin;
    else if (name == "max") op = Op::kMax;
    else throw ExprError("unknown identifier '" + name + "'", start);

    expect('(');
    NodePtr a = parse_expr();
    if (arity(op) == 1) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ',')
        throw ExprError(std::string(func_name(op)) + " takes one argument",
                        pos_);
      expect(')');
      return make_node(op, a);
    }
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != ',')
      throw ExprError(std::string(func_name(op)) + " takes two arguments",
                      pos_);
    ++pos_;
    NodePtr b = parse_expr();
    expect(')');
    return make_node(op, a, b);
  }

  void expect(char c) {
    skip_ws();
    if (pos_ >= text_.size() || text_[pos_] != c)
      throw ExprError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

double eval_node(const Expr::Node& n, double y) {
  switch (n.op) {
    case Op::kLiteral: return n.value;
    case Op::kVar: return y;
    case Op::kNeg: return -eval_node(*n.lhs, y);
    case Op::kAdd: return eval_node(*n.lhs, y) + eval_node(*n.rhs, y);
    case Op::kSub: return eval_node(*n.lhs, y) - eval_node(*n.rhs, y);
    case Op::kMul: return eval_node(*n.lhs, y) * eval_node(*n.rhs, y);
    case Op::kDiv: {
      const double denom = eval_node(*n.rhs, y);
      if (denom == 0.0) throw EvalError("division by zero");
      return eval_node(*n.lhs, y) / denom;
    }
    case Op::kExp: return std::exp(eval_node(*n.lhs, y));
    case Op::kTanh: return std::tanh(eval_node(*n.lhs, y));
    case Op::kSin: return std::sin(eval_node(*n.lhs, y));
    case Op::kCos: return std::cos(eval_node(*n.lhs, y));
    case Op::kAbs: return std::abs(eval_node(*n.lhs, y));
    case Op::kMin:
      return std::fmin(eval_node(*n.lhs, y), eval_node(*n.rhs, y));
    case Op::kMax:
      return std::fmax(eval_node(*n.lhs, y), eval_node(*n.rhs, y));
  }
  throw EvalError("corrupt expression node");
}

// Precedence levels for printing with a minimal set of parentheses:
// additive = 1, multiplicative = 2, unary/atoms = 3.
int precedence(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
      return 1;
    case Op::kMul:
    case Op::kDiv:
      return 2;
    default:
      return 3;
  }
}

void print_node(const Expr::Node& n, int parent_prec, bool is_rhs,
                std::string& out) {
  const int prec = precedence(n.op);
  // Left-associative operators need parentheses on the right child at equal
  // precedence, e.g. a-(b+c).
  const bool need_parens =
      prec < parent_prec || (prec == parent_prec && is_rhs && prec <= 2);
  if (need_parens) out += '(';
  switch (n.op) {
    case Op::kLiteral: {
      if (n.value < 0.0 || std::signbit(n.value)) {
        out += '(';
        out += format_double(n.value);
        out += ')';
      } else {
        out += format_double(n.value);
      }
      break;
    }
    case Op::kVar: out += 'y'; break;
    case Op::kNeg:
      out += '-';
      print_node(*n.lhs, 3, true, out);
      break;
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv: {
      print_node(*n.lhs, prec, false, out);
      const char sym = n.op == Op::kAdd   ? '+'
                       : n.op == Op::kSub ? '-'
                       : n.op == Op::kMul ? '*'
                                          : '/';
      out += sym;
      print_node(*n.rhs, prec, true, out);
      break;
    }
    default: {
      out += func_name(n.op);
      out += '(';
      print_node(*n.lhs, 0, false, out);
      if (n.rhs) {
        out += ',';
        print_node(*n.rhs, 0, false, out);
      }
      out += ')';
      break;
    }
  }
  if (need_parens) out += ')';
}

bool nodes_equal(const Expr::Node* a, const Expr::Node* b) {
  if (a == b) return true;
  if (a == nullptr || b == nullptr) return false;
  if (a->op != b->op) return false;
  if (a->op == Op::kLiteral &&
      !(a->value == b->value ||
        (std::isnan(a->value) && std::isnan(b->value))))
    return false;
  return nodes_equal(a->lhs.get(), b->lhs.get()) &&
         nodes_equal(a->rhs.get(), b->rhs.get());
}

}  // namespace

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.root_ = Parser(text).run();
  return e;
}

double Expr::eval(double y) const {
  if (!root_) throw EvalError("evaluating an empty expression");
  const double v = eval_node(*root_, y);
  if (!std::isfinite(v)) throw EvalError("non-finite result");
  return v;
}

std::string Expr::pretty() const {
  if (!root_) return "";
  std::string out;
  print_node(*root_, 0, false, out);
  return out;
}

bool Expr::equals(const Expr& other) const {
  return nodes_equal(root_.get(), other.root_.get());
}

}  // namespace cavu

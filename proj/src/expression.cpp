#include "qpm/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace qpm {

namespace {

int precedence(const Expression::Node& n) {
  if (n.kind == Expression::Kind::Binary) {
    return (n.bop == Expression::BinaryOp::Add ||
            n.bop == Expression::BinaryOp::Sub)
               ? 1
               : 2;
  }
  return 3;  // atoms, functions and unary minus never need parentheses
}

std::string format_double(double v) {
  char buf[40];
  int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, len);
}

}  // namespace

class Parser {
 public:
  Parser(const std::string& text, int n_vars, Expression& out)
      : text_(text), n_(n_vars), e_(out) {}

  void run() {
    e_.source_ = text_;
    e_.n_vars_ = n_;
    e_.root_ = parse_expr();
    skip_ws();
    if (pos_ < text_.size())
      throw ParseError("unexpected trailing input", pos_);
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  int n_;
  Expression& e_;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  int peek() {
    skip_ws();
    return pos_ < text_.size() ? static_cast<unsigned char>(text_[pos_]) : -1;
  }

  int add(Expression::Node n) {
    e_.nodes_.push_back(n);
    return static_cast<int>(e_.nodes_.size()) - 1;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      int c = peek();
      if (c != '+' && c != '-') return lhs;
      std::size_t at = pos_;
      ++pos_;
      int rhs = parse_term();
      Expression::Node n;
      n.kind = Expression::Kind::Binary;
      n.bop = (c == '+') ? Expression::BinaryOp::Add : Expression::BinaryOp::Sub;
      n.a = lhs;
      n.b = rhs;
      n.offset = at;
      lhs = add(n);
    }
  }

  int parse_term() {
    int lhs = parse_factor();
    for (;;) {
      int c = peek();
      if (c != '*' && c != '/') return lhs;
      std::size_t at = pos_;
      ++pos_;
      int rhs = parse_factor();
      Expression::Node n;
      n.kind = Expression::Kind::Binary;
      n.bop = (c == '*') ? Expression::BinaryOp::Mul : Expression::BinaryOp::Div;
      n.a = lhs;
      n.b = rhs;
      n.offset = at;
      lhs = add(n);
    }
  }

  int parse_factor() {
    int c = peek();
    std::size_t at = pos_;
    if (c < 0) throw ParseError("unexpected end of input", pos_);
    if (c == '-') {
      ++pos_;
      int child = parse_factor();
      Expression::Node n;
      n.kind = Expression::Kind::Unary;
      n.uop = Expression::UnaryOp::Neg;
      n.a = child;
      n.offset = at;
      return add(n);
    }
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      if (peek() != ')') throw ParseError("expected ')'", pos_);
      ++pos_;
      return inner;
    }
    if (std::isdigit(c) || c == '.') return parse_number();
    if (std::isalpha(c)) return parse_name();
    throw ParseError("unexpected character", pos_);
  }

  int parse_number() {
    std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.'))
      ++end;
    if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
      if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
        ++e;
        while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
        end = e;
      }
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + at, text_.data() + end, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + end)
      throw ParseError("malformed number", at);
    pos_ = end;
    Expression::Node n;
    n.kind = Expression::Kind::Constant;
    n.value = v;
    n.offset = at;
    return add(n);
  }

  int parse_name() {
    std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && std::isalpha(static_cast<unsigned char>(text_[end]))) ++end;
    std::string name = text_.substr(at, end - at);
    pos_ = end;
    if (name == "pi") {
      Expression::Node n;
      n.kind = Expression::Kind::Constant;
      n.value = M_PI;
      n.offset = at;
      return add(n);
    }
    if (name == "x") {
      std::size_t d = pos_;
      while (d < text_.size() && std::isdigit(static_cast<unsigned char>(text_[d]))) ++d;
      if (d == pos_) throw ParseError("expected variable index after 'x'", pos_);
      int idx = 0;
      std::from_chars(text_.data() + pos_, text_.data() + d, idx);
      pos_ = d;
      if (idx < 1 || idx > n_)
        throw ParseError("variable index out of range (have x1..x" + std::to_string(n_) + ")", at);
      Expression::Node n;
      n.kind = Expression::Kind::Variable;
      n.var = idx;
      n.offset = at;
      return add(n);
    }
    Expression::UnaryOp op;
    if (name == "cos") op = Expression::UnaryOp::Cos;
    else if (name == "sin") op = Expression::UnaryOp::Sin;
    else if (name == "exp") op = Expression::UnaryOp::Exp;
    else if (name == "sqrt") op = Expression::UnaryOp::Sqrt;
    else throw ParseError("unknown name '" + name + "'", at);
    if (peek() != '(') throw ParseError("expected '(' after '" + name + "'", pos_);
    ++pos_;
    int arg = parse_expr();
    if (peek() != ')') throw ParseError("expected ')'", pos_);
    ++pos_;
    if (op == Expression::UnaryOp::Sqrt) {
      if (!subtree_constant(arg))
        throw ParseError("sqrt argument must be a constant", at);
      double v = e_.eval_node(arg, {});
      if (v < 0.0) throw ParseError("sqrt of a negative constant", at);
    }
    Expression::Node n;
    n.kind = Expression::Kind::Unary;
    n.uop = op;
    n.a = arg;
    n.offset = at;
    return add(n);
  }

  bool subtree_constant(int idx) const {
    const auto& n = e_.nodes_[idx];
    switch (n.kind) {
      case Expression::Kind::Constant: return true;
      case Expression::Kind::Variable: return false;
      case Expression::Kind::Unary: return subtree_constant(n.a);
      case Expression::Kind::Binary: return subtree_constant(n.a) && subtree_constant(n.b);
    }
    return false;
  }
};

Expression Expression::parse(const std::string& text, int n_vars) {
  Expression e;
  Parser p(text, n_vars, e);
  p.run();
  return e;
}

double Expression::eval_node(int idx, std::span<const double> x) const {
  const Node& n = nodes_[idx];
  switch (n.kind) {
    case Kind::Constant:
      return n.value;
    case Kind::Variable:
      return x[static_cast<std::size_t>(n.var - 1)];
    case Kind::Unary: {
      double a = eval_node(n.a, x);
      switch (n.uop) {
        case UnaryOp::Neg: return -a;
        case UnaryOp::Exp: return std::exp(a);
        case UnaryOp::Sin: return std::sin(a);
        case UnaryOp::Cos: return std::cos(a);
        case UnaryOp::Sqrt: return std::sqrt(a);
      }
      break;
    }
    case Kind::Binary: {
      double a = eval_node(n.a, x);
      double b = eval_node(n.b, x);
      switch (n.bop) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div:
          if (b == 0.0)
            throw EvalError("division by zero at byte " + std::to_string(n.offset) + " of '" + source_ + "'");
          return a / b;
      }
      break;
    }
  }
  return 0.0;
}

double Expression::evaluate(std::span<const double> x) const {
  if (root_ < 0) throw EvalError("cannot evaluate an empty expression");
  if (static_cast<int>(x.size()) < n_vars_)
    throw EvalError("evaluation point has fewer components than the expression's variables");
  return eval_node(root_, x);
}

bool Expression::is_constant() const {
  for (const Node& n : nodes_)
    if (n.kind == Kind::Variable) return false;
  return true;
}

void Expression::print_node(int idx, std::string& out) const {
  const Node& n = nodes_[idx];
  switch (n.kind) {
    case Kind::Constant:
      out += format_double(n.value);
      return;
    case Kind::Variable:
      out += "x" + std::to_string(n.var);
      return;
    case Kind::Unary:
      switch (n.uop) {
        case UnaryOp::Neg: {
          out += '-';
          bool wrap = nodes_[n.a].kind == Kind::Binary || (nodes_[n.a].kind == Kind::Unary && nodes_[n.a].uop == UnaryOp::Neg);
          if (wrap) out += '(';
          print_node(n.a, out);
          if (wrap) out += ')';
          return;
        }
        case UnaryOp::Exp: out += "exp("; break;
        case UnaryOp::Sin: out += "sin("; break;
        case UnaryOp::Cos: out += "cos("; break;
        case UnaryOp::Sqrt: out += "sqrt("; break;
      }
      print_node(n.a, out);
      out += ')';
      return;
    case Kind::Binary: {
      int prec = precedence(n);
      bool wrap_l = precedence(nodes_[n.a]) < prec;
      // same-precedence right children keep their grouping explicit so the
      // canonical form reparses to the identical left-leaning tree
      bool wrap_r = precedence(nodes_[n.b]) <= prec && nodes_[n.b].kind == Kind::Binary;
      if (wrap_l) out += '(';
      print_node(n.a, out);
      if (wrap_l) out += ')';
      switch (n.bop) {
        case BinaryOp::Add: out += '+'; break;
        case BinaryOp::Sub: out += '-'; break;
        case BinaryOp::Mul: out += '*'; break;
        case BinaryOp::Div: out += '/'; break;
      }
      if (wrap_r) out += '(';
      print_node(n.b, out);
      if (wrap_r) out += ')';
      return;
    }
  }
}

std::string Expression::pretty() const {
  std::string out;
  print_node(root_, out);
  return out;
}

namespace {
bool node_equal(const Expression& ea, const std::vector<Expression::Node>& a, int ia,
                const Expression& eb, const std::vector<Expression::Node>& b, int ib) {
  const auto& na = a[ia];
  const auto& nb = b[ib];
  if (na.kind != nb.kind) return false;
  switch (na.kind) {
    case Expression::Kind::Constant: return na.value == nb.value;
    case Expression::Kind::Variable: return na.var == nb.var;
    case Expression::Kind::Unary:
      return na.uop == nb.uop && node_equal(ea, a, na.a, eb, b, nb.a);
    case Expression::Kind::Binary:
      return na.bop == nb.bop && node_equal(ea, a, na.a, eb, b, nb.a) &&
             node_equal(ea, a, na.b, eb, b, nb.b);
  }
  return false;
}
}  // namespace

bool Expression::identical(const Expression& other) const {
  if (root_ < 0 || other.root_ < 0) return root_ == other.root_;
  return node_equal(*this, nodes_, root_, other, other.nodes_, other.root_);
}

}  // namespace qpm

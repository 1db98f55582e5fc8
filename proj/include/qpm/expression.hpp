#ifndef QPM_EXPRESSION_HPP
#define QPM_EXPRESSION_HPP

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qpm {

// Scalar expression language for fields on the torus: permittivities,
// manufactured-solution components, and projection-matrix entries all come in
// as strings like "1/(10+cos(x1)+cos(x2))" or "sqrt(5)".
//
// Grammar (whitespace insensitive):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := number | 'pi' | 'x'INT | FUNC '(' expr ')' | '(' expr ')' | '-' factor
//   FUNC   := 'cos' | 'sin' | 'exp' | 'sqrt'
// Variables are x1..xn; sqrt is restricted to nonnegative constant arguments
// (it exists to spell irrational matrix entries, not to act on fields).

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(offset) + ")"),
        offset(offset) {}
  std::size_t offset;
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Expression {
 public:
  enum class Kind { Constant, Variable, Unary, Binary };
  enum class UnaryOp { Neg, Exp, Sin, Cos, Sqrt };
  enum class BinaryOp { Add, Sub, Mul, Div };

  struct Node {
    Kind kind;
    double value = 0.0;   // Constant
    int var = 0;          // Variable, 1-based
    UnaryOp uop{};
    BinaryOp bop{};
    int a = -1, b = -1;   // child indices into the node pool
    std::size_t offset = 0;  // source byte of the token that made the node
  };

  // Parses text against the grammar; n_vars caps the allowed variable index.
  // Throws ParseError with a byte offset on any syntax or validity problem.
  static Expression parse(const std::string& text, int n_vars);

  double evaluate(std::span<const double> x) const;

  // Canonical text form; parsing it again yields a structurally identical tree.
  std::string pretty() const;
  bool identical(const Expression& other) const;

  // True when the tree contains no variables (evaluates to a fixed number).
  bool is_constant() const;

  int variable_limit() const { return n_vars_; }
  const std::string& source() const { return source_; }

 private:
  std::vector<Node> nodes_;
  int root_ = -1;
  int n_vars_ = 0;
  std::string source_;

  double eval_node(int idx, std::span<const double> x) const;
  void print_node(int idx, std::string& out) const;
  friend class Parser;
};

}  // namespace qpm

#endif

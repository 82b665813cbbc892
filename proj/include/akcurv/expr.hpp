#pragma once

// Arithmetic expressions over Darboux coordinates z1..zn, t1..tn.
//
// Grammar (whitespace ignored):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' exponent)?
//   exponent:= ['-'] INTEGER | '(' ['-'] INTEGER ')'
//   primary := NUMBER | 'pi' | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
//   FUNC    := sin | cos | exp | ln | sqrt
//   VARIABLE:= 'z' INDEX | 't' INDEX          (1 <= INDEX <= n)
//   NUMBER  := digits ['.' digits] [('e'|'E') ['+'|'-'] digits]
//
// Numeric literals are stored as exact rationals and widened to double when
// an expression is evaluated. Variable index k in [0, 2n) addresses z_{k+1}
// for k < n and t_{k-n+1} otherwise.

#include <akcurv/rational.hpp>

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace akcurv {

class Jet;

namespace expr {

enum class Op : std::uint8_t {
  Constant,
  Pi,
  Variable,
  Neg,
  Sin,
  Cos,
  Exp,
  Ln,
  Sqrt,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op = Op::Constant;
  Rational value;     // Constant
  int variable = -1;  // Variable
  int exponent = 0;   // Pow
  NodePtr lhs;        // unary operand, binary left, power base
  NodePtr rhs;        // binary right
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Raised by evaluation for division by zero and ln/sqrt of a non-positive
// argument. The message names the offending point.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Program;

// Immutable expression tree with a compiled evaluator. Copies share nodes.
class Expression {
 public:
  Expression();  // the constant 0 on a zero-dimensional chart

  static Expression constant(const Rational& value, int n);
  static Expression variable(int index, int n);
  static Expression from_node(NodePtr root, int n);

  int dimension() const { return n_; }
  const NodePtr& root() const { return root_; }

  // point holds 2n coordinates, z first.
  double eval(std::span<const double> point) const;
  // Forward-mode evaluation; point entries carry their own derivative seeds.
  Jet eval(std::span<const Jet> point) const;

  // True when the tree is a literal zero (no variables involved).
  bool is_zero() const;
  // True when no t variable occurs in the tree.
  bool independent_of_t() const;
  std::size_t node_count() const;

  std::string str() const;

 private:
  Expression(NodePtr root, int n);

  NodePtr root_;
  int n_ = 0;
  std::shared_ptr<const Program> program_;
};

Expression parse(std::string_view text, int n);

// Exact symbolic partial derivative with respect to variable index var.
Expression differentiate(const Expression& e, int var);

// Structural equality of trees (constants compared exactly).
bool same_tree(const Expression& a, const Expression& b);

std::string variable_name(int index, int n);

// Builders with light constant folding (0 and 1 identities, literal
// arithmetic). They are used by differentiate and by code that assembles
// expressions programmatically.
Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression pow(const Expression& base, int exponent);
Expression sin(const Expression& a);
Expression cos(const Expression& a);
Expression exp(const Expression& a);
Expression ln(const Expression& a);
Expression sqrt(const Expression& a);

}  // namespace expr
}  // namespace akcurv

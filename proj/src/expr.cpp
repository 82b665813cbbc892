#include <akcurv/expr.hpp>
#include <akcurv/jet.hpp>

#include <cctype>
#include <cmath>
#include <numbers>
#include <sstream>

namespace akcurv::expr {

ParseError::ParseError(const std::string& message, std::size_t offset)
    : std::runtime_error(message + " (at byte offset " + std::to_string(offset) + ")"),
      offset_(offset) {}

namespace {

NodePtr make_constant(const Rational& v) {
  auto node = std::make_shared<Node>();
  node->op = Op::Constant;
  node->value = v;
  return node;
}

NodePtr make_leaf(Op op, int variable = -1) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->variable = variable;
  return node;
}

NodePtr make_unary(Op op, NodePtr operand) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->lhs = std::move(operand);
  return node;
}

NodePtr make_binary(Op op, NodePtr lhs, NodePtr rhs) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->lhs = std::move(lhs);
  node->rhs = std::move(rhs);
  return node;
}

NodePtr make_pow(NodePtr base, int exponent) {
  auto node = std::make_shared<Node>();
  node->op = Op::Pow;
  node->lhs = std::move(base);
  node->exponent = exponent;
  return node;
}

const char* function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    default: return nullptr;
  }
}

// ---------------------------------------------------------------- parser

class Parser {
 public:
  Parser(std::string_view text, int n) : text_(text), n_(n) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) fail(std::string("expected '") + c + "' but input ended");
      fail(std::string("expected '") + c + "'");
    }
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (!accept('^')) return base;
    const bool paren = accept('(');
    bool negative = accept('-');
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) fail("expected integer exponent");
    if (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' || text_[pos_] == 'E')) {
      fail("exponent must be an integer");
    }
    if (pos_ - start > 6) fail_at("exponent too large", start);
    int k = std::stoi(std::string(text_.substr(start, pos_ - start)));
    if (paren) expect(')');
    return make_pow(base, negative ? -k : k);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    BigInt digits = 0;
    int scale = 0;
    bool any = false;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      digits = digits * 10 + (text_[pos_] - '0');
      ++pos_;
      any = true;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits = digits * 10 + (text_[pos_] - '0');
        --scale;
        ++pos_;
        any = true;
      }
    }
    if (!any) fail_at("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      bool neg = false;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) {
        neg = text_[pos_] == '-';
        ++pos_;
      }
      const std::size_t es = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (es == pos_ || pos_ - es > 4) fail_at("malformed exponent in number", start);
      const int e = std::stoi(std::string(text_.substr(es, pos_ - es)));
      scale += neg ? -e : e;
    }
    Rational value(digits);
    if (scale > 0) value *= rational_pow(Rational(10), static_cast<unsigned>(scale));
    if (scale < 0) value /= rational_pow(Rational(10), static_cast<unsigned>(-scale));
    return make_constant(value);
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("expected operand but input ended");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string word(text_.substr(start, pos_ - start));
      if (word == "pi") return make_leaf(Op::Pi);
      for (Op f : {Op::Sin, Op::Cos, Op::Exp, Op::Ln, Op::Sqrt}) {
        if (word == function_name(f)) {
          expect('(');
          NodePtr arg = parse_expr();
          expect(')');
          return make_unary(f, arg);
        }
      }
      if ((word[0] == 'z' || word[0] == 't') && word.size() > 1 &&
          word.find_first_not_of("0123456789", 1) == std::string::npos) {
        if (word.size() > 4) fail_at("variable index out of range in '" + word + "'", start);
        const int index = std::stoi(word.substr(1));
        if (index < 1 || index > n_) {
          fail_at("variable index out of range in '" + word + "' (chart dimension n = " +
                      std::to_string(n_) + ")",
                  start);
        }
        return make_leaf(Op::Variable, word[0] == 'z' ? index - 1 : n_ + index - 1);
      }
      fail_at("unknown identifier '" + word + "'", start);
    }
    fail("expected operand");
  }

  std::string_view text_;
  int n_;
  std::size_t pos_ = 0;
};

// ------------------------------------------------------------ serializer

int precedence(const Node& node) {
  switch (node.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;  // negative constants carry their own parentheses
  }
}

bool terminating_decimal(const Rational& r) {
  BigInt d = boost::multiprecision::denominator(r);
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}

std::string decimal_string(const Rational& r) {
  // r >= 0 with a terminating decimal expansion.
  BigInt num = boost::multiprecision::numerator(r);
  BigInt den = boost::multiprecision::denominator(r);
  int frac_digits = 0;
  while (den != 1) {
    num *= 10;
    const BigInt g = boost::multiprecision::gcd(num, den);
    num /= g;
    den /= g;
    ++frac_digits;
  }
  std::string s = num.str();
  if (frac_digits == 0) return s;
  if (static_cast<int>(s.size()) <= frac_digits) s.insert(0, frac_digits - s.size() + 1, '0');
  s.insert(s.size() - frac_digits, ".");
  return s;
}

std::string constant_string(const Rational& r) {
  if (r < 0) return "(-" + constant_string(-r) + ")";
  if (terminating_decimal(r)) return decimal_string(r);
  return "(" + to_string(r) + ")";
}

void write(std::ostringstream& out, const Node& node, int n);

void write_operand(std::ostringstream& out, const Node& child, bool parens, int n) {
  if (parens) out << '(';
  write(out, child, n);
  if (parens) out << ')';
}

void write(std::ostringstream& out, const Node& node, int n) {
  switch (node.op) {
    case Op::Constant: out << constant_string(node.value); return;
    case Op::Pi: out << "pi"; return;
    case Op::Variable: out << variable_name(node.variable, n); return;
    case Op::Neg:
      out << '-';
      write_operand(out, *node.lhs, precedence(*node.lhs) < precedence(node), n);
      return;
    case Op::Sin:
    case Op::Cos:
    case Op::Exp:
    case Op::Ln:
    case Op::Sqrt:
      out << function_name(node.op) << '(';
      write(out, *node.lhs, n);
      out << ')';
      return;
    case Op::Pow:
      write_operand(out, *node.lhs, precedence(*node.lhs) < 5, n);
      out << '^' << node.exponent;
      return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      const int p = precedence(node);
      write_operand(out, *node.lhs, precedence(*node.lhs) < p, n);
      out << (node.op == Op::Add ? '+' : node.op == Op::Sub ? '-' : node.op == Op::Mul ? '*' : '/');
      write_operand(out, *node.rhs, precedence(*node.rhs) <= p, n);
      return;
    }
  }
}

bool same_node(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case Op::Constant: return a.value == b.value;
    case Op::Pi: return true;
    case Op::Variable: return a.variable == b.variable;
    case Op::Pow: return a.exponent == b.exponent && same_node(*a.lhs, *b.lhs);
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: return same_node(*a.lhs, *b.lhs) && same_node(*a.rhs, *b.rhs);
    default: return same_node(*a.lhs, *b.lhs);
  }
}

bool mentions_t(const Node& node, int n) {
  if (node.op == Op::Variable) return node.variable >= n;
  if (node.lhs && mentions_t(*node.lhs, n)) return true;
  return node.rhs && mentions_t(*node.rhs, n);
}

std::size_t count_nodes(const Node& node) {
  std::size_t c = 1;
  if (node.lhs) c += count_nodes(*node.lhs);
  if (node.rhs) c += count_nodes(*node.rhs);
  return c;
}

bool is_constant(const NodePtr& p, const Rational& v) {
  return p->op == Op::Constant && p->value == v;
}

}  // namespace

// ------------------------------------------------------------- evaluator

struct Instruction {
  Op op;
  double constant = 0.0;
  int variable = -1;
  int exponent = 0;
};

class Program {
 public:
  explicit Program(const Node& root) {
    emit(root, 0);
  }

  template <class T>
  T run(std::span<const T> point, const auto& make_constant_value, int n) const {
    constexpr std::size_t kInline = sizeof(T) > 64 ? 8 : 32;
    T inline_stack[kInline]{};
    std::vector<T> heap;
    T* stack = inline_stack;
    if (max_depth_ > kInline) {
      heap.resize(max_depth_);
      stack = heap.data();
    }
    std::size_t top = 0;
    for (const Instruction& ins : code_) {
      switch (ins.op) {
        case Op::Constant:
        case Op::Pi: stack[top++] = make_constant_value(ins.constant); break;
        case Op::Variable: stack[top++] = point[ins.variable]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Sin: stack[top - 1] = sin(stack[top - 1]); break;
        case Op::Cos: stack[top - 1] = cos(stack[top - 1]); break;
        case Op::Exp: stack[top - 1] = exp(stack[top - 1]); break;
        case Op::Ln:
          if (!(value_of(stack[top - 1]) > 0.0)) domain_error("ln of non-positive argument", point, n);
          stack[top - 1] = log(stack[top - 1]);
          break;
        case Op::Sqrt:
          if (!(value_of(stack[top - 1]) > 0.0)) domain_error("sqrt of non-positive argument", point, n);
          stack[top - 1] = sqrt(stack[top - 1]);
          break;
        case Op::Pow:
          if (ins.exponent < 0 && value_of(stack[top - 1]) == 0.0) {
            domain_error("division by zero in negative power", point, n);
          }
          stack[top - 1] = pow(stack[top - 1], ins.exponent);
          break;
        case Op::Add: --top; stack[top - 1] = stack[top - 1] + stack[top]; break;
        case Op::Sub: --top; stack[top - 1] = stack[top - 1] - stack[top]; break;
        case Op::Mul: --top; stack[top - 1] = stack[top - 1] * stack[top]; break;
        case Op::Div:
          --top;
          if (value_of(stack[top]) == 0.0) domain_error("division by zero", point, n);
          stack[top - 1] = stack[top - 1] / stack[top];
          break;
      }
    }
    return stack[0];
  }

 private:
  static double value_of(double x) { return x; }
  static double value_of(const Jet& x) { return x.value(); }
  static double sin(double x) { return std::sin(x); }
  static double cos(double x) { return std::cos(x); }
  static double exp(double x) { return std::exp(x); }
  static double log(double x) { return std::log(x); }
  static double sqrt(double x) { return std::sqrt(x); }
  static double pow(double x, int k) { return std::pow(x, k); }
  static Jet sin(const Jet& x) { return akcurv::sin(x); }
  static Jet cos(const Jet& x) { return akcurv::cos(x); }
  static Jet exp(const Jet& x) { return akcurv::exp(x); }
  static Jet log(const Jet& x) { return akcurv::log(x); }
  static Jet sqrt(const Jet& x) { return akcurv::sqrt(x); }
  static Jet pow(const Jet& x, int k) { return akcurv::pow(x, k); }

  template <class T>
  [[noreturn]] static void domain_error(const char* what, std::span<const T> point, int n) {
    std::ostringstream msg;
    msg << what << " at (";
    for (std::size_t i = 0; i < point.size(); ++i) {
      if (i) msg << ", ";
      msg << variable_name(static_cast<int>(i), n) << "=" << value_of(point[i]);
    }
    msg << ")";
    throw DomainError(msg.str());
  }

  void emit(const Node& node, std::size_t depth) {
    switch (node.op) {
      case Op::Constant: push({Op::Constant, to_double(node.value)}, depth + 1); return;
      case Op::Pi: push({Op::Pi, std::numbers::pi}, depth + 1); return;
      case Op::Variable: push({Op::Variable, 0.0, node.variable}, depth + 1); return;
      case Op::Pow:
        emit(*node.lhs, depth);
        push({Op::Pow, 0.0, -1, node.exponent}, depth + 1);
        return;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
        emit(*node.lhs, depth);
        emit(*node.rhs, depth + 1);
        push({node.op}, depth + 1);
        return;
      default:
        emit(*node.lhs, depth);
        push({node.op}, depth + 1);
        return;
    }
  }
  void push(Instruction ins, std::size_t depth) {
    code_.push_back(ins);
    if (depth > max_depth_) max_depth_ = depth;
  }

  std::vector<Instruction> code_;
  std::size_t max_depth_ = 1;
};

// ------------------------------------------------------------ Expression

Expression::Expression() : Expression(make_constant(0), 0) {}

Expression::Expression(NodePtr root, int n)
    : root_(std::move(root)), n_(n), program_(std::make_shared<Program>(*root_)) {}

Expression Expression::constant(const Rational& value, int n) { return Expression(make_constant(value), n); }

Expression Expression::variable(int index, int n) {
  if (index < 0 || index >= 2 * n) throw std::out_of_range("variable index out of range");
  return Expression(make_leaf(Op::Variable, index), n);
}

Expression Expression::from_node(NodePtr root, int n) { return Expression(std::move(root), n); }

double Expression::eval(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != 2 * n_) {
    throw std::invalid_argument("expression evaluated at a point of wrong dimension");
  }
  return program_->run<double>(point, [](double c) { return c; }, n_);
}

Jet Expression::eval(std::span<const Jet> point) const {
  if (static_cast<int>(point.size()) != 2 * n_) {
    throw std::invalid_argument("expression evaluated at a point of wrong dimension");
  }
  const int d = point.empty() ? 0 : point[0].dim();
  return program_->run<Jet>(point, [d](double c) { return Jet(d, c); }, n_);
}

bool Expression::is_zero() const { return is_constant(root_, 0); }

bool Expression::independent_of_t() const { return !mentions_t(*root_, n_); }

std::size_t Expression::node_count() const { return count_nodes(*root_); }

std::string Expression::str() const {
  std::ostringstream out;
  write(out, *root_, n_);
  return out.str();
}

Expression parse(std::string_view text, int n) {
  if (n < 1) throw std::invalid_argument("chart dimension must be positive");
  Parser parser(text, n);
  return Expression::from_node(parser.run(), n);
}

bool same_tree(const Expression& a, const Expression& b) {
  return a.dimension() == b.dimension() && same_node(*a.root(), *b.root());
}

std::string variable_name(int index, int n) {
  if (index < n) return "z" + std::to_string(index + 1);
  return "t" + std::to_string(index - n + 1);
}

// -------------------------------------------------------------- builders

namespace {

int common_dim(const Expression& a, const Expression& b) {
  if (a.dimension() != b.dimension() && a.dimension() != 0 && b.dimension() != 0) {
    throw std::invalid_argument("combining expressions of different chart dimension");
  }
  return a.dimension() > b.dimension() ? a.dimension() : b.dimension();
}

bool literal(const Expression& e, Rational* v = nullptr) {
  if (e.root()->op != Op::Constant) return false;
  if (v) *v = e.root()->value;
  return true;
}

}  // namespace

Expression operator+(const Expression& a, const Expression& b) {
  const int n = common_dim(a, b);
  Rational x, y;
  const bool la = literal(a, &x), lb = literal(b, &y);
  if (la && lb) return Expression::constant(x + y, n);
  if (la && x == 0) return Expression::from_node(b.root(), n);
  if (lb && y == 0) return Expression::from_node(a.root(), n);
  return Expression::from_node(make_binary(Op::Add, a.root(), b.root()), n);
}

Expression operator-(const Expression& a, const Expression& b) {
  const int n = common_dim(a, b);
  Rational x, y;
  const bool la = literal(a, &x), lb = literal(b, &y);
  if (la && lb) return Expression::constant(x - y, n);
  if (lb && y == 0) return Expression::from_node(a.root(), n);
  if (la && x == 0) return -Expression::from_node(b.root(), n);
  return Expression::from_node(make_binary(Op::Sub, a.root(), b.root()), n);
}

Expression operator*(const Expression& a, const Expression& b) {
  const int n = common_dim(a, b);
  Rational x, y;
  const bool la = literal(a, &x), lb = literal(b, &y);
  if (la && lb) return Expression::constant(x * y, n);
  if ((la && x == 0) || (lb && y == 0)) return Expression::constant(0, n);
  if (la && x == 1) return Expression::from_node(b.root(), n);
  if (lb && y == 1) return Expression::from_node(a.root(), n);
  if (la && x == -1) return -Expression::from_node(b.root(), n);
  if (lb && y == -1) return -Expression::from_node(a.root(), n);
  return Expression::from_node(make_binary(Op::Mul, a.root(), b.root()), n);
}

Expression operator/(const Expression& a, const Expression& b) {
  const int n = common_dim(a, b);
  Rational x, y;
  const bool la = literal(a, &x), lb = literal(b, &y);
  if (la && lb && y != 0) return Expression::constant(x / y, n);
  if (la && x == 0) return Expression::constant(0, n);
  if (lb && y == 1) return Expression::from_node(a.root(), n);
  return Expression::from_node(make_binary(Op::Div, a.root(), b.root()), n);
}

Expression operator-(const Expression& a) {
  Rational x;
  if (literal(a, &x)) return Expression::constant(-x, a.dimension());
  if (a.root()->op == Op::Neg) return Expression::from_node(a.root()->lhs, a.dimension());
  return Expression::from_node(make_unary(Op::Neg, a.root()), a.dimension());
}

Expression pow(const Expression& base, int exponent) {
  Rational x;
  if (exponent == 0) return Expression::constant(1, base.dimension());
  if (exponent == 1) return base;
  if (literal(base, &x) && exponent > 0) {
    return Expression::constant(rational_pow(x, static_cast<unsigned>(exponent)), base.dimension());
  }
  return Expression::from_node(make_pow(base.root(), exponent), base.dimension());
}

Expression sin(const Expression& a) { return Expression::from_node(make_unary(Op::Sin, a.root()), a.dimension()); }
Expression cos(const Expression& a) { return Expression::from_node(make_unary(Op::Cos, a.root()), a.dimension()); }
Expression exp(const Expression& a) { return Expression::from_node(make_unary(Op::Exp, a.root()), a.dimension()); }
Expression ln(const Expression& a) { return Expression::from_node(make_unary(Op::Ln, a.root()), a.dimension()); }
Expression sqrt(const Expression& a) { return Expression::from_node(make_unary(Op::Sqrt, a.root()), a.dimension()); }

// -------------------------------------------------------- differentiation

Expression differentiate(const Expression& e, int var) {
  const int n = e.dimension();
  if (var < 0 || var >= 2 * n) throw std::out_of_range("differentiation variable outside the chart");
  auto sub = [n](const NodePtr& p) { return Expression::from_node(p, n); };
  auto num = [n](long v) { return Expression::constant(v, n); };
  const Node& node = *e.root();
  switch (node.op) {
    case Op::Constant:
    case Op::Pi: return num(0);
    case Op::Variable: return num(node.variable == var ? 1 : 0);
    case Op::Neg: return -differentiate(sub(node.lhs), var);
    case Op::Sin: {
      const Expression u = sub(node.lhs);
      return cos(u) * differentiate(u, var);
    }
    case Op::Cos: {
      const Expression u = sub(node.lhs);
      return -(sin(u) * differentiate(u, var));
    }
    case Op::Exp: {
      const Expression u = sub(node.lhs);
      return e * differentiate(u, var);
    }
    case Op::Ln: {
      const Expression u = sub(node.lhs);
      return differentiate(u, var) / u;
    }
    case Op::Sqrt: {
      const Expression u = sub(node.lhs);
      return differentiate(u, var) / (num(2) * e);
    }
    case Op::Add: return differentiate(sub(node.lhs), var) + differentiate(sub(node.rhs), var);
    case Op::Sub: return differentiate(sub(node.lhs), var) - differentiate(sub(node.rhs), var);
    case Op::Mul: {
      const Expression u = sub(node.lhs), v = sub(node.rhs);
      return differentiate(u, var) * v + u * differentiate(v, var);
    }
    case Op::Div: {
      const Expression u = sub(node.lhs), v = sub(node.rhs);
      return (differentiate(u, var) * v - u * differentiate(v, var)) / pow(v, 2);
    }
    case Op::Pow: {
      const Expression u = sub(node.lhs);
      const Expression du = differentiate(u, var);
      if (du.is_zero()) return num(0);
      return num(node.exponent) * pow(u, node.exponent - 1) * du;
    }
  }
  return num(0);
}

}  // namespace akcurv::expr

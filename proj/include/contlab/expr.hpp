#pragma once

// Arithmetic expressions for scenario fields.
//
// Grammar (lowest to highest precedence):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | constant | variable | call | '(' expr ')'
//   call    := name '(' expr (',' expr)* ')'
//
// Functions: exp ln sin cos sqrt abs (one argument), min max (two).
// Constants: pi e.
//
// An Expression is immutable after parse. Evaluation runs a flattened stack
// program and is reentrant.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace contlab {

class ExprError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by parse(). position() is a 0-based character offset into the source.
class ExprSyntaxError : public ExprError {
 public:
  ExprSyntaxError(const std::string& what, std::size_t position)
      : ExprError(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Raised by evaluation: ln/sqrt of an invalid argument, division by zero,
/// or any non-finite intermediate.
class ExprDomainError : public ExprError {
 public:
  using ExprError::ExprError;
};

enum class Builtin : std::uint8_t { exp, ln, sin, cos, sqrt, abs, min, max };

struct ExprNode {
  enum class Kind : std::uint8_t { constant, variable, negate, add, sub, mul, div, pow, call };

  Kind kind = Kind::constant;
  double value = 0.0;
  std::string name;  // variable name, function name, or named constant ("pi", "e")
  std::size_t slot = 0;
  Builtin fn = Builtin::exp;
  std::vector<std::shared_ptr<const ExprNode>> args;
};

namespace detail {

inline bool lookup_builtin(std::string_view name, Builtin& fn, std::size_t& arity) {
  struct Entry {
    std::string_view name;
    Builtin fn;
    std::size_t arity;
  };
  static constexpr std::array<Entry, 8> table{{{"exp", Builtin::exp, 1},
                                               {"ln", Builtin::ln, 1},
                                               {"sin", Builtin::sin, 1},
                                               {"cos", Builtin::cos, 1},
                                               {"sqrt", Builtin::sqrt, 1},
                                               {"abs", Builtin::abs, 1},
                                               {"min", Builtin::min, 2},
                                               {"max", Builtin::max, 2}}};
  for (const auto& e : table) {
    if (e.name == name) {
      fn = e.fn;
      arity = e.arity;
      return true;
    }
  }
  return false;
}

inline std::string_view builtin_name(Builtin fn) {
  switch (fn) {
    case Builtin::exp: return "exp";
    case Builtin::ln: return "ln";
    case Builtin::sin: return "sin";
    case Builtin::cos: return "cos";
    case Builtin::sqrt: return "sqrt";
    case Builtin::abs: return "abs";
    case Builtin::min: return "min";
    case Builtin::max: return "max";
  }
  return "?";
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), end);
}

enum class Op : std::uint8_t {
  push_const,
  push_var,
  negate,
  add,
  sub,
  mul,
  div,
  pow,
  exp,
  ln,
  sin,
  cos,
  sqrt,
  abs,
  min,
  max
};

struct Instr {
  Op op;
  std::uint32_t slot = 0;
  double value = 0.0;
};

inline double checked(double r, const char* what) {
  if (!std::isfinite(r)) throw ExprDomainError(std::string("non-finite result in ") + what);
  return r;
}

class Parser {
 public:
  Parser(std::string_view src, std::span<const std::string> vars) : src_(src), vars_(vars) {}

  std::shared_ptr<const ExprNode> parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw ExprSyntaxError("empty expression", pos_);
    auto node = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) {
      throw ExprSyntaxError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    }
    return node;
  }

 private:
  using NodePtr = std::shared_ptr<const ExprNode>;

  static NodePtr make_binary(ExprNode::Kind k, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->args = {std::move(lhs), std::move(rhs)};
    return n;
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                  src_[pos_] == '\r')) {
      ++pos_;
    }
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) {
        throw ExprSyntaxError(std::string("expected '") + c + "' but reached end of input", pos_);
      }
      throw ExprSyntaxError(std::string("expected '") + c + "' but found '" + src_[pos_] + "'",
                            pos_);
    }
  }

  NodePtr parse_expr() {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(ExprNode::Kind::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make_binary(ExprNode::Kind::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(ExprNode::Kind::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(ExprNode::Kind::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::negate;
      n->args = {parse_unary()};
      return n;
    }
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_binary(ExprNode::Kind::pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ExprSyntaxError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = parse_expr();
      expect(')');
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (is_ident_start(c)) return parse_identifier();
    throw ExprSyntaxError(std::string("unexpected '") + c + "'", pos_);
  }

  static bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    std::size_t i = pos_;
    bool digits = false;
    while (i < src_.size() && is_digit(src_[i])) {
      ++i;
      digits = true;
    }
    if (i < src_.size() && src_[i] == '.') {
      ++i;
      while (i < src_.size() && is_digit(src_[i])) {
        ++i;
        digits = true;
      }
    }
    if (!digits) throw ExprSyntaxError("malformed number", start);
    if (i < src_.size() && (src_[i] == 'e' || src_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
      if (j < src_.size() && is_digit(src_[j])) {
        while (j < src_.size() && is_digit(src_[j])) ++j;
        i = j;
      } else {
        throw ExprSyntaxError("malformed exponent", i);
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + i, v);
    if (ec != std::errc{} || ptr != src_.data() + i) {
      throw ExprSyntaxError("malformed number", start);
    }
    pos_ = i;
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::constant;
    n->value = v;
    return n;
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      Builtin fn{};
      std::size_t arity = 0;
      if (!lookup_builtin(name, fn, arity)) {
        throw ExprSyntaxError("unknown function '" + name + "'", start);
      }
      ++pos_;
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::call;
      n->name = name;
      n->fn = fn;
      if (!accept(')')) {
        n->args.push_back(parse_expr());
        while (accept(',')) n->args.push_back(parse_expr());
        expect(')');
      }
      if (n->args.size() != arity) {
        throw ExprSyntaxError("function '" + name + "' expects " + std::to_string(arity) +
                                  " argument(s), got " + std::to_string(n->args.size()),
                              start);
      }
      return n;
    }

    for (std::size_t k = 0; k < vars_.size(); ++k) {
      if (vars_[k] == name) {
        auto n = std::make_shared<ExprNode>();
        n->kind = ExprNode::Kind::variable;
        n->name = name;
        n->slot = k;
        return n;
      }
    }
    if (name == "pi" || name == "e") {
      auto n = std::make_shared<ExprNode>();
      n->kind = ExprNode::Kind::constant;
      n->name = name;
      n->value = name == "pi" ? std::numbers::pi : std::numbers::e;
      return n;
    }
    Builtin fn{};
    std::size_t arity = 0;
    if (lookup_builtin(name, fn, arity)) {
      throw ExprSyntaxError("function '" + name + "' used without arguments", start);
    }
    throw ExprSyntaxError("unknown variable '" + name + "'", start);
  }

  std::string_view src_;
  std::span<const std::string> vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

class Expression {
 public:
  /// Parses src; free variables must come from allowed_vars, whose order fixes
  /// the slot layout used by the positional evaluate overloads.
  static Expression parse(std::string_view src, std::vector<std::string> allowed_vars) {
    Expression e;
    e.source_ = std::string(src);
    e.vars_ = std::move(allowed_vars);
    detail::Parser parser(src, e.vars_);
    e.root_ = parser.parse();
    e.compile();
    return e;
  }

  const std::string& source() const noexcept { return source_; }
  const std::vector<std::string>& allowed_variables() const noexcept { return vars_; }
  const ExprNode& root() const noexcept { return *root_; }

  /// Names of variables that actually occur in the expression.
  std::vector<std::string> free_variables() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      if (used_[k]) out.push_back(vars_[k]);
    }
    return out;
  }

  bool is_constant() const noexcept {
    return std::none_of(used_.begin(), used_.end(), [](bool u) { return u; });
  }

  double evaluate(std::span<const double> slots) const {
    if (slots.size() < vars_.size()) throw std::invalid_argument("too few variable values");
    return run(slots.data());
  }

  double evaluate(const std::map<std::string, double>& bindings) const {
    std::vector<double> slots(vars_.size(), 0.0);
    for (std::size_t k = 0; k < vars_.size(); ++k) {
      auto it = bindings.find(vars_[k]);
      if (it != bindings.end()) {
        slots[k] = it->second;
      } else if (used_[k]) {
        throw std::invalid_argument("no binding for variable '" + vars_[k] + "'");
      }
    }
    return run(slots.data());
  }

  double operator()() const { return run(nullptr); }
  double operator()(double a) const {
    const double s[1] = {a};
    return run(s);
  }
  double operator()(double a, double b) const {
    const double s[2] = {a, b};
    return run(s);
  }

  /// Fully parenthesized text that parses back to an equivalent tree.
  std::string print() const { return print_node(*root_); }

 private:
  Expression() = default;

  static std::string print_node(const ExprNode& n) {
    using K = ExprNode::Kind;
    switch (n.kind) {
      case K::constant:
        if (!n.name.empty()) return n.name;
        return detail::format_number(n.value);
      case K::variable: return n.name;
      case K::negate: return "(-" + print_node(*n.args[0]) + ")";
      case K::add: return "(" + print_node(*n.args[0]) + " + " + print_node(*n.args[1]) + ")";
      case K::sub: return "(" + print_node(*n.args[0]) + " - " + print_node(*n.args[1]) + ")";
      case K::mul: return "(" + print_node(*n.args[0]) + " * " + print_node(*n.args[1]) + ")";
      case K::div: return "(" + print_node(*n.args[0]) + " / " + print_node(*n.args[1]) + ")";
      case K::pow: return "(" + print_node(*n.args[0]) + " ^ " + print_node(*n.args[1]) + ")";
      case K::call: {
        std::string s(detail::builtin_name(n.fn));
        s += "(";
        for (std::size_t i = 0; i < n.args.size(); ++i) {
          if (i) s += ", ";
          s += print_node(*n.args[i]);
        }
        return s + ")";
      }
    }
    return {};
  }

  void compile() {
    used_.assign(vars_.size(), false);
    program_.clear();
    std::size_t depth = 0;
    std::size_t max_depth = 0;
    emit(*root_, depth, max_depth);
    if (max_depth > kStack) {
      throw ExprSyntaxError("expression nested too deeply", 0);
    }
  }

  void emit(const ExprNode& n, std::size_t& depth, std::size_t& max_depth) {
    using K = ExprNode::Kind;
    using detail::Op;
    auto push = [&](detail::Instr ins) {
      program_.push_back(ins);
    };
    auto grow = [&] {
      ++depth;
      max_depth = std::max(max_depth, depth);
    };
    switch (n.kind) {
      case K::constant:
        push({Op::push_const, 0, n.value});
        grow();
        return;
      case K::variable:
        used_[n.slot] = true;
        push({Op::push_var, static_cast<std::uint32_t>(n.slot), 0.0});
        grow();
        return;
      case K::negate:
        emit(*n.args[0], depth, max_depth);
        push({Op::negate});
        return;
      case K::add:
      case K::sub:
      case K::mul:
      case K::div:
      case K::pow: {
        emit(*n.args[0], depth, max_depth);
        emit(*n.args[1], depth, max_depth);
        const Op op = n.kind == K::add   ? Op::add
                      : n.kind == K::sub ? Op::sub
                      : n.kind == K::mul ? Op::mul
                      : n.kind == K::div ? Op::div
                                         : Op::pow;
        push({op});
        --depth;
        return;
      }
      case K::call: {
        for (const auto& a : n.args) emit(*a, depth, max_depth);
        Op op = Op::exp;
        switch (n.fn) {
          case Builtin::exp: op = Op::exp; break;
          case Builtin::ln: op = Op::ln; break;
          case Builtin::sin: op = Op::sin; break;
          case Builtin::cos: op = Op::cos; break;
          case Builtin::sqrt: op = Op::sqrt; break;
          case Builtin::abs: op = Op::abs; break;
          case Builtin::min: op = Op::min; break;
          case Builtin::max: op = Op::max; break;
        }
        push({op});
        depth -= n.args.size() - 1;
        return;
      }
    }
  }

  double run(const double* slots) const {
    std::array<double, kStack> st;
    std::size_t sp = 0;
    for (const auto& ins : program_) {
      using detail::Op;
      switch (ins.op) {
        case Op::push_const: st[sp++] = ins.value; break;
        case Op::push_var: st[sp++] = slots[ins.slot]; break;
        case Op::negate: st[sp - 1] = -st[sp - 1]; break;
        case Op::add: --sp; st[sp - 1] += st[sp]; break;
        case Op::sub: --sp; st[sp - 1] -= st[sp]; break;
        case Op::mul: --sp; st[sp - 1] *= st[sp]; break;
        case Op::div:
          --sp;
          if (st[sp] == 0.0) throw ExprDomainError("division by zero");
          st[sp - 1] /= st[sp];
          break;
        case Op::pow:
          --sp;
          st[sp - 1] = detail::checked(std::pow(st[sp - 1], st[sp]), "'^'");
          break;
        case Op::exp: st[sp - 1] = detail::checked(std::exp(st[sp - 1]), "exp"); break;
        case Op::ln:
          if (!(st[sp - 1] > 0.0)) throw ExprDomainError("ln of a non-positive value");
          st[sp - 1] = std::log(st[sp - 1]);
          break;
        case Op::sin: st[sp - 1] = std::sin(st[sp - 1]); break;
        case Op::cos: st[sp - 1] = std::cos(st[sp - 1]); break;
        case Op::sqrt:
          if (st[sp - 1] < 0.0) throw ExprDomainError("sqrt of a negative value");
          st[sp - 1] = std::sqrt(st[sp - 1]);
          break;
        case Op::abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
        case Op::min: --sp; st[sp - 1] = std::min(st[sp - 1], st[sp]); break;
        case Op::max: --sp; st[sp - 1] = std::max(st[sp - 1], st[sp]); break;
      }
    }
    return detail::checked(st[0], "expression");
  }

  static constexpr std::size_t kStack = 64;

  std::string source_;
  std::vector<std::string> vars_;
  std::shared_ptr<const ExprNode> root_;
  std::vector<detail::Instr> program_;
  std::vector<bool> used_;
};

inline Expression parse(std::string_view src, std::vector<std::string> allowed_vars) {
  return Expression::parse(src, std::move(allowed_vars));
}

inline double evaluate(const Expression& e, const std::map<std::string, double>& bindings) {
  return e.evaluate(bindings);
}

namespace fd {

inline constexpr double default_step = 1e-6;

template <class F>
double central(F&& fn, double x, double h = default_step) {
  return (fn(x + h) - fn(x - h)) / (2.0 * h);
}

/// Second-order one-sided difference looking toward larger arguments.
template <class F>
double forward(F&& fn, double x, double h = default_step) {
  return (-3.0 * fn(x) + 4.0 * fn(x + h) - fn(x + 2.0 * h)) / (2.0 * h);
}

/// Second-order one-sided difference looking toward smaller arguments.
template <class F>
double backward(F&& fn, double x, double h = default_step) {
  return (3.0 * fn(x) - 4.0 * fn(x - h) + fn(x - 2.0 * h)) / (2.0 * h);
}

/// Derivative on [lo, hi] that never samples outside the interval.
template <class F>
double within(F&& fn, double x, double lo, double hi, double h = default_step) {
  if (x - h >= lo && x + h <= hi) return central(fn, x, h);
  if (x - lo < hi - x) return forward(fn, x, h);
  return backward(fn, x, h);
}

}  // namespace fd

}  // namespace contlab

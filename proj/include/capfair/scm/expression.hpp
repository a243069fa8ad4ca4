#pragma once

// Small arithmetic expression language used for structural mechanisms and
// label rules. Supports + - * / ^, unary minus, numeric literals, variables,
// and the functions exp, log, logistic, ind (1 if arg > 0 else 0), sqrt, abs.
// Expressions compile to a postfix tape that evaluates value and gradient.

#include "capfair/core/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capfair {

class Expression {
 public:
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Logistic, Ind, Sqrt, Abs };

  struct Instr {
    Op op;
    double constant = 0.0;
    int var = -1;
  };

  using Resolver = std::function<int(std::string_view)>;

  Expression() = default;

  // `resolve` maps an identifier to a variable slot; a negative return rejects it.
  static Expression parse(std::string source, const Resolver& resolve) {
    Expression e;
    e.source_ = std::move(source);
    Parser p{e.source_, resolve, e.tape_};
    p.parse_all();
    for (const auto& ins : e.tape_) {
      if (ins.op == Op::Var) e.vars_.push_back(ins.var);
    }
    std::sort(e.vars_.begin(), e.vars_.end());
    e.vars_.erase(std::unique(e.vars_.begin(), e.vars_.end()), e.vars_.end());
    if (e.vars_.size() > kMaxVars) throw Error("expression '" + e.source_ + "' uses too many variables");
    return e;
  }

  [[nodiscard]] const std::string& source() const { return source_; }
  [[nodiscard]] const std::vector<int>& variables() const { return vars_; }
  [[nodiscard]] bool empty() const { return tape_.empty(); }

  [[nodiscard]] double eval(std::span<const double> x) const {
    double stack[64];
    int top = 0;
    for (const auto& ins : tape_) {
      switch (ins.op) {
        case Op::Const: stack[top++] = ins.constant; break;
        case Op::Var: stack[top++] = x[static_cast<std::size_t>(ins.var)]; break;
        case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
        case Op::Log: stack[top - 1] = std::log(stack[top - 1]); break;
        case Op::Logistic: stack[top - 1] = logistic(stack[top - 1]); break;
        case Op::Ind: stack[top - 1] = stack[top - 1] > 0.0 ? 1.0 : 0.0; break;
        case Op::Sqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
        case Op::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
        default: {
          const double b = stack[--top];
          double& a = stack[top - 1];
          a = binary(ins.op, a, b);
        }
      }
    }
    return stack[0];
  }

  // Value plus partial derivatives with respect to every slot in `x`.
  // The indicator contributes a zero subgradient everywhere.
  double eval_grad(std::span<const double> x, std::span<double> grad) const {
    struct Dual {
      double v;
      double d[kMaxVars];
    };
    const std::size_t k = vars_.size();
    Dual stack[64];
    int top = 0;
    for (const auto& ins : tape_) {
      switch (ins.op) {
        case Op::Const: {
          Dual& t = stack[top++];
          t.v = ins.constant;
          std::fill_n(t.d, k, 0.0);
          break;
        }
        case Op::Var: {
          Dual& t = stack[top++];
          t.v = x[static_cast<std::size_t>(ins.var)];
          std::fill_n(t.d, k, 0.0);
          t.d[slot_of(ins.var)] = 1.0;
          break;
        }
        case Op::Neg:
        case Op::Exp:
        case Op::Log:
        case Op::Logistic:
        case Op::Ind:
        case Op::Sqrt:
        case Op::Abs: {
          Dual& t = stack[top - 1];
          const double a = t.v;
          double out = 0.0;
          double d = 0.0;
          switch (ins.op) {
            case Op::Neg: out = -a; d = -1.0; break;
            case Op::Exp: out = std::exp(a); d = out; break;
            case Op::Log: out = std::log(a); d = 1.0 / a; break;
            case Op::Logistic: out = logistic(a); d = out * (1.0 - out); break;
            case Op::Ind: out = a > 0.0 ? 1.0 : 0.0; d = 0.0; break;
            case Op::Sqrt: out = std::sqrt(a); d = 0.5 / out; break;
            default: out = std::abs(a); d = a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); break;
          }
          t.v = out;
          for (std::size_t i = 0; i < k; ++i) t.d[i] *= d;
          break;
        }
        default: {
          const Dual& rhs = stack[--top];
          Dual& lhs = stack[top - 1];
          const double a = lhs.v;
          const double b = rhs.v;
          double ca = 0.0;
          double cb = 0.0;
          switch (ins.op) {
            case Op::Add: ca = 1.0; cb = 1.0; break;
            case Op::Sub: ca = 1.0; cb = -1.0; break;
            case Op::Mul: ca = b; cb = a; break;
            case Op::Div: ca = 1.0 / b; cb = -a / (b * b); break;
            default:
              ca = (b == 0.0) ? 0.0 : b * std::pow(a, b - 1.0);
              cb = (a > 0.0) ? std::pow(a, b) * std::log(a) : 0.0;
              break;
          }
          for (std::size_t i = 0; i < k; ++i) lhs.d[i] = ca * lhs.d[i] + cb * rhs.d[i];
          lhs.v = binary(ins.op, a, b);
        }
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) grad[static_cast<std::size_t>(vars_[i])] = stack[0].d[i];
    return stack[0].v;
  }

  static double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
  }

 private:
  static constexpr std::size_t kMaxVars = 16;

  [[nodiscard]] std::size_t slot_of(int var) const {
    return static_cast<std::size_t>(std::lower_bound(vars_.begin(), vars_.end(), var) - vars_.begin());
  }

  static double binary(Op op, double a, double b) {
    switch (op) {
      case Op::Add: return a + b;
      case Op::Sub: return a - b;
      case Op::Mul: return a * b;
      case Op::Div: return a / b;
      default: return std::pow(a, b);
    }
  }

  // Recursive-descent parser emitting postfix code.
  //   expr    := term (('+'|'-') term)*
  //   term    := unary (('*'|'/') unary)*
  //   unary   := '-' unary | power
  //   power   := primary ('^' unary)?
  //   primary := number | ident | ident '(' expr ')' | '(' expr ')'
  struct Parser {
    std::string_view src;
    const Resolver& resolve;
    std::vector<Instr>& out;
    std::size_t pos = 0;

    void parse_all() {
      expr();
      skip_ws();
      if (pos != src.size()) fail("unexpected '" + std::string(1, src[pos]) + "'");
      if (out.empty()) fail("empty expression");
      // The evaluator uses a fixed-size stack.
      int d = 0;
      int worst = 0;
      for (const auto& ins : out) {
        if (ins.op == Op::Const || ins.op == Op::Var) ++d;
        else if (ins.op >= Op::Add && ins.op <= Op::Pow) --d;
        worst = std::max(worst, d);
      }
      if (worst > 60) fail("expression too deeply nested");
    }

    [[noreturn]] void fail(const std::string& msg) const {
      throw Error("expression '" + std::string(src) + "': " + msg + " at offset " + std::to_string(pos));
    }

    void skip_ws() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool accept(char c) {
      skip_ws();
      if (pos < src.size() && src[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    void expr() {
      term();
      for (;;) {
        if (accept('+')) {
          term();
          out.push_back({Op::Add});
        } else if (accept('-')) {
          term();
          out.push_back({Op::Sub});
        } else {
          return;
        }
      }
    }

    void term() {
      unary();
      for (;;) {
        if (accept('*')) {
          unary();
          out.push_back({Op::Mul});
        } else if (accept('/')) {
          unary();
          out.push_back({Op::Div});
        } else {
          return;
        }
      }
    }

    void unary() {
      if (accept('-')) {
        unary();
        out.push_back({Op::Neg});
        return;
      }
      if (accept('+')) {
        unary();
        return;
      }
      power();
    }

    void power() {
      primary();
      if (accept('^')) {
        unary();
        out.push_back({Op::Pow});
      }
    }

    void primary() {
      skip_ws();
      if (pos >= src.size()) fail("unexpected end");
      const char c = src[pos];
      if (c == '(') {
        ++pos;
        expr();
        if (!accept(')')) fail("expected ')'");
        return;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t end = pos;
        while (end < src.size() &&
               (std::isdigit(static_cast<unsigned char>(src[end])) || src[end] == '.' ||
                src[end] == 'e' || src[end] == 'E' ||
                ((src[end] == '-' || src[end] == '+') && end > pos &&
                 (src[end - 1] == 'e' || src[end - 1] == 'E')))) {
          ++end;
        }
        const std::string lit(src.substr(pos, end - pos));
        std::size_t used = 0;
        double value = 0.0;
        try {
          value = std::stod(lit, &used);
        } catch (const std::exception&) {
          fail("bad number '" + lit + "'");
        }
        if (used != lit.size()) fail("bad number '" + lit + "'");
        pos = end;
        out.push_back({Op::Const, value});
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t end = pos;
        while (end < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[end])) || src[end] == '_')) {
          ++end;
        }
        const std::string_view name = src.substr(pos, end - pos);
        pos = end;
        if (accept('(')) {
          Op fn;
          if (name == "exp") fn = Op::Exp;
          else if (name == "log") fn = Op::Log;
          else if (name == "logistic" || name == "sigmoid") fn = Op::Logistic;
          else if (name == "ind") fn = Op::Ind;
          else if (name == "sqrt") fn = Op::Sqrt;
          else if (name == "abs") fn = Op::Abs;
          else fail("unknown function '" + std::string(name) + "'");
          expr();
          if (!accept(')')) fail("expected ')'");
          out.push_back({fn});
          return;
        }
        const int slot = resolve(name);
        if (slot < 0) fail("unknown variable '" + std::string(name) + "'");
        out.push_back({Op::Var, 0.0, slot});
        return;
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  std::string source_;
  std::vector<Instr> tape_;
  std::vector<int> vars_;
};

}  // namespace capfair

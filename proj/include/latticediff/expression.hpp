#pragma once

#include "error.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

namespace latticediff {

// Real function of t parsed from text, e.g. "0.05*exp(-t)".
// Grammar: expr = term {(+|-) term}; term = unary {(*|/) unary}; unary = (+|-) unary | power;
// power = primary [^ unary]; primary = number | t | pi | name(expr) | (expr).
class Expression {
 public:
  using Fn = std::function<double(double)>;

  explicit Expression(std::string text) : text_(std::move(text)) {
    pos_ = 0;
    fn_ = expr();
    skip();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
  }

  double operator()(double t) const { return fn_(t); }
  const std::string& text() const { return text_; }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("expression '" + text_ + "': " + why + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Fn expr() {
    Fn lhs = term();
    for (;;) {
      if (eat('+')) {
        Fn r = term();
        lhs = [lhs, r](double t) { return lhs(t) + r(t); };
      } else if (eat('-')) {
        Fn r = term();
        lhs = [lhs, r](double t) { return lhs(t) - r(t); };
      } else {
        return lhs;
      }
    }
  }

  Fn term() {
    Fn lhs = unary();
    for (;;) {
      if (eat('*')) {
        Fn r = unary();
        lhs = [lhs, r](double t) { return lhs(t) * r(t); };
      } else if (eat('/')) {
        Fn r = unary();
        lhs = [lhs, r](double t) { return lhs(t) / r(t); };
      } else {
        return lhs;
      }
    }
  }

  Fn unary() {
    if (eat('-')) {
      Fn v = unary();
      return [v](double t) { return -v(t); };
    }
    if (eat('+')) return unary();
    return power();
  }

  Fn power() {
    Fn base = primary();
    if (eat('^')) {
      Fn ex = unary();
      return [base, ex](double t) { return std::pow(base(t), ex(t)); };
    }
    return base;
  }

  Fn primary() {
    skip();
    if (pos_ >= text_.size()) fail("unexpected end");
    if (eat('(')) {
      Fn v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return [v](double) { return v; };
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
      const std::string name = text_.substr(start, pos_ - start);
      if (name == "t") return [](double t) { return t; };
      if (name == "pi") return [](double) { return std::numbers::pi; };
      if (!eat('(')) fail("expected '(' after '" + name + "'");
      Fn arg = expr();
      if (!eat(')')) fail("missing ')'");
      double (*f)(double) = nullptr;
      if (name == "exp") f = [](double x) { return std::exp(x); };
      else if (name == "log") f = [](double x) { return std::log(x); };
      else if (name == "sqrt") f = [](double x) { return std::sqrt(x); };
      else if (name == "sin") f = [](double x) { return std::sin(x); };
      else if (name == "cos") f = [](double x) { return std::cos(x); };
      else if (name == "abs") f = [](double x) { return std::abs(x); };
      else if (name == "tanh") f = [](double x) { return std::tanh(x); };
      else fail("unknown function '" + name + "'");
      return [f, arg](double t) { return f(arg(t)); };
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string text_;
  std::size_t pos_ = 0;
  Fn fn_;
};

}  // namespace latticediff

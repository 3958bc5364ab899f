#include "npr/ic_expr.hpp"

#include <cctype>
#include <cstdlib>
#include <numbers>
#include <string>

namespace npr {

namespace {

// one parsed term: coef * (1 | x | trig(omega x + phase))
struct TermValue {
  double coef = 1.0;
  bool has_x = false;
  bool has_trig = false;
  TrigTerm trig;
};

// affine-only accumulator for trig arguments
struct Affine {
  double slope = 0.0;
  double intercept = 0.0;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  ICSample parse() {
    ICSample ic;
    ic.kind = IcKind::expression;
    const Affine probe = expr(&ic);
    ic.slope += probe.slope;
    ic.intercept += probe.intercept;
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return ic;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("ic expression: " + why + " at position " + std::to_string(pos_) + " in '" +
                      s_ + "'");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  bool word(const char* w) {
    skip_ws();
    const std::size_t n = std::string(w).size();
    if (s_.compare(pos_, n, w) != 0) return false;
    const std::size_t after = pos_ + n;
    if (after < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[after])) || s_[after] == '_'))
      return false;  // identifier continues: not this keyword
    pos_ = after;
    return true;
  }

  double number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  // With sink != nullptr trig factors are allowed and accumulate into it;
  // with sink == nullptr (inside a trig argument) the result must stay affine.
  Affine expr(ICSample* sink) {
    Affine acc;
    bool negative = false;
    if (eat('-'))
      negative = true;
    else
      (void)eat('+');
    for (;;) {
      TermValue t = term(sink != nullptr);
      if (negative) t.coef = -t.coef;
      if (t.has_trig) {
        t.trig.amp = t.coef;
        sink->terms.push_back(t.trig);
      } else if (t.has_x) {
        acc.slope += t.coef;
      } else {
        acc.intercept += t.coef;
      }
      if (eat('+'))
        negative = false;
      else if (eat('-'))
        negative = true;
      else
        break;
    }
    return acc;
  }

  TermValue term(bool allow_trig) {
    TermValue t = factor(allow_trig);
    while (eat('*')) {
      const TermValue f = factor(allow_trig);
      if ((t.has_x || t.has_trig) && (f.has_x || f.has_trig))
        fail("a term may hold only one x or trig factor");
      t.coef *= f.coef;
      t.has_x |= f.has_x;
      if (f.has_trig) {
        t.has_trig = true;
        t.trig = f.trig;
      }
    }
    return t;
  }

  TermValue factor(bool allow_trig) {
    TermValue t;
    skip_ws();
    if (word("pi")) {
      t.coef = std::numbers::pi;
      return t;
    }
    if (word("x")) {
      t.has_x = true;
      return t;
    }
    const bool is_sin = word("sin");
    const bool is_cos = !is_sin && word("cos");
    if (is_sin || is_cos) {
      if (!allow_trig) fail("trig arguments must be affine in x");
      if (!eat('(')) fail("expected '(' after function name");
      const Affine arg = expr(nullptr);
      if (!eat(')')) fail("expected ')'");
      t.has_trig = true;
      t.trig = {1.0, arg.slope, arg.intercept, is_cos};
      return t;
    }
    const char c = peek();
    if (c == '-' || c == '+' || std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      t.coef = number();
      return t;
    }
    fail("expected a number, x, pi, sin or cos");
  }
};

}  // namespace

ICSample parse_ic_expr(const std::string& text) {
  Parser p(text);
  return p.parse();
}

}  // namespace npr

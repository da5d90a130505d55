#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cmtk {

// Exact arithmetic throughout: truth values are arbitrary-precision
// rationals confined to [0,1].
using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

class CmtkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool in_unit_interval(const Rat& q) { return q >= 0 && q <= 1; }

// The connective basis on [0,1]. Every operation maps rationals to
// rationals, so formula evaluation stays exact.
inline Rat trunc_add(const Rat& a, const Rat& b) {
  Rat s = a + b;
  return s > 1 ? Rat(1) : s;
}

inline Rat trunc_sub(const Rat& a, const Rat& b) {
  return a > b ? Rat(a - b) : Rat(0);
}

inline Rat negation(const Rat& a) { return Rat(1) - a; }

inline Rat halve(const Rat& a) { return a / 2; }

inline Rat rat_min(const Rat& a, const Rat& b) { return a < b ? a : b; }

inline Rat rat_max(const Rat& a, const Rat& b) { return a > b ? a : b; }

inline Rat abs_diff(const Rat& a, const Rat& b) { return a > b ? Rat(a - b) : Rat(b - a); }

inline Rat pow2_inv(unsigned n) {
  Int den = Int(1) << n;
  return Rat(Int(1), den);
}

inline std::string rat_to_string(const Rat& q) {
  Int num = numerator(q);
  Int den = denominator(q);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

// Accepts "p", "p/q" and decimal "a.b" forms.
inline std::optional<Rat> rat_from_string(std::string_view s) {
  if (s.empty()) return std::nullopt;
  size_t i = 0;
  bool neg = false;
  if (s[i] == '-') {
    neg = true;
    ++i;
  }
  auto digits = [&](Int& out) -> bool {
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    out = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
      out = out * 10 + (s[i] - '0');
      ++i;
    }
    return true;
  };
  Int whole;
  if (!digits(whole)) return std::nullopt;
  Rat value(whole);
  if (i < s.size() && s[i] == '/') {
    ++i;
    Int den;
    if (!digits(den) || den == 0) return std::nullopt;
    value = Rat(whole, den);
  } else if (i < s.size() && s[i] == '.') {
    ++i;
    size_t start = i;
    Int frac;
    if (!digits(frac)) return std::nullopt;
    Int scale = 1;
    for (size_t k = start; k < i; ++k) scale *= 10;
    value = Rat(whole) + Rat(frac, scale);
  }
  if (i != s.size()) return std::nullopt;
  return neg ? Rat(-value) : value;
}

// Fixed-point rendering for --decimal output; rounds half away from zero.
inline std::string rat_to_decimal(const Rat& q, int digits) {
  if (digits < 0) digits = 0;
  Int scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  Rat scaled = q * scale;
  Int num = numerator(scaled), den = denominator(scaled);
  bool negative = num < 0;
  if (negative) num = -num;
  Int quot = num / den, rem = num % den;
  if (rem * 2 >= den) quot += 1;
  std::string s = quot.str();
  if (digits == 0) return (negative && quot != 0 ? "-" : "") + s;
  while (s.size() <= static_cast<size_t>(digits)) s.insert(s.begin(), '0');
  s.insert(s.size() - digits, ".");
  if (negative && quot != 0) s.insert(s.begin(), '-');
  return s;
}

inline double rat_to_double(const Rat& q) { return static_cast<double>(q); }

// A truth value: exact rational, or a float with an error bound once a
// native connective has entered the computation.
struct Value {
  Rat exact;
  double approx = 0.0;
  double error = 0.0;
  bool is_exact = true;

  static Value of(Rat q) {
    Value v;
    v.exact = std::move(q);
    v.is_exact = true;
    return v;
  }
  static Value approximate(double x, double err) {
    Value v;
    v.is_exact = false;
    v.approx = x < 0 ? 0 : (x > 1 ? 1 : x);
    v.error = err;
    return v;
  }
  double as_double() const { return is_exact ? rat_to_double(exact) : approx; }
  std::string str() const {
    if (is_exact) return rat_to_string(exact);
    return "~" + std::to_string(approx);
  }
};

namespace detail {
template <typename ExactOp, typename DoubleOp>
inline Value value_binop(const Value& a, const Value& b, ExactOp eop, DoubleOp dop,
                         bool additive_error) {
  if (a.is_exact && b.is_exact) return Value::of(eop(a.exact, b.exact));
  double err = additive_error ? a.error + b.error : std::max(a.error, b.error);
  return Value::approximate(dop(a.as_double(), b.as_double()), err);
}
}  // namespace detail

inline Value v_add(const Value& a, const Value& b) {
  return detail::value_binop(
      a, b, [](const Rat& x, const Rat& y) { return trunc_add(x, y); },
      [](double x, double y) { return std::min(x + y, 1.0); }, true);
}
inline Value v_sub(const Value& a, const Value& b) {
  return detail::value_binop(
      a, b, [](const Rat& x, const Rat& y) { return trunc_sub(x, y); },
      [](double x, double y) { return std::max(x - y, 0.0); }, true);
}
inline Value v_min(const Value& a, const Value& b) {
  return detail::value_binop(
      a, b, [](const Rat& x, const Rat& y) { return rat_min(x, y); },
      [](double x, double y) { return std::min(x, y); }, false);
}
inline Value v_max(const Value& a, const Value& b) {
  return detail::value_binop(
      a, b, [](const Rat& x, const Rat& y) { return rat_max(x, y); },
      [](double x, double y) { return std::max(x, y); }, false);
}
inline Value v_neg(const Value& a) {
  if (a.is_exact) return Value::of(negation(a.exact));
  return Value::approximate(1.0 - a.approx, a.error);
}
inline Value v_half(const Value& a) {
  if (a.is_exact) return Value::of(halve(a.exact));
  return Value::approximate(a.approx / 2, a.error / 2);
}

}  // namespace cmtk

#pragma once

// Extended reals are plain doubles restricted to finite values and +-inf.
// The helpers below are the only arithmetic the semantics need; none of them
// can produce a NaN for admissible inputs.

#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "wstlpref/error.hpp"

namespace wstlpref {

using ExtReal = double;

inline constexpr ExtReal kPosInf = std::numeric_limits<double>::infinity();
inline constexpr ExtReal kNegInf = -std::numeric_limits<double>::infinity();

inline bool is_ext_real(double x) noexcept { return !std::isnan(x); }

/// Positive scaling c * x. c must be finite and > 0, so c * (+-inf) keeps its sign.
inline ExtReal scale(double c, ExtReal x) noexcept { return c * x; }

/// -1, 0 or +1; infinities map to their sign.
inline int sign(ExtReal x) noexcept { return (x > 0) - (x < 0); }

/// Shortest text that parses back to the same double; infinities as "inf"/"-inf".
inline std::string format_ext_real(ExtReal x) {
  if (x == kPosInf) return "inf";
  if (x == kNegInf) return "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline ExtReal parse_ext_real(const std::string& text) {
  if (text == "inf" || text == "+inf") return kPosInf;
  if (text == "-inf") return kNegInf;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw Error("not an extended real: '" + text + "'");
  }
  if (used != text.size() || std::isnan(v)) throw Error("not an extended real: '" + text + "'");
  return v;
}

}  // namespace wstlpref

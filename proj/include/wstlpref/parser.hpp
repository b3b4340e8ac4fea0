#pragma once

// Recursive-descent parser for the formula language (see docs/grammar.md).
//
//   formula  := implies
//   implies  := disj [ "=>" [pins] implies ]
//   disj     := conj { "|" [pins] conj }
//   conj     := until { "&" [pins] until }
//   until    := unary [ "U" [interval] [pins] until ]
//   unary    := "!" unary | ("G" | "F") [interval] [pins] unary | primary
//   primary  := "(" formula ")" | "true" | predicate
//   predicate:= affine [ (">=" | "<=") affine ]
//
// G, F, U and true are reserved and cannot name channels.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "wstlpref/error.hpp"
#include "wstlpref/formula.hpp"

namespace wstlpref {

namespace detail {

enum class Tok { ident, number, lparen, rparen, lbracket, rbracket, lbrace, rbrace, comma, bang, amp, bar,
                 implies, ge, le, plus, minus, star, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::ident;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
          t.text += advance();
        }
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.kind = Tok::number;
        t.text = number();
      } else {
        t.text = std::string(1, c);
        advance();
        switch (c) {
          case '(': t.kind = Tok::lparen; break;
          case ')': t.kind = Tok::rparen; break;
          case '[': t.kind = Tok::lbracket; break;
          case ']': t.kind = Tok::rbracket; break;
          case '{': t.kind = Tok::lbrace; break;
          case '}': t.kind = Tok::rbrace; break;
          case ',': t.kind = Tok::comma; break;
          case '!': t.kind = Tok::bang; break;
          case '&': t.kind = Tok::amp; break;
          case '|': t.kind = Tok::bar; break;
          case '+': t.kind = Tok::plus; break;
          case '-': t.kind = Tok::minus; break;
          case '*': t.kind = Tok::star; break;
          case '=':
            expect_char('>', t);
            t.kind = Tok::implies;
            break;
          case '>':
            expect_char('=', t);
            t.kind = Tok::ge;
            break;
          case '<':
            expect_char('=', t);
            t.kind = Tok::le;
            break;
          default: throw ParseError("unexpected character '" + t.text + "'", t.line, t.column);
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    const char c = src_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
        advance();
      } else if (src_[pos_] == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  void expect_char(char c, Token& t) {
    if (pos_ >= src_.size() || src_[pos_] != c) {
      throw ParseError("expected '" + t.text + c + "'", t.line, t.column);
    }
    t.text += advance();
  }

  std::string number() {
    std::string s;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) s += advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      s += advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t save = pos_;
      const int save_col = col_;
      std::string exp(1, advance());
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) exp += advance();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        s += exp;
        digits();
      } else {
        pos_ = save;
        col_ = save_col;
      }
    }
    return s;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(Lexer(text).run()) {}

  Formula parse() {
    Formula f = implies();
    if (peek().kind != Tok::end) fail("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++pos_;
    return true;
  }
  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    throw ParseError(t.kind == Tok::end ? what + " (at end of input)" : what, t.line, t.column);
  }
  const Token& expect(Tok k, const char* what) {
    if (peek().kind != k) fail(std::string("expected ") + what);
    return next();
  }
  bool at_keyword(const char* kw) const { return peek().kind == Tok::ident && peek().text == kw; }

  template <class Build>
  Formula guarded(const Token& at, Build build) {
    try {
      return build();
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(e.what(), at.line, at.column);
    }
  }

  Formula implies() {
    Formula lhs = disj();
    if (peek().kind == Tok::implies) {
      const Token op = next();
      auto pins = maybe_pins();
      Formula rhs = implies();
      return guarded(op, [&] { return Formula::implication(lhs, rhs, std::move(pins)); });
    }
    return lhs;
  }

  Formula disj() {
    Formula lhs = conj();
    while (peek().kind == Tok::bar) {
      const Token op = next();
      auto pins = maybe_pins();
      Formula rhs = conj();
      lhs = guarded(op, [&] { return Formula::disjunction(lhs, rhs, std::move(pins)); });
    }
    return lhs;
  }

  Formula conj() {
    Formula lhs = until();
    while (peek().kind == Tok::amp) {
      const Token op = next();
      auto pins = maybe_pins();
      Formula rhs = until();
      lhs = guarded(op, [&] { return Formula::conjunction(lhs, rhs, std::move(pins)); });
    }
    return lhs;
  }

  Formula until() {
    Formula lhs = unary();
    if (at_keyword("U")) {
      const Token op = next();
      const Interval iv = maybe_interval();
      auto pins = maybe_pins();
      Formula rhs = until();
      return guarded(op, [&] { return Formula::until(lhs, rhs, iv, std::move(pins)); });
    }
    return lhs;
  }

  Formula unary() {
    if (accept(Tok::bang)) return Formula::negation(unary());
    if (at_keyword("G") || at_keyword("F")) {
      const Token op = next();
      const Interval iv = maybe_interval();
      auto pins = maybe_pins();
      Formula child = unary();
      return guarded(op, [&] {
        return op.text == "G" ? Formula::always(child, iv, std::move(pins))
                              : Formula::eventually(child, iv, std::move(pins));
      });
    }
    return primary();
  }

  Formula primary() {
    if (accept(Tok::lparen)) {
      Formula f = implies();
      expect(Tok::rparen, "')'");
      return f;
    }
    if (at_keyword("true")) {
      next();
      return Formula::truth();
    }
    if (at_keyword("U")) fail("'U' needs a left operand");
    return predicate();
  }

  Formula predicate() {
    const Token start = peek();
    PredicateFn lhs = affine();
    if (peek().kind == Tok::ge || peek().kind == Tok::le) {
      const bool ge = next().kind == Tok::ge;
      PredicateFn rhs = affine();
      return Formula::predicate(ge ? subtract(lhs, rhs) : subtract(rhs, lhs));
    }
    if (lhs.terms.size() == 1 && lhs.terms[0].second == 1.0 && lhs.offset == 0.0) {
      return Formula::predicate(lhs);  // bare channel: p means p >= 0
    }
    throw ParseError("expected '>=' or '<=' after affine expression", start.line, start.column);
  }

  static PredicateFn subtract(const PredicateFn& a, const PredicateFn& b) {
    PredicateFn out = a;
    for (const auto& [name, c] : b.terms) add_term(out, name, -c);
    out.offset -= b.offset;
    return out;
  }

  static void add_term(PredicateFn& fn, const std::string& name, double c) {
    for (auto& [n, existing] : fn.terms) {
      if (n == name) {
        existing += c;
        return;
      }
    }
    fn.terms.emplace_back(name, c);
  }

  PredicateFn affine() {
    PredicateFn fn;
    term(fn, 1.0);
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      const double sign = next().kind == Tok::plus ? 1.0 : -1.0;
      term(fn, sign);
    }
    return fn;
  }

  void term(PredicateFn& fn, double sign) {
    while (accept(Tok::minus)) sign = -sign;
    if (peek().kind == Tok::number) {
      const double c = number_value(next());
      if (accept(Tok::star)) {
        add_term(fn, channel_name(), sign * c);
      } else {
        fn.offset += sign * c;
      }
      return;
    }
    const std::string name = channel_name();
    if (accept(Tok::star)) {
      if (peek().kind != Tok::number) fail("expected a number after '*'");
      add_term(fn, name, sign * number_value(next()));
    } else {
      add_term(fn, name, sign);
    }
  }

  std::string channel_name() {
    if (peek().kind != Tok::ident) fail("expected a channel name, number or formula");
    if (at_keyword("G") || at_keyword("F") || at_keyword("U") || at_keyword("true")) {
      fail("'" + peek().text + "' is reserved and cannot name a channel");
    }
    return next().text;
  }

  double number_value(const Token& t) const {
    try {
      return std::stod(t.text);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + t.text + "'", t.line, t.column);
    }
  }

  int integer() {
    const Token& t = expect(Tok::number, "an integer");
    if (t.text.find_first_not_of("0123456789") != std::string::npos) {
      throw ParseError("interval bounds must be integers", t.line, t.column);
    }
    return std::stoi(t.text);
  }

  Interval maybe_interval() {
    if (peek().kind != Tok::lbracket) return Interval::unbounded();
    const Token open = next();
    Interval iv;
    iv.a = integer();
    expect(Tok::comma, "','");
    if (peek().kind == Tok::ident && peek().text == "inf") {
      next();
    } else {
      iv.b = integer();
    }
    expect(Tok::rbracket, "']'");
    if (iv.b && *iv.b < iv.a) throw ParseError("malformed interval: a > b", open.line, open.column);
    return iv;
  }

  std::vector<WeightSpec> maybe_pins() {
    std::vector<WeightSpec> pins;
    if (!accept(Tok::lbrace)) return pins;
    do {
      if (peek().kind == Tok::number) {
        pins.push_back({number_value(next()), ""});
      } else if (peek().kind == Tok::ident) {
        const std::string& label = next().text;
        pins.push_back({std::nullopt, label == "_" ? "" : label});
      } else {
        fail("expected a weight constant or parameter name");
      }
    } while (accept(Tok::comma));
    expect(Tok::rbrace, "'}'");
    return pins;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Formula parse_formula(std::string_view text) { return detail::Parser(text).parse(); }

}  // namespace wstlpref

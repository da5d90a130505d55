#pragma once

#include "cmtk/syntax.hpp"

#include <cctype>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cmtk {

class ParseError : public CmtkError {
 public:
  ParseError(const std::string& msg, int line, int col)
      : CmtkError(std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

// ---------------------------------------------------------------------------
// Lexer

enum class Tok {
  End,
  Ident,
  Number,   // integer, p/q, or decimal; single token only when it starts with a digit
  LParen,
  RParen,
  LBrace,
  RBrace,
  Comma,
  Semi,
  Colon,
  Dot,
  Arrow,    // ->
  Pipe,     // |
  Tilde,    // ~
  Plus,
  SubDot,   // -.  truncated subtraction
  Minus,    // -   only inside |a - b|
  Slash,    // /   halving when followed by 2
  AndOp,    // /\  max
  OrOp,     // \/  min
  Equals,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Rat number;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }
  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    skip_ws();
    tok_ = Token{};
    tok_.line = line_;
    tok_.col = col_;
    if (pos_ >= src_.size()) {
      tok_.kind = Tok::End;
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
              src_[pos_] == '\''))
        bump();
      tok_.kind = Tok::Ident;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      if (pos_ < src_.size() && (src_[pos_] == '/' || src_[pos_] == '.')) {
        // p/q or decimal, but only when digits follow directly
        if (pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
          bump();
          while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
        }
      }
      tok_.kind = Tok::Number;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      auto q = rat_from_string(tok_.text);
      if (!q) fail("bad numeric literal: " + tok_.text);
      tok_.number = *q;
      return;
    }
    bump();
    switch (c) {
      case '(': tok_.kind = Tok::LParen; return;
      case ')': tok_.kind = Tok::RParen; return;
      case '{': tok_.kind = Tok::LBrace; return;
      case '}': tok_.kind = Tok::RBrace; return;
      case ',': tok_.kind = Tok::Comma; return;
      case ';': tok_.kind = Tok::Semi; return;
      case ':': tok_.kind = Tok::Colon; return;
      case '.': tok_.kind = Tok::Dot; return;
      case '|': tok_.kind = Tok::Pipe; return;
      case '~': tok_.kind = Tok::Tilde; return;
      case '+': tok_.kind = Tok::Plus; return;
      case '=': tok_.kind = Tok::Equals; return;
      case '-':
        if (pos_ < src_.size() && src_[pos_] == '.') {
          bump();
          tok_.kind = Tok::SubDot;
        } else if (pos_ < src_.size() && src_[pos_] == '>') {
          bump();
          tok_.kind = Tok::Arrow;
        } else {
          tok_.kind = Tok::Minus;
        }
        return;
      case '/':
        if (pos_ < src_.size() && src_[pos_] == '\\') {
          bump();
          tok_.kind = Tok::AndOp;
        } else {
          tok_.kind = Tok::Slash;
        }
        return;
      case '\\':
        if (pos_ < src_.size() && src_[pos_] == '/') {
          bump();
          tok_.kind = Tok::OrOp;
          return;
        }
        fail("unexpected character '\\'");
      default:
        fail(std::string("unexpected character '") + c + "'");
    }
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '#') {  // line comment
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, line_, col_); }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token tok_;
};

// ---------------------------------------------------------------------------
// Eq-sort specification AST (built by the parser, executed by eqcons)

struct EqLet {
  std::string name;
  std::vector<Variable> params;
  Formula body;
};

enum class EqKind { Product, DefSet, CanParam, Union };

struct EqSortDecl {
  std::string name;
  EqKind kind = EqKind::Product;
  std::vector<std::string> product_sorts;
  size_t depth = 0;
  Formula formula;               // defset predicate / canparam formula
  std::vector<Variable> xvars;   // defset context / canparam x-part
  std::vector<Variable> yvars;   // canparam parameter part
  std::vector<std::string> union_refs;
};

struct EqSpecFile {
  std::vector<EqLet> lets;
  std::vector<EqSortDecl> sorts;
};

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  Parser(std::string_view text, const Signature* sig = nullptr) : lex_(text), sig_(sig) {}

  // --- formulas ------------------------------------------------------------

  Formula parse_formula_whole() {
    Formula f = formula();
    expect_end();
    finish_formula(f);
    return f;
  }

  // --- signatures and theories ----------------------------------------------

  Signature parse_signature_whole() {
    Signature sig;
    while (lex_.peek().kind != Tok::End) signature_item(sig, nullptr);
    sig.validate();
    return sig;
  }

  Theory parse_theory_whole() {
    Theory th;
    while (lex_.peek().kind != Tok::End) signature_item(th.signature, &th);
    th.signature.validate();
    for (auto& ax : th.axioms) {
      check_formula(th.signature, ax.sentence);
      if (!is_sentence(ax.sentence))
        throw CmtkError("axiom" + (ax.label.empty() ? "" : " " + ax.label) + " is not closed");
    }
    return th;
  }

  EqSpecFile parse_eqspec_whole() {
    EqSpecFile file;
    while (lex_.peek().kind != Tok::End) eqspec_item(file);
    return file;
  }

 private:
  // Sorts inferred for free variables, from their positions of use.
  std::map<std::string, std::string> inferred_;
  std::vector<Variable> scope_;

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError(msg, lex_.peek().line, lex_.peek().col);
  }

  Token expect(Tok k, const std::string& what) {
    if (lex_.peek().kind != k) fail("expected " + what);
    return lex_.next();
  }

  void expect_end() {
    if (lex_.peek().kind != Tok::End) fail("trailing input");
  }

  bool accept(Tok k) {
    if (lex_.peek().kind == k) {
      lex_.next();
      return true;
    }
    return false;
  }

  bool peek_ident(const char* kw) const {
    return lex_.peek().kind == Tok::Ident && lex_.peek().text == kw;
  }

  const Signature& sig() {
    if (!sig_) fail("formula parsing requires a signature");
    return *sig_;
  }

  void finish_formula(const Formula& f) {
    if (sig_) check_formula(*sig_, f);
  }

  // formula := quantifier | or_expr
  Formula formula() {
    if (peek_ident("sup") || peek_ident("inf")) {
      bool is_sup = lex_.next().text == "sup";
      std::vector<Variable> binders = binder_list();
      expect(Tok::Dot, "'.' after quantifier variables");
      size_t n = scope_.size();
      for (const auto& b : binders) {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
          if (it->name == b.name && it->sort != b.sort)
            fail("variable " + b.name + " shadowed at a different sort");
        scope_.push_back(b);
      }
      Formula body = formula();
      scope_.resize(n);
      return f_quant(is_sup ? FormulaKind::Sup : FormulaKind::Inf, std::move(binders),
                     std::move(body));
    }
    return or_expr();
  }

  std::vector<Variable> binder_list() {
    std::vector<Variable> out;
    while (true) {
      Token name = expect(Tok::Ident, "variable name");
      expect(Tok::Colon, "':' in variable binding");
      Token sort = expect(Tok::Ident, "sort name");
      if (sig_ && !sig().has_sort(sort.text)) fail("unknown sort: " + sort.text);
      for (const auto& v : out)
        if (v.name == name.text) fail("repeated variable " + name.text + " in quantifier tuple");
      out.push_back(Variable{name.text, sort.text});
      if (!accept(Tok::Comma)) break;
    }
    return out;
  }

  Formula or_expr() {
    Formula f = and_expr();
    while (lex_.peek().kind == Tok::OrOp) {
      lex_.next();
      f = f_min(std::move(f), and_expr());
    }
    return f;
  }

  Formula and_expr() {
    Formula f = sum_expr();
    while (lex_.peek().kind == Tok::AndOp) {
      lex_.next();
      f = f_max(std::move(f), sum_expr());
    }
    return f;
  }

  Formula sum_expr() {
    Formula f = unary_expr();
    while (true) {
      if (lex_.peek().kind == Tok::Plus) {
        lex_.next();
        f = f_add(std::move(f), unary_expr());
      } else if (lex_.peek().kind == Tok::SubDot) {
        lex_.next();
        f = f_sub(std::move(f), unary_expr());
      } else {
        return f;
      }
    }
  }

  Formula unary_expr() {
    // A quantifier in operand position extends maximally to the right.
    if (peek_ident("sup") || peek_ident("inf")) return formula();
    if (accept(Tok::Tilde)) return f_neg(unary_expr());
    return postfix_expr();
  }

  Formula postfix_expr() {
    Formula f = primary();
    while (lex_.peek().kind == Tok::Slash) {
      lex_.next();
      Token two = expect(Tok::Number, "2 after '/'");
      if (two.number != 2) fail("only halving '/2' is in the basis");
      f = f_half(std::move(f));
    }
    return f;
  }

  Formula primary() {
    const Token& t = lex_.peek();
    switch (t.kind) {
      case Tok::Number: {
        Token n = lex_.next();
        if (!in_unit_interval(n.number)) fail("constant " + n.text + " outside [0,1]");
        return f_const(n.number);
      }
      case Tok::LParen: {
        lex_.next();
        Formula f = formula();
        expect(Tok::RParen, "')'");
        return f;
      }
      case Tok::Pipe: {
        lex_.next();
        Formula a = sum_expr();
        expect(Tok::Minus, "'-' inside |...|");
        Formula b = sum_expr();
        expect(Tok::Pipe, "closing '|'");
        return f_abs_diff(std::move(a), std::move(b));
      }
      case Tok::Ident: {
        if (t.text == "min" || t.text == "max") {
          bool is_min = lex_.next().text == "min";
          expect(Tok::LParen, "'('");
          Formula a = formula();
          expect(Tok::Comma, "','");
          Formula b = formula();
          expect(Tok::RParen, "')'");
          return is_min ? f_min(std::move(a), std::move(b)) : f_max(std::move(a), std::move(b));
        }
        Token name = lex_.next();
        if (const RelationSymbol* r = sig().find_relation(name.text)) {
          std::vector<Term> args;
          if (r->domain.empty()) {
            if (accept(Tok::LParen)) expect(Tok::RParen, "')'");
          } else {
            expect(Tok::LParen, "'(' after relation " + name.text);
            for (size_t i = 0; i < r->domain.size(); ++i) {
              if (i) expect(Tok::Comma, "','");
              args.push_back(term(r->domain[i]));
            }
            expect(Tok::RParen, "')'");
          }
          return f_atom(name.text, std::move(args));
        }
        if (const NativeConnective* n = NativeRegistry::instance().find(name.text)) {
          expect(Tok::LParen, "'(' after native " + name.text);
          std::vector<Formula> args;
          for (size_t i = 0; i < n->arity; ++i) {
            if (i) expect(Tok::Comma, "','");
            args.push_back(formula());
          }
          expect(Tok::RParen, "')'");
          return f_native(name.text, std::move(args));
        }
        fail("unknown relation symbol: " + name.text);
      }
      default:
        fail("expected a formula");
    }
  }

  Term term(const std::string& expected_sort) {
    Token name = expect(Tok::Ident, "term");
    if (const FunctionSymbol* f = sig().find_function(name.text)) {
      std::vector<Term> args;
      if (!f->domain.empty()) {
        expect(Tok::LParen, "'(' after function " + name.text);
        for (size_t i = 0; i < f->domain.size(); ++i) {
          if (i) expect(Tok::Comma, "','");
          args.push_back(term(f->domain[i]));
        }
        expect(Tok::RParen, "')'");
      } else if (accept(Tok::LParen)) {
        expect(Tok::RParen, "')'");
      }
      if (f->codomain != expected_sort)
        fail("term " + name.text + " has sort " + f->codomain + ", expected " + expected_sort);
      return Term::make_app(name.text, std::move(args));
    }
    // a variable: bound, previously inferred, or newly inferred here
    for (auto it = scope_.rbegin(); it != scope_.rend(); ++it)
      if (it->name == name.text) {
        if (it->sort != expected_sort)
          fail("variable " + name.text + " has sort " + it->sort + ", expected " + expected_sort);
        return Term::make_var(*it);
      }
    auto [it, inserted] = inferred_.try_emplace(name.text, expected_sort);
    if (!inserted && it->second != expected_sort)
      fail("variable " + name.text + " used at sorts " + it->second + " and " + expected_sort);
    return Term::make_var(Variable{name.text, expected_sort});
  }

  // --- signature items -------------------------------------------------------

  void signature_item(Signature& sig, Theory* th) {
    Token kw = expect(Tok::Ident, "declaration");
    if (kw.text == "sort") {
      Token name = expect(Tok::Ident, "sort name");
      sig.sorts.push_back(name.text);
      expect(Tok::Semi, "';'");
    } else if (kw.text == "fn") {
      FunctionSymbol f;
      f.name = expect(Tok::Ident, "function name").text;
      expect(Tok::Colon, "':'");
      if (lex_.peek().kind != Tok::Arrow) {
        f.domain.push_back(expect(Tok::Ident, "sort").text);
        while (accept(Tok::Comma)) f.domain.push_back(expect(Tok::Ident, "sort").text);
      }
      expect(Tok::Arrow, "'->'");
      f.codomain = expect(Tok::Ident, "sort").text;
      expect(Tok::Semi, "';'");
      sig.functions.push_back(std::move(f));
    } else if (kw.text == "rel") {
      RelationSymbol r;
      r.name = expect(Tok::Ident, "relation name").text;
      expect(Tok::Colon, "':'");
      r.domain.push_back(expect(Tok::Ident, "sort").text);
      while (accept(Tok::Comma)) r.domain.push_back(expect(Tok::Ident, "sort").text);
      expect(Tok::Semi, "';'");
      sig.relations.push_back(std::move(r));
    } else if (kw.text == "metric") {
      RelationSymbol r;
      r.name = expect(Tok::Ident, "metric name").text;
      expect(Tok::Colon, "':'");
      std::string s = expect(Tok::Ident, "sort").text;
      r.domain = {s, s};
      r.metric_for = s;
      expect(Tok::Semi, "';'");
      sig.relations.push_back(std::move(r));
    } else if (kw.text == "modulus") {
      Token name = expect(Tok::Ident, "symbol name");
      Modulus m;
      expect(Tok::LBrace, "'{'");
      while (lex_.peek().kind != Tok::RBrace) {
        Token delta = expect(Tok::Number, "delta");
        expect(Tok::Arrow, "'->'");
        Token eps = expect(Tok::Number, "epsilon");
        expect(Tok::Semi, "';'");
        m.pairs.emplace_back(delta.number, eps.number);
      }
      lex_.next();  // consume '}'
      m.normalize();
      if (!m.entries_valid()) fail("modulus entries must lie in (0,1]");
      bool found = false;
      for (auto& f : sig.functions)
        if (f.name == name.text) {
          f.modulus = m;
          found = true;
        }
      for (auto& r : sig.relations)
        if (r.name == name.text) {
          r.modulus = m;
          found = true;
        }
      if (!found) fail("modulus for undeclared symbol: " + name.text);
    } else if (kw.text == "axiom") {
      if (!th) fail("axioms are not allowed in a signature file");
      Axiom ax;
      // optional "label :" prefix
      if (lex_.peek().kind == Tok::Ident) {
        Lexer save = lex_;
        Token label = lex_.next();
        if (lex_.peek().kind == Tok::Colon && !sig.find_relation(label.text) &&
            label.text != "min" && label.text != "max" && label.text != "sup" &&
            label.text != "inf") {
          lex_.next();
          ax.label = label.text;
        } else {
          lex_ = save;
        }
      }
      sig_ = &sig;
      inferred_.clear();
      ax.sentence = formula();
      expect(Tok::Semi, "';'");
      th->axioms.push_back(std::move(ax));
    } else {
      fail("unknown declaration: " + kw.text);
    }
  }

  // --- eqsort specifications --------------------------------------------------

  std::vector<Variable> param_list() {
    std::vector<Variable> out;
    while (true) {
      Token name = expect(Tok::Ident, "variable name");
      expect(Tok::Colon, "':'");
      Token sort = expect(Tok::Ident, "sort name");
      if (sig_ && !sig().has_sort(sort.text)) fail("unknown sort: " + sort.text);
      out.push_back(Variable{name.text, sort.text});
      if (!accept(Tok::Comma)) break;
    }
    return out;
  }

  Formula formula_in_context(const std::vector<Variable>& ctx) {
    size_t n = scope_.size();
    for (const auto& v : ctx) scope_.push_back(v);
    inferred_.clear();
    Formula f = formula();
    scope_.resize(n);
    return f;
  }

  void eqspec_item(EqSpecFile& file) {
    Token kw = expect(Tok::Ident, "'let' or 'eqsort'");
    if (kw.text == "let") {
      EqLet let;
      let.name = expect(Tok::Ident, "name").text;
      expect(Tok::LParen, "'('");
      let.params = param_list();
      expect(Tok::RParen, "')'");
      expect(Tok::Equals, "'='");
      let.body = formula_in_context(let.params);
      finish_formula(let.body);
      expect(Tok::Semi, "';'");
      file.lets.push_back(std::move(let));
      return;
    }
    if (kw.text != "eqsort") fail("expected 'let' or 'eqsort'");
    EqSortDecl decl;
    decl.name = expect(Tok::Ident, "eqsort name").text;
    expect(Tok::Equals, "'='");
    Token ctor = expect(Tok::Ident, "constructor");
    if (ctor.text == "product") {
      decl.kind = EqKind::Product;
      expect(Tok::LParen, "'('");
      decl.product_sorts.push_back(expect(Tok::Ident, "sort").text);
      while (accept(Tok::Comma)) decl.product_sorts.push_back(expect(Tok::Ident, "sort").text);
      expect(Tok::RParen, "')'");
      if (!peek_ident("depth")) fail("expected 'depth'");
      lex_.next();
      Token d = expect(Tok::Number, "depth");
      if (denominator(d.number) != 1 || d.number < 1) fail("depth must be a positive integer");
      decl.depth = static_cast<size_t>(numerator(d.number).convert_to<long>());
    } else if (ctor.text == "defset") {
      decl.kind = EqKind::DefSet;
      expect(Tok::LParen, "'('");
      resolve_predicate_ref(file, decl.formula, decl.xvars);
      expect(Tok::RParen, "')'");
    } else if (ctor.text == "canparam") {
      decl.kind = EqKind::CanParam;
      expect(Tok::LParen, "'('");
      parse_canparam_body(file, decl);
      expect(Tok::RParen, "')'");
    } else if (ctor.text == "union") {
      decl.kind = EqKind::Union;
      expect(Tok::LParen, "'('");
      decl.union_refs.push_back(expect(Tok::Ident, "canparam eqsort name").text);
      while (accept(Tok::Comma))
        decl.union_refs.push_back(expect(Tok::Ident, "canparam eqsort name").text);
      expect(Tok::RParen, "')'");
    } else {
      fail("unknown eqsort constructor: " + ctor.text);
    }
    expect(Tok::Semi, "';'");
    file.sorts.push_back(std::move(decl));
  }

  // defset(A) with A a let name, or defset(<formula> ; x : S, ...)
  void resolve_predicate_ref(EqSpecFile& file, Formula& out, std::vector<Variable>& ctx) {
    if (lex_.peek().kind == Tok::Ident) {
      for (const auto& let : file.lets) {
        if (let.name == lex_.peek().text) {
          Lexer save = lex_;
          lex_.next();
          if (lex_.peek().kind == Tok::RParen || lex_.peek().kind == Tok::Semi) {
            out = let.body;
            ctx = let.params;
            return;
          }
          lex_ = save;  // a formula that merely starts with the let name
          break;
        }
      }
    }
    // inline: formula ';' context
    inferred_.clear();
    Formula f = formula();
    expect(Tok::Semi, "';' before predicate context");
    ctx = param_list();
    out = std::move(f);
    finish_formula(out);
  }

  void parse_canparam_body(EqSpecFile& file, EqSortDecl& decl) {
    // canparam(phi ; x : S, ... ; y : S, ...) where phi is a let name or formula
    bool resolved = false;
    if (lex_.peek().kind == Tok::Ident) {
      for (const auto& let : file.lets) {
        if (let.name == lex_.peek().text) {
          Lexer save = lex_;
          lex_.next();
          if (lex_.peek().kind == Tok::Semi) {
            decl.formula = let.body;
            resolved = true;
          } else {
            lex_ = save;
          }
          break;
        }
      }
    }
    if (!resolved) {
      // formula first, contexts after; free-variable sorts are inferred
      // from positions of use and validated against the contexts later
      inferred_.clear();
      decl.formula = formula();
      finish_formula(decl.formula);
    }
    expect(Tok::Semi, "';' before x-context");
    decl.xvars = param_list();
    expect(Tok::Semi, "';' before y-context");
    decl.yvars = param_list();
  }

  Lexer lex_;
  const Signature* sig_;
};

// Convenience entry points.
inline Formula parse_formula(std::string_view text, const Signature& sig) {
  Parser p(text, &sig);
  return p.parse_formula_whole();
}
inline Signature parse_signature(std::string_view text) {
  Parser p(text);
  return p.parse_signature_whole();
}
inline Theory parse_theory(std::string_view text) {
  Parser p(text);
  return p.parse_theory_whole();
}
inline EqSpecFile parse_eqspec(std::string_view text, const Signature& sig) {
  Parser p(text, &sig);
  return p.parse_eqspec_whole();
}

// ---------------------------------------------------------------------------
// Printer. Deterministic; parse(print(v)) == v structurally and printing is
// byte-stable under reparse.

inline std::string print_term(const Term& t) {
  if (t.is_var) return t.var.name;
  if (t.args.empty()) return t.fn;
  std::string s = t.fn + "(";
  for (size_t i = 0; i < t.args.size(); ++i) {
    if (i) s += ", ";
    s += print_term(t.args[i]);
  }
  return s + ")";
}

namespace detail {

// Precedence: 0 quantifier, 1 +/-. chain, 2 prefix ~, 3 postfix /2, 4 atoms.
inline int formula_prec(const Formula& f) {
  switch (f.kind) {
    case FormulaKind::Sup:
    case FormulaKind::Inf:
      return 0;
    case FormulaKind::Add:
    case FormulaKind::Sub:
      return 1;
    case FormulaKind::Neg:
      return 2;
    case FormulaKind::Half:
      return 3;
    default:
      return 4;
  }
}

inline bool is_abs_diff(const Formula& f) {
  return f.kind == FormulaKind::Max && f.kids.size() == 2 &&
         f.kids[0].kind == FormulaKind::Sub && f.kids[1].kind == FormulaKind::Sub &&
         f.kids[0].kids[0] == f.kids[1].kids[1] && f.kids[0].kids[1] == f.kids[1].kids[0];
}

inline void print_formula_rec(const Formula& f, int min_prec, std::string& out) {
  bool parens = formula_prec(f) < min_prec && !is_abs_diff(f);
  if (parens) out += "(";
  switch (f.kind) {
    case FormulaKind::Const:
      out += rat_to_string(f.value);
      break;
    case FormulaKind::Atom:
      out += f.symbol;
      if (!f.terms.empty()) {
        out += "(";
        for (size_t i = 0; i < f.terms.size(); ++i) {
          if (i) out += ", ";
          out += print_term(f.terms[i]);
        }
        out += ")";
      }
      break;
    case FormulaKind::Sup:
    case FormulaKind::Inf: {
      out += f.kind == FormulaKind::Sup ? "sup " : "inf ";
      for (size_t i = 0; i < f.binders.size(); ++i) {
        if (i) out += ", ";
        out += f.binders[i].name + ":" + f.binders[i].sort;
      }
      out += ". ";
      print_formula_rec(f.kids[0], 0, out);
      break;
    }
    case FormulaKind::Add:
    case FormulaKind::Sub:
      print_formula_rec(f.kids[0], 1, out);
      out += f.kind == FormulaKind::Add ? " + " : " -. ";
      print_formula_rec(f.kids[1], 2, out);
      break;
    case FormulaKind::Neg:
      out += "~";
      print_formula_rec(f.kids[0], 2, out);
      break;
    case FormulaKind::Half:
      // "1/2" and "x/2/2" would re-lex as rational literals: protect both.
      if (f.kids[0].kind == FormulaKind::Const || f.kids[0].kind == FormulaKind::Half) {
        out += "(";
        print_formula_rec(f.kids[0], 0, out);
        out += ")";
      } else {
        print_formula_rec(f.kids[0], 3, out);
      }
      out += "/2";
      break;
    case FormulaKind::Min:
    case FormulaKind::Max:
      if (is_abs_diff(f)) {
        out += "|";
        print_formula_rec(f.kids[0].kids[0], 1, out);
        out += " - ";
        print_formula_rec(f.kids[0].kids[1], 1, out);
        out += "|";
        break;
      }
      out += f.kind == FormulaKind::Min ? "min(" : "max(";
      print_formula_rec(f.kids[0], 0, out);
      out += ", ";
      print_formula_rec(f.kids[1], 0, out);
      out += ")";
      break;
    case FormulaKind::Native: {
      out += f.symbol + "(";
      for (size_t i = 0; i < f.kids.size(); ++i) {
        if (i) out += ", ";
        print_formula_rec(f.kids[i], 0, out);
      }
      out += ")";
      break;
    }
  }
  if (parens) out += ")";
}

}  // namespace detail

inline std::string print_formula(const Formula& f) {
  std::string out;
  detail::print_formula_rec(f, 0, out);
  return out;
}

inline std::string print_modulus(const std::string& symbol, const Modulus& m) {
  std::string out = "modulus " + symbol + " {";
  for (const auto& [d, e] : m.pairs)
    out += " " + rat_to_string(d) + " -> " + rat_to_string(e) + ";";
  return out + " }\n";
}

inline std::string print_signature(const Signature& sig) {
  std::string out;
  for (const auto& s : sig.sorts) out += "sort " + s + ";\n";
  for (const auto& f : sig.functions) {
    out += "fn " + f.name + " : ";
    for (size_t i = 0; i < f.domain.size(); ++i) {
      if (i) out += ", ";
      out += f.domain[i];
    }
    out += (f.domain.empty() ? "-> " : " -> ") + f.codomain + ";\n";
  }
  for (const auto& r : sig.relations) {
    if (r.metric_for) {
      out += "metric " + r.name + " : " + *r.metric_for + ";\n";
    } else {
      out += "rel " + r.name + " : ";
      for (size_t i = 0; i < r.domain.size(); ++i) {
        if (i) out += ", ";
        out += r.domain[i];
      }
      out += ";\n";
    }
  }
  for (const auto& f : sig.functions)
    if (f.modulus) out += print_modulus(f.name, *f.modulus);
  for (const auto& r : sig.relations)
    if (r.modulus) out += print_modulus(r.name, *r.modulus);
  return out;
}

inline std::string print_theory(const Theory& th) {
  std::string out = print_signature(th.signature);
  for (const auto& ax : th.axioms) {
    out += "axiom ";
    if (!ax.label.empty()) out += ax.label + " : ";
    out += print_formula(ax.sentence) + ";\n";
  }
  return out;
}

}  // namespace cmtk

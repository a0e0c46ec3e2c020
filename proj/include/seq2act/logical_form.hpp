#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "seq2act/errors.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// Abstract syntax of the canonical logical-form language, a Prolog-style
// query calculus:
//
//   query      ::= "answer" "(" VAR "," body ")"
//   body       ::= term | "(" term ("," term)* ")"
//   term       ::= type | relation | const | operator
//   type       ::= NAME "(" argval ")"
//   relation   ::= NAME "(" argval "," argval ")"
//   const      ::= "const" "(" VAR "," entity ")"
//   operator   ::= NAME "(" (VAR ",")* body ("," VAR)? ")"
//   argval     ::= VAR | entity
//   entity     ::= NAME"id" "(" NAME ")"        -- e.g. stateid(texas)
//
// Variables are upper-case identifiers (A, B, ..., A1, ...); predicate,
// type and entity names are lower-case. An entity literal's constructor is
// its type name with an "id" suffix. An operator's leading variables bind its
// non-return roles in schema order and the optional trailing variable binds
// arg-return.

struct LfVar {
  std::string name;
};

struct LfEntity {
  std::string type;  // schema type, without the "id" suffix
  std::string name;
};

using LfArg = std::variant<LfVar, LfEntity>;

struct LfTerm;

struct LfTypePred {
  std::string type;
  LfArg arg;
};

struct LfRelationPred {
  std::string relation;
  LfArg arg1;
  LfArg arg2;
};

struct LfConstPred {
  std::string var;
  LfEntity entity;
};

struct LfOperatorApp {
  std::string op;
  std::vector<std::string> leading_vars;  // bind non-return roles, in order
  std::vector<LfTerm> body;
  std::optional<std::string> return_var;  // binds arg-return
};

struct LfTerm {
  std::variant<LfTypePred, LfRelationPred, LfConstPred, LfOperatorApp> node;
};

struct LogicalForm {
  std::string answer_var;
  std::vector<LfTerm> body;
};

namespace lf_detail {

inline bool is_variable_name(const std::string& s) {
  if (s.empty() || s[0] < 'A' || s[0] > 'Z') return false;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

// The canonical variable name for discovery index i: A..Z, A1..Z1, ...
inline std::string canonical_var_name(std::size_t i) {
  std::string out(1, static_cast<char>('A' + i % 26));
  if (i >= 26) out += std::to_string(i / 26);
  return out;
}

struct Token {
  enum class Kind { LParen, RParen, Comma, Symbol, End } kind;
  std::string text;
  std::size_t pos;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::size_t start = pos_;
    if (pos_ >= text_.size()) {
      current_ = {Token::Kind::End, "", start};
      return;
    }
    char c = text_[pos_];
    if (c == '(') { ++pos_; current_ = {Token::Kind::LParen, "(", start}; return; }
    if (c == ')') { ++pos_; current_ = {Token::Kind::RParen, ")", start}; return; }
    if (c == ',') { ++pos_; current_ = {Token::Kind::Comma, ",", start}; return; }
    std::string sym;
    while (pos_ < text_.size()) {
      char d = text_[pos_];
      if (d == '(' || d == ')' || d == ',' || std::isspace(static_cast<unsigned char>(d))) break;
      sym += d;
      ++pos_;
    }
    if (sym.empty())
      fail(Errc::SyntaxError, "unexpected character '" + std::string(1, c) + "' at position " +
                                  std::to_string(start));
    current_ = {Token::Kind::Symbol, sym, start};
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  Token current_{Token::Kind::End, "", 0};
};

[[noreturn]] inline void syntax_error(const Token& t, const std::string& expected) {
  if (t.kind == Token::Kind::End)
    fail(Errc::SyntaxError, "expected " + expected + " at end of input");
  fail(Errc::SyntaxError, "expected " + expected + " at position " + std::to_string(t.pos) +
                              ", got '" + t.text + "'");
}

// Intermediate parse shape: a call "name(item, item, ...)" where each item is
// a variable, a bare symbol, a nested call, or a parenthesized group.
struct ParsedItem;
struct ParsedCall {
  std::string name;
  std::size_t pos = 0;
  std::vector<ParsedItem> args;
};
struct ParsedItem {
  enum class Kind { Symbol, Call, Group } kind = Kind::Symbol;
  std::string symbol;
  std::size_t pos = 0;
  std::vector<ParsedCall> group;  // Group: the conjunction's calls
  std::vector<ParsedCall> call;   // Call: single element
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lex_(text) {}

  LogicalForm parse_query() {
    ParsedCall top = parse_call();
    expect_end();
    if (top.name != "answer")
      fail(Errc::SyntaxError, "query must start with 'answer', got '" + top.name + "'");
    if (top.args.size() != 2)
      fail(Errc::SyntaxError, "answer takes a variable and a body");
    if (top.args[0].kind != ParsedItem::Kind::Symbol || !is_variable_name(top.args[0].symbol))
      fail(Errc::SyntaxError, "answer's first argument must be a variable");
    LogicalForm lf;
    lf.answer_var = top.args[0].symbol;
    lf.body = item_to_body(top.args[1]);
    return lf;
  }

 private:
  ParsedCall parse_call() {
    Token name = lex_.take();
    if (name.kind != Token::Kind::Symbol) syntax_error(name, "a predicate name");
    ParsedCall call;
    call.name = name.text;
    call.pos = name.pos;
    Token open = lex_.take();
    if (open.kind != Token::Kind::LParen) syntax_error(open, "'('");
    if (lex_.peek().kind == Token::Kind::RParen)
      fail(Errc::SyntaxError, "empty argument list at position " + std::to_string(open.pos));
    while (true) {
      call.args.push_back(parse_item());
      Token sep = lex_.take();
      if (sep.kind == Token::Kind::RParen) break;
      if (sep.kind != Token::Kind::Comma) syntax_error(sep, "',' or ')'");
    }
    return call;
  }

  ParsedItem parse_item() {
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::LParen) {
      // A parenthesized conjunction of calls.
      ParsedItem item;
      item.kind = ParsedItem::Kind::Group;
      item.pos = t.pos;
      lex_.take();
      while (true) {
        item.group.push_back(parse_call());
        Token sep = lex_.take();
        if (sep.kind == Token::Kind::RParen) break;
        if (sep.kind != Token::Kind::Comma) syntax_error(sep, "',' or ')'");
      }
      return item;
    }
    if (t.kind != Token::Kind::Symbol) syntax_error(t, "an argument");
    Token sym = lex_.take();
    if (lex_.peek().kind == Token::Kind::LParen) {
      // Nested call; put the already-consumed name back together by parsing
      // the argument list here.
      ParsedItem item;
      item.kind = ParsedItem::Kind::Call;
      item.pos = sym.pos;
      ParsedCall call;
      call.name = sym.text;
      call.pos = sym.pos;
      lex_.take();  // '('
      if (lex_.peek().kind == Token::Kind::RParen)
        fail(Errc::SyntaxError, "empty argument list at position " + std::to_string(sym.pos));
      while (true) {
        call.args.push_back(parse_item());
        Token sep = lex_.take();
        if (sep.kind == Token::Kind::RParen) break;
        if (sep.kind != Token::Kind::Comma) syntax_error(sep, "',' or ')'");
      }
      item.call.push_back(std::move(call));
      return item;
    }
    ParsedItem item;
    item.kind = ParsedItem::Kind::Symbol;
    item.symbol = sym.text;
    item.pos = sym.pos;
    return item;
  }

  void expect_end() {
    if (lex_.peek().kind != Token::Kind::End) syntax_error(lex_.peek(), "end of input");
  }

  // --- shaping the generic parse into the AST ---

  std::vector<LfTerm> item_to_body(const ParsedItem& item) {
    std::vector<LfTerm> body;
    if (item.kind == ParsedItem::Kind::Group) {
      for (const ParsedCall& c : item.group) body.push_back(call_to_term(c));
    } else if (item.kind == ParsedItem::Kind::Call) {
      body.push_back(call_to_term(item.call.front()));
    } else {
      fail(Errc::SyntaxError, "expected a term at position " + std::to_string(item.pos));
    }
    return body;
  }

  // An entity literal is NAME"id"(bare lower-case name).
  std::optional<LfEntity> item_as_entity(const ParsedItem& item) {
    if (item.kind != ParsedItem::Kind::Call) return std::nullopt;
    const ParsedCall& c = item.call.front();
    if (c.args.size() != 1 || c.args[0].kind != ParsedItem::Kind::Symbol) return std::nullopt;
    const std::string& inner = c.args[0].symbol;
    if (is_variable_name(inner)) return std::nullopt;
    if (c.name.size() <= 2 || c.name.substr(c.name.size() - 2) != "id") return std::nullopt;
    return LfEntity{c.name.substr(0, c.name.size() - 2), inner};
  }

  LfArg item_to_argval(const ParsedItem& item) {
    if (item.kind == ParsedItem::Kind::Symbol) {
      if (!is_variable_name(item.symbol))
        fail(Errc::SyntaxError, "expected a variable or entity literal at position " +
                                    std::to_string(item.pos) + ", got '" + item.symbol + "'");
      return LfVar{item.symbol};
    }
    if (auto ent = item_as_entity(item)) return *ent;
    fail(Errc::SyntaxError,
         "expected a variable or entity literal at position " + std::to_string(item.pos));
  }

  LfTerm call_to_term(const ParsedCall& call) {
    // const(VAR, entity)
    if (call.name == "const") {
      if (call.args.size() != 2 || call.args[0].kind != ParsedItem::Kind::Symbol ||
          !is_variable_name(call.args[0].symbol))
        fail(Errc::SyntaxError, "const takes a variable and an entity literal (position " +
                                    std::to_string(call.pos) + ")");
      auto ent = item_as_entity(call.args[1]);
      if (!ent)
        fail(Errc::SyntaxError,
             "const's second argument must be an entity literal (position " +
                 std::to_string(call.pos) + ")");
      return LfTerm{LfConstPred{call.args[0].symbol, *ent}};
    }

    // Operator: some argument is a body (a group, or a nested call that is
    // not an entity literal).
    std::optional<std::size_t> body_at;
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      const ParsedItem& a = call.args[i];
      bool is_body = a.kind == ParsedItem::Kind::Group ||
                     (a.kind == ParsedItem::Kind::Call && !item_as_entity(a));
      if (is_body) {
        if (body_at)
          fail(Errc::SyntaxError,
               "operator '" + call.name + "' has more than one body (position " +
                   std::to_string(call.pos) + ")");
        body_at = i;
      }
    }
    if (body_at) {
      LfOperatorApp op;
      op.op = call.name;
      for (std::size_t i = 0; i < *body_at; ++i) {
        const ParsedItem& a = call.args[i];
        if (a.kind != ParsedItem::Kind::Symbol || !is_variable_name(a.symbol))
          fail(Errc::SyntaxError, "operator role arguments must be variables (position " +
                                      std::to_string(call.pos) + ")");
        op.leading_vars.push_back(a.symbol);
      }
      op.body = item_to_body(call.args[*body_at]);
      if (call.args.size() > *body_at + 2)
        fail(Errc::SyntaxError, "operator '" + call.name +
                                    "' takes at most one trailing return variable (position " +
                                    std::to_string(call.pos) + ")");
      if (call.args.size() == *body_at + 2) {
        const ParsedItem& a = call.args.back();
        if (a.kind != ParsedItem::Kind::Symbol || !is_variable_name(a.symbol))
          fail(Errc::SyntaxError, "operator return argument must be a variable (position " +
                                      std::to_string(call.pos) + ")");
        op.return_var = a.symbol;
      }
      return LfTerm{std::move(op)};
    }

    // Type predicate or binary relation.
    if (call.args.size() == 1) return LfTerm{LfTypePred{call.name, item_to_argval(call.args[0])}};
    if (call.args.size() == 2)
      return LfTerm{LfRelationPred{call.name, item_to_argval(call.args[0]),
                                   item_to_argval(call.args[1])}};
    fail(Errc::SyntaxError, "predicate '" + call.name + "' takes one or two arguments (position " +
                                std::to_string(call.pos) + ")");
  }

  Lexer lex_;
};

}  // namespace lf_detail

// Strict-mode validation of an AST against a schema: every type, entity,
// relation and operation must be declared, entity literals must carry the
// entity's declared type, and operator role shapes must match.
inline void validate_against_schema(const LogicalForm& lf, const KBSchema& schema);

// Parses canonical logical-form text. With a schema, symbols are validated
// (strict mode).
inline LogicalForm parse_lf(const std::string& text, const KBSchema* schema = nullptr) {
  lf_detail::Parser parser(text);
  LogicalForm lf = parser.parse_query();
  if (schema) validate_against_schema(lf, *schema);
  return lf;
}

namespace lf_detail {

inline void validate_arg(const LfArg& arg, const KBSchema& schema) {
  if (const LfEntity* e = std::get_if<LfEntity>(&arg)) {
    if (!schema.has_entity(e->name))
      fail(Errc::UnknownSymbol, "entity '" + e->name + "' not in schema");
    if (schema.type_of_entity(e->name) != e->type)
      fail(Errc::UnknownSymbol, "entity '" + e->name + "' is not of type '" + e->type + "'");
  }
}

inline void validate_terms(const std::vector<LfTerm>& terms, const KBSchema& schema) {
  for (const LfTerm& t : terms) {
    if (const auto* tp = std::get_if<LfTypePred>(&t.node)) {
      if (!schema.has_type(tp->type))
        fail(Errc::UnknownSymbol, "type '" + tp->type + "' not in schema");
      validate_arg(tp->arg, schema);
    } else if (const auto* rp = std::get_if<LfRelationPred>(&t.node)) {
      if (!schema.has_relation(rp->relation))
        fail(Errc::UnknownSymbol, "relation '" + rp->relation + "' not in schema");
      validate_arg(rp->arg1, schema);
      validate_arg(rp->arg2, schema);
    } else if (const auto* cp = std::get_if<LfConstPred>(&t.node)) {
      validate_arg(LfArg{cp->entity}, schema);
    } else if (const auto* op = std::get_if<LfOperatorApp>(&t.node)) {
      if (!schema.has_operation(op->op))
        fail(Errc::UnknownSymbol, "operation '" + op->op + "' not in schema");
      const auto& roles = schema.roles_of(op->op);
      std::size_t non_return = 0;
      bool has_return = false;
      for (const auto& r : roles) {
        if (r == "arg-return") has_return = true;
        else ++non_return;
      }
      if (op->leading_vars.size() != non_return)
        fail(Errc::ArityViolation, "operation '" + op->op + "' expects " +
                                       std::to_string(non_return) + " leading role variables");
      if (op->return_var.has_value() != has_return)
        fail(Errc::ArityViolation, "operation '" + op->op + "' " +
                                       (has_return ? "requires" : "does not take") +
                                       " a return variable");
      validate_terms(op->body, schema);
    }
  }
}

inline void render_terms(std::ostream& out, const std::vector<LfTerm>& terms);

inline void render_arg(std::ostream& out, const LfArg& arg) {
  if (const LfVar* v = std::get_if<LfVar>(&arg)) {
    out << v->name;
  } else {
    const LfEntity& e = std::get<LfEntity>(arg);
    out << e.type << "id(" << e.name << ")";
  }
}

inline void render_body(std::ostream& out, const std::vector<LfTerm>& body) {
  if (body.size() == 1) {
    render_terms(out, body);
  } else {
    out << "(";
    render_terms(out, body);
    out << ")";
  }
}

inline void render_terms(std::ostream& out, const std::vector<LfTerm>& terms) {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out << ",";
    const LfTerm& t = terms[i];
    if (const auto* tp = std::get_if<LfTypePred>(&t.node)) {
      out << tp->type << "(";
      render_arg(out, tp->arg);
      out << ")";
    } else if (const auto* rp = std::get_if<LfRelationPred>(&t.node)) {
      out << rp->relation << "(";
      render_arg(out, rp->arg1);
      out << ",";
      render_arg(out, rp->arg2);
      out << ")";
    } else if (const auto* cp = std::get_if<LfConstPred>(&t.node)) {
      out << "const(" << cp->var << ",";
      render_arg(out, LfArg{cp->entity});
      out << ")";
    } else {
      const auto& op = std::get<LfOperatorApp>(t.node);
      out << op.op << "(";
      for (const auto& v : op.leading_vars) out << v << ",";
      render_body(out, op.body);
      if (op.return_var) out << "," << *op.return_var;
      out << ")";
    }
  }
}

}  // namespace lf_detail

inline void validate_against_schema(const LogicalForm& lf, const KBSchema& schema) {
  lf_detail::validate_terms(lf.body, schema);
}

// Renders an AST verbatim, without reordering or renaming. print_lf (in
// convert.hpp) is the canonicalizing printer; this is its final step.
inline std::string render_lf(const LogicalForm& lf) {
  if (lf.body.empty()) fail(Errc::EmptyBody, "logical form has an empty body");
  std::ostringstream out;
  out << "answer(" << lf.answer_var << ",";
  lf_detail::render_body(out, lf.body);
  out << ")";
  return out.str();
}

}  // namespace seq2act

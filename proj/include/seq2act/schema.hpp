#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seq2act/errors.hpp"

namespace seq2act {

// Knowledge-base schema: the type system, the typed entity inventory, binary
// relation signatures and the role lists of aggregation/negation operations.
// Loaded once from the line-oriented schema file and immutable afterwards.
//
// File grammar (one declaration per line, '#' starts a comment):
//   type <name>
//   entity <name> : <type>
//   relation <name>(<type>, <type>)
//   operation <name>(<role>[, <role>]*)     -- role names must start with "arg"
//   operation <name>()                      -- role-free operation (e.g. not)
struct KBSchema {
  std::set<std::string> types;
  std::map<std::string, std::string> entity_type;  // entity name -> type name
  std::map<std::string, std::pair<std::string, std::string>> relations;
  std::map<std::string, std::vector<std::string>> operations;

  bool has_type(const std::string& t) const { return types.count(t) > 0; }
  bool has_entity(const std::string& e) const { return entity_type.count(e) > 0; }
  bool has_relation(const std::string& r) const { return relations.count(r) > 0; }
  bool has_operation(const std::string& o) const { return operations.count(o) > 0; }

  const std::string& type_of_entity(const std::string& e) const {
    auto it = entity_type.find(e);
    if (it == entity_type.end()) fail(Errc::UnknownEntity, "entity '" + e + "' not declared");
    return it->second;
  }

  const std::vector<std::string>& roles_of(const std::string& op) const {
    auto it = operations.find(op);
    if (it == operations.end()) fail(Errc::UnknownSymbol, "operation '" + op + "' not declared");
    return it->second;
  }
};

// Constraint tables derived from a schema: relation signatures reused as
// selectional preferences, and the pairwise disjointness of declared types
// (no type hierarchy: any two distinct types conflict).
struct SemanticConstraintTable {
  std::map<std::string, std::pair<std::string, std::string>> selectional_preference;
  std::vector<std::pair<std::string, std::string>> disjoint_types;  // unordered pairs, lexicographic
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool valid_symbol(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' ||
              c == '-' || c == '<' || c == '>' || c == ':';
    if (!ok) return false;
  }
  return true;
}

// Splits "name(a, b, c)" into name and trimmed argument list. Empty parens
// yield an empty list.
inline std::pair<std::string, std::vector<std::string>> split_call(
    const std::string& text, int line_no) {
  std::size_t open = text.find('(');
  if (open == std::string::npos || text.back() != ')')
    fail(Errc::ParseError, "line " + std::to_string(line_no) + ": expected 'name(...)'");
  std::string name = trim(text.substr(0, open));
  std::string inner = text.substr(open + 1, text.size() - open - 2);
  std::vector<std::string> args;
  if (!trim(inner).empty()) {
    std::stringstream ss(inner);
    std::string piece;
    while (std::getline(ss, piece, ',')) args.push_back(trim(piece));
  }
  return {name, args};
}

}  // namespace detail

inline KBSchema load_schema(const std::string& text) {
  KBSchema schema;
  // First pass parses declarations; type references are validated afterwards
  // so declaration order in the file does not matter.
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::vector<std::pair<std::string, int>> entity_lines, relation_lines;
  std::map<std::string, std::string> entity_decl;
  std::map<std::string, std::pair<std::string, std::string>> relation_decl;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    std::size_t sp = line.find_first_of(" \t");
    std::string keyword = sp == std::string::npos ? line : line.substr(0, sp);
    std::string rest = sp == std::string::npos ? "" : detail::trim(line.substr(sp));
    const std::string at = "line " + std::to_string(line_no) + ": ";

    if (keyword == "type") {
      if (!detail::valid_symbol(rest)) fail(Errc::ParseError, at + "bad type name '" + rest + "'");
      if (!schema.types.insert(rest).second)
        fail(Errc::DuplicateDeclaration, at + "type '" + rest + "' declared twice");
    } else if (keyword == "entity") {
      std::size_t colon = rest.rfind(':');
      if (colon == std::string::npos) fail(Errc::ParseError, at + "expected 'entity <name> : <type>'");
      std::string name = detail::trim(rest.substr(0, colon));
      std::string type = detail::trim(rest.substr(colon + 1));
      if (!detail::valid_symbol(name) || !detail::valid_symbol(type))
        fail(Errc::ParseError, at + "bad entity declaration");
      if (entity_decl.count(name))
        fail(Errc::DuplicateDeclaration, at + "entity '" + name + "' declared twice");
      entity_decl[name] = type;
      entity_lines.emplace_back(name, line_no);
    } else if (keyword == "relation") {
      auto [name, args] = detail::split_call(rest, line_no);
      if (!detail::valid_symbol(name) || args.size() != 2)
        fail(Errc::ParseError, at + "expected 'relation <name>(<type>, <type>)'");
      if (relation_decl.count(name))
        fail(Errc::DuplicateDeclaration, at + "relation '" + name + "' declared twice");
      relation_decl[name] = {args[0], args[1]};
      relation_lines.emplace_back(name, line_no);
    } else if (keyword == "operation") {
      auto [name, args] = detail::split_call(rest, line_no);
      if (!detail::valid_symbol(name))
        fail(Errc::ParseError, at + "bad operation name");
      if (schema.operations.count(name))
        fail(Errc::DuplicateDeclaration, at + "operation '" + name + "' declared twice");
      int returns = 0;
      for (const auto& role : args) {
        if (role.rfind("arg", 0) != 0)
          fail(Errc::ParseError, at + "role '" + role + "' must start with 'arg'");
        if (role == "arg-return") ++returns;
      }
      if (returns > 1) fail(Errc::ParseError, at + "at most one arg-return role");
      schema.operations[name] = args;
    } else {
      fail(Errc::ParseError, at + "unknown declaration '" + keyword + "'");
    }
  }

  for (const auto& [name, line] : entity_lines) {
    const std::string& type = entity_decl[name];
    if (!schema.types.count(type))
      fail(Errc::UndeclaredType,
           "line " + std::to_string(line) + ": entity '" + name + "' uses undeclared type '" + type + "'");
    schema.entity_type[name] = type;
  }
  for (const auto& [name, line] : relation_lines) {
    const auto& sig = relation_decl[name];
    for (const std::string& t : {sig.first, sig.second}) {
      if (!schema.types.count(t))
        fail(Errc::UndeclaredType,
             "line " + std::to_string(line) + ": relation '" + name + "' uses undeclared type '" + t + "'");
    }
    schema.relations[name] = sig;
    if (schema.operations.count(name))
      fail(Errc::DuplicateDeclaration, "'" + name + "' declared as both relation and operation");
  }
  for (const auto& [op, roles] : schema.operations) {
    (void)roles;
    if (schema.types.count(op))
      fail(Errc::DuplicateDeclaration, "'" + op + "' declared as both type and operation");
  }
  return schema;
}

inline SemanticConstraintTable extract_constraints(const KBSchema& schema) {
  SemanticConstraintTable table;
  table.selectional_preference = schema.relations;
  for (auto it = schema.types.begin(); it != schema.types.end(); ++it) {
    for (auto jt = std::next(it); jt != schema.types.end(); ++jt) {
      table.disjoint_types.emplace_back(*it, *jt);
    }
  }
  return table;
}

// Renders a schema back to the file grammar; used by checkpoints so a trained
// model carries its (placeholder-augmented) schema along.
inline std::string render_schema(const KBSchema& schema) {
  std::ostringstream out;
  for (const auto& t : schema.types) out << "type " << t << "\n";
  for (const auto& [e, t] : schema.entity_type) out << "entity " << e << " : " << t << "\n";
  for (const auto& [r, sig] : schema.relations)
    out << "relation " << r << "(" << sig.first << ", " << sig.second << ")\n";
  for (const auto& [o, roles] : schema.operations) {
    out << "operation " << o << "(";
    for (std::size_t i = 0; i < roles.size(); ++i) out << (i ? ", " : "") << roles[i];
    out << ")\n";
  }
  return out.str();
}

}  // namespace seq2act

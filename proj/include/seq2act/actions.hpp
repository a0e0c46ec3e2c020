#pragma once

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seq2act/errors.hpp"
#include "seq2act/graph.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// The graph-construction action alphabet. Every action splits into a
// structure part (the tag, plus the role name for argument actions) and a
// semantic part (the label); the model embeds the two parts independently.
enum class ActionKind {
  AddVariable,
  AddEntity,
  AddType,
  AddEdge,
  StartOperation,
  EndOperation,
  Argument,
};

struct Action {
  ActionKind kind = ActionKind::AddVariable;
  std::string label;  // semantic part
  std::string role;   // structure part of Argument actions ("arg", "arg1_node", "arg-for", ...)

  friend bool operator==(const Action& a, const Action& b) {
    return a.kind == b.kind && a.label == b.label && a.role == b.role;
  }
  friend bool operator<(const Action& a, const Action& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    if (a.role != b.role) return a.role < b.role;
    return a.label < b.label;
  }
};

inline Action make_action(ActionKind kind, std::string label) {
  return Action{kind, std::move(label), {}};
}
inline Action make_argument(std::string role, std::string label) {
  return Action{ActionKind::Argument, std::move(label), std::move(role)};
}

inline std::string structure_part(const Action& a) {
  switch (a.kind) {
    case ActionKind::AddVariable: return "add_variable";
    case ActionKind::AddEntity: return "add_entity_node";
    case ActionKind::AddType: return "add_type_node";
    case ActionKind::AddEdge: return "add_edge";
    case ActionKind::StartOperation: return "start_operation";
    case ActionKind::EndOperation: return "end_operation";
    case ActionKind::Argument: return a.role;
  }
  return "?";
}

inline const std::string& semantic_part(const Action& a) { return a.label; }

inline std::string action_to_string(const Action& a) {
  return structure_part(a) + ":" + a.label;
}

// Parses "<structure>:<semantic>". The short surface forms add_entity,
// add_type and add_node are accepted as aliases of the canonical long forms.
// Any structure part starting with "arg" is an argument action whose role is
// the structure part itself.
inline Action string_to_action(const std::string& text) {
  std::size_t colon = text.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    fail(Errc::ParseError, "action '" + text + "' is not <structure>:<semantic>");
  std::string structure = text.substr(0, colon);
  std::string semantic = text.substr(colon + 1);
  if (structure == "add_variable" || structure == "add_node")
    return make_action(ActionKind::AddVariable, semantic);
  if (structure == "add_entity_node" || structure == "add_entity")
    return make_action(ActionKind::AddEntity, semantic);
  if (structure == "add_type_node" || structure == "add_type")
    return make_action(ActionKind::AddType, semantic);
  if (structure == "add_edge") return make_action(ActionKind::AddEdge, semantic);
  if (structure == "start_operation") return make_action(ActionKind::StartOperation, semantic);
  if (structure == "end_operation") return make_action(ActionKind::EndOperation, semantic);
  if (structure.rfind("arg", 0) == 0) return make_argument(structure, semantic);
  fail(Errc::ParseError, "unknown action structure part '" + structure + "'");
}

inline std::string actions_to_text(const std::vector<Action>& seq) {
  std::ostringstream out;
  for (std::size_t i = 0; i < seq.size(); ++i) out << (i ? " " : "") << action_to_string(seq[i]);
  return out.str();
}

inline std::vector<Action> actions_from_text(const std::string& text) {
  std::vector<Action> out;
  std::istringstream in(text);
  std::string token;
  while (in >> token) out.push_back(string_to_action(token));
  return out;
}

// ---------------------------------------------------------------------------
// Interpreting action sequences

// A main action that is still collecting its argument actions, together with
// the roles it expects (in order) and the node labels bound so far. For
// end_operation the index of the scope being closed rides along so the role
// bindings land on the right scope.
struct PendingMain {
  Action main;
  std::vector<std::string> expected_roles;
  std::vector<std::string> bound_labels;
  std::size_t target_scope = kNoScope;

  bool complete() const { return bound_labels.size() == expected_roles.size(); }
  const std::string& next_role() const { return expected_roles[bound_labels.size()]; }
};

// Interpreter state: the partial graph plus everything needed to place the
// next action (pending arguments, open operation scopes, the label->node
// symbol table and per-node collected type labels).
struct PartialGraphState {
  SemanticGraph graph;
  const KBSchema* schema = nullptr;
  std::optional<PendingMain> pending;
  std::vector<std::size_t> open_scopes;
  std::map<std::string, NodeId> symbols;
  // Type labels collected per variable node: from attachments, from the
  // declared argument types of relations the node participates in, and from
  // const bindings. Distinct labels on one node are a semantic conflict; the
  // recording here is mechanical and the constraint controller decides what
  // to do about it.
  std::map<NodeId, std::vector<std::string>> node_types;

  std::size_t current_scope() const {
    return open_scopes.empty() ? kNoScope : open_scopes.back();
  }
};

inline PartialGraphState initial_state(const KBSchema& schema) {
  PartialGraphState st;
  st.schema = &schema;
  return st;
}

namespace detail {

inline void record_type(PartialGraphState& st, NodeId node, const std::string& type) {
  if (st.graph.nodes[node].kind != NodeKind::Variable) return;
  auto& types = st.node_types[node];
  for (const auto& t : types)
    if (t == type) return;
  types.push_back(type);
}

inline NodeId resolve_label(const PartialGraphState& st, const std::string& label) {
  auto it = st.symbols.find(label);
  if (it == st.symbols.end()) fail(Errc::UnknownLabel, "no node named '" + label + "'");
  return it->second;
}

inline void commit_pending(PartialGraphState& st) {
  PendingMain pending = std::move(*st.pending);
  st.pending.reset();
  const std::size_t scope = st.current_scope();

  switch (pending.main.kind) {
    case ActionKind::AddType: {
      NodeId target = resolve_label(st, pending.bound_labels[0]);
      NodeId type_node = add_node(st.graph, NodeKind::Type, pending.main.label, st.schema, scope);
      add_attachment(st.graph, type_node, target, scope);
      record_type(st, target, pending.main.label);
      break;
    }
    case ActionKind::AddEdge: {
      NodeId a1 = resolve_label(st, pending.bound_labels[0]);
      NodeId a2 = resolve_label(st, pending.bound_labels[1]);
      if (pending.main.label == "const") {
        if (st.graph.nodes[a1].kind != NodeKind::Variable ||
            st.graph.nodes[a2].kind != NodeKind::Entity)
          fail(Errc::InvalidArgument, "const must bind a variable to an entity");
      }
      add_edge(st.graph, pending.main.label, a1, a2, scope);
      if (pending.main.label == "const") {
        const Node& ent = st.graph.nodes[a2];
        if (!ent.entity_type.empty()) record_type(st, a1, ent.entity_type);
      } else if (st.schema && st.schema->has_relation(pending.main.label)) {
        const auto& sig = st.schema->relations.at(pending.main.label);
        record_type(st, a1, sig.first);
        record_type(st, a2, sig.second);
      }
      break;
    }
    case ActionKind::EndOperation: {
      OperationScope& sc = st.graph.scopes[pending.target_scope];
      for (std::size_t i = 0; i < pending.expected_roles.size(); ++i) {
        NodeId node = resolve_label(st, pending.bound_labels[i]);
        sc.role_args.emplace_back(pending.expected_roles[i], node);
        if (pending.expected_roles[i] == "arg-return" && st.open_scopes.empty())
          st.graph.return_node = node;
      }
      break;
    }
    default:
      fail(Errc::ArityViolation, "internal: unexpected pending action kind");
  }
}

}  // namespace detail

// Applies one action to the state, committing a node/edge/attachment/scope
// whenever an arity is completed. Throws on hard structural errors; soft
// legality (connectivity, acyclicity, schema conformance) is the constraint
// controller's concern.
inline void apply_action(PartialGraphState& st, const Action& action) {
  if (!st.schema) fail(Errc::InvalidArgument, "state has no schema bound");

  if (action.kind == ActionKind::Argument) {
    if (!st.pending)
      fail(Errc::OrphanArgument,
           "argument action '" + action_to_string(action) + "' has no pending main action");
    if (action.role != st.pending->next_role())
      fail(Errc::ArityOrder, "expected role '" + st.pending->next_role() + "', got '" +
                                 action.role + "'");
    NodeId node = detail::resolve_label(st, action.label);
    const Node& n = st.graph.nodes[node];
    switch (st.pending->main.kind) {
      case ActionKind::AddType:
      case ActionKind::AddEdge:
        if (n.kind == NodeKind::Type)
          fail(Errc::InvalidArgument, "argument '" + action.label + "' is a type node");
        break;
      case ActionKind::EndOperation:
        if (n.kind != NodeKind::Variable)
          fail(Errc::InvalidArgument, "operation role '" + action.role +
                                          "' must bind a variable, got '" + action.label + "'");
        break;
      default:
        fail(Errc::OrphanArgument, "internal: bad pending kind");
    }
    st.pending->bound_labels.push_back(action.label);
    if (st.pending->complete()) detail::commit_pending(st);
    return;
  }

  // Main actions: the previous main action must have all its arguments first.
  if (st.pending)
    fail(Errc::ArityViolation, "action '" + action_to_string(action) + "' arrived while '" +
                                   action_to_string(st.pending->main) +
                                   "' still awaits arguments");

  const std::size_t scope = st.current_scope();
  switch (action.kind) {
    case ActionKind::AddVariable: {
      if (action.label.empty()) fail(Errc::ParseError, "empty variable label");
      if (st.symbols.count(action.label))
        fail(Errc::DuplicateLabel, "label '" + action.label + "' already bound");
      NodeId id = add_node(st.graph, NodeKind::Variable, action.label, st.schema, scope);
      st.symbols[action.label] = id;
      if (!st.graph.return_node) st.graph.return_node = id;
      break;
    }
    case ActionKind::AddEntity: {
      if (st.symbols.count(action.label))
        fail(Errc::DuplicateLabel, "label '" + action.label + "' already bound");
      NodeId id = add_node(st.graph, NodeKind::Entity, action.label, st.schema, scope);
      st.symbols[action.label] = id;
      break;
    }
    case ActionKind::AddType: {
      if (st.schema->has_type(action.label) == false)
        fail(Errc::UnknownType, "type '" + action.label + "' not in schema");
      st.pending = PendingMain{action, {"arg"}, {}, kNoScope};
      break;
    }
    case ActionKind::AddEdge: {
      st.pending = PendingMain{action, {"arg1_node", "arg2_node"}, {}, kNoScope};
      break;
    }
    case ActionKind::StartOperation: {
      if (!st.schema->has_operation(action.label))
        fail(Errc::UnknownSymbol, "operation '" + action.label + "' not in schema");
      std::size_t idx = begin_scope(st.graph, action.label, scope);
      st.open_scopes.push_back(idx);
      break;
    }
    case ActionKind::EndOperation: {
      if (st.open_scopes.empty())
        fail(Errc::UnbalancedOperation, "end_operation:" + action.label + " with no open scope");
      std::size_t idx = st.open_scopes.back();
      if (st.graph.scopes[idx].operation != action.label)
        fail(Errc::UnbalancedOperation,
             "end_operation:" + action.label + " does not match open scope '" +
                 st.graph.scopes[idx].operation + "'");
      if (st.graph.scopes[idx].elements.empty())
        fail(Errc::EmptyScope, "operation '" + action.label + "' has an empty scope");
      st.open_scopes.pop_back();
      const auto& roles = st.schema->roles_of(action.label);
      if (!roles.empty()) st.pending = PendingMain{action, roles, {}, idx};
      break;
    }
    case ActionKind::Argument:
      break;  // unreachable, handled above
  }
}

// Folds a whole sequence into a graph starting from the empty state. The
// final graph must be well formed; a graph consisting of a single variable
// node is accepted (it is its own return node).
inline SemanticGraph build_graph(const std::vector<Action>& seq, const KBSchema& schema) {
  PartialGraphState st = initial_state(schema);
  for (const Action& a : seq) apply_action(st, a);
  if (st.pending)
    fail(Errc::ArityViolation, "sequence ends while '" +
                                   action_to_string(st.pending->main) +
                                   "' still awaits arguments");
  if (!st.open_scopes.empty())
    fail(Errc::UnbalancedOperation,
         "sequence ends with operation '" +
             st.graph.scopes[st.open_scopes.back()].operation + "' still open");
  auto violations = validate_wellformed(st.graph);
  if (!violations.empty())
    fail(Errc::IllFormedResult, std::string("final graph is ill-formed: ") +
                                    violation_kind_name(violations.front().kind) + " (" +
                                    violations.front().detail + ")");
  return std::move(st.graph);
}

}  // namespace seq2act

#pragma once

#include <string>
#include <vector>

#include "seq2act/actions.hpp"
#include "seq2act/graph.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// Constraint levels used during decoding. C1 is the domain-independent
// structure level (the finished action sequence must fold into a connected
// acyclic graph with all arities satisfied); C1C2 adds the schema-derived
// semantic level (selectional preferences and type consistency). C1C2 implies
// C1. Level None admits everything the interpreter would not hard-reject.
enum class ConstraintLevel { None, C1, C1C2 };

inline const char* constraint_level_name(ConstraintLevel l) {
  switch (l) {
    case ConstraintLevel::None: return "none";
    case ConstraintLevel::C1: return "c1";
    case ConstraintLevel::C1C2: return "c1c2";
  }
  return "?";
}

struct LegalityVerdict {
  bool allowed = true;
  std::string violated_rule;  // stable rule identifier; empty iff allowed

  static LegalityVerdict ok() { return {true, {}}; }
  static LegalityVerdict no(std::string rule) { return {false, std::move(rule)}; }
};

namespace controller_detail {

// Connected components over relation edges only (the acyclicity structure).
struct EdgeComponents {
  std::vector<std::size_t> comp;

  explicit EdgeComponents(const SemanticGraph& g) : comp(g.nodes.size()) {
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] = i;
    for (const Edge& e : g.edges) unite(e.arg1, e.arg2);
  }
  std::size_t find(std::size_t x) {
    while (comp[x] != x) x = comp[x] = comp[comp[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { comp[find(a)] = find(b); }
  bool same(std::size_t a, std::size_t b) { return find(a) == find(b); }
};

inline bool is_endpoint_kind(const Node& n) { return n.kind != NodeKind::Type; }

// A node is compatible with a required type if nothing known about it says
// otherwise: entities must be declared with exactly that type, variables must
// have collected no other type yet (untyped variables pass optimistically and
// become typed by the choice).
inline bool type_compatible(const PartialGraphState& st, NodeId n, const std::string& type) {
  const Node& node = st.graph.nodes[n];
  if (node.kind == NodeKind::Entity) return node.entity_type == type;
  auto it = st.node_types.find(n);
  if (it == st.node_types.end() || it->second.empty()) return true;
  for (const auto& t : it->second)
    if (t != type) return false;
  return true;
}

inline bool already_attached(const PartialGraphState& st, const std::string& type, NodeId n) {
  for (const auto& a : st.graph.attachments) {
    if (a.constrained_node == n && st.graph.nodes[a.type_node].label == type) return true;
  }
  return false;
}

// Required argument types of the pending edge, if determinable. const has no
// schema signature; its constraint is handled separately.
inline const std::pair<std::string, std::string>* edge_signature(const KBSchema& schema,
                                                                 const std::string& relation) {
  auto it = schema.relations.find(relation);
  return it == schema.relations.end() ? nullptr : &it->second;
}

}  // namespace controller_detail

// Decides whether `action` may follow in `state`. Deterministic; verdicts are
// data. The hard layer mirrors apply_action's failure conditions and applies
// at every level; C1 adds eager structural pruning (an action is rejected if
// no completion of the resulting state can reach a well-formed graph); C2
// adds schema conformance, firing as early as partial information allows.
inline LegalityVerdict check_action(const PartialGraphState& st, const Action& action,
                                    const KBSchema& schema, ConstraintLevel level) {
  using namespace controller_detail;
  const SemanticGraph& g = st.graph;
  const bool c1 = level != ConstraintLevel::None;
  const bool c2 = level == ConstraintLevel::C1C2;

  // --- argument actions ---
  if (action.kind == ActionKind::Argument) {
    if (!st.pending) return LegalityVerdict::no("OrphanArgument");
    if (action.role != st.pending->next_role()) return LegalityVerdict::no("ArityOrder");
    auto sym = st.symbols.find(action.label);
    if (sym == st.symbols.end()) return LegalityVerdict::no("UnknownLabel");
    NodeId n = sym->second;
    const Node& node = g.nodes[n];
    const Action& main = st.pending->main;

    if (main.kind == ActionKind::AddType) {
      if (node.kind == NodeKind::Type) return LegalityVerdict::no("InvalidArgument");
      if (already_attached(st, main.label, n)) return LegalityVerdict::no("DuplicateAttachment");
      if (c2 && !type_compatible(st, n, main.label)) return LegalityVerdict::no("TypeConflict");
      return LegalityVerdict::ok();
    }

    if (main.kind == ActionKind::AddEdge) {
      if (node.kind == NodeKind::Type) return LegalityVerdict::no("InvalidArgument");
      const bool is_const = main.label == "const";
      const auto* sig = edge_signature(schema, main.label);
      EdgeComponents comps(g);
      if (action.role == "arg1_node") {
        if (is_const && node.kind != NodeKind::Variable)
          return LegalityVerdict::no("InvalidArgument");
        if (c2 && !is_const && sig && !type_compatible(st, n, sig->first))
          return LegalityVerdict::no("SelectionalPreference");
        if (c1) {
          // A second endpoint must be available now: argument actions follow
          // their main action directly, so no node can be created in between.
          bool mate = false;
          for (NodeId v = 0; v < g.nodes.size() && !mate; ++v) {
            if (v == n || !is_endpoint_kind(g.nodes[v])) continue;
            if (comps.same(n, v)) continue;
            if (is_const && g.nodes[v].kind != NodeKind::Entity) continue;
            if (is_const && c2 && !type_compatible(st, n, g.nodes[v].entity_type)) continue;
            if (!is_const && c2 && sig && !type_compatible(st, v, sig->second)) continue;
            mate = true;
          }
          if (!mate) return LegalityVerdict::no("DeadEnd");
        }
        return LegalityVerdict::ok();
      }
      // arg2_node
      NodeId a1 = st.symbols.at(st.pending->bound_labels[0]);
      if (n == a1) return LegalityVerdict::no("SelfLoop");
      if (is_const && node.kind != NodeKind::Entity) return LegalityVerdict::no("InvalidArgument");
      if (c1 && comps.same(a1, n)) return LegalityVerdict::no("Cyclic");
      if (c2) {
        if (is_const) {
          if (!type_compatible(st, a1, node.entity_type))
            return LegalityVerdict::no("TypeConflict");
        } else if (sig && !type_compatible(st, n, sig->second)) {
          return LegalityVerdict::no("SelectionalPreference");
        }
      }
      return LegalityVerdict::ok();
    }

    // Operation role argument.
    if (node.kind != NodeKind::Variable) return LegalityVerdict::no("InvalidArgument");
    return LegalityVerdict::ok();
  }

  // --- main actions ---
  if (st.pending) return LegalityVerdict::no("ArityViolation");

  switch (action.kind) {
    case ActionKind::AddVariable: {
      if (action.label.empty()) return LegalityVerdict::no("ParseError");
      if (st.symbols.count(action.label)) return LegalityVerdict::no("DuplicateLabel");
      return LegalityVerdict::ok();
    }
    case ActionKind::AddEntity: {
      if (!schema.has_entity(action.label)) return LegalityVerdict::no("UnknownEntity");
      if (st.symbols.count(action.label)) return LegalityVerdict::no("DuplicateLabel");
      return LegalityVerdict::ok();
    }
    case ActionKind::AddType: {
      if (!schema.has_type(action.label)) return LegalityVerdict::no("UnknownType");
      bool target = false;
      for (NodeId n = 0; n < g.nodes.size() && !target; ++n) {
        if (!is_endpoint_kind(g.nodes[n])) continue;
        if (already_attached(st, action.label, n)) continue;
        if (c2 && !type_compatible(st, n, action.label)) continue;
        target = true;
      }
      if (!target && c1)
        return LegalityVerdict::no(c2 ? "TypeConflict" : "DeadEnd");
      return LegalityVerdict::ok();
    }
    case ActionKind::AddEdge: {
      const bool is_const = action.label == "const";
      const auto* sig = edge_signature(schema, action.label);
      if (c2 && !is_const && !sig) return LegalityVerdict::no("UnknownSymbol");
      if (c1) {
        EdgeComponents comps(g);
        bool pair_found = false, any_pair = false;
        for (NodeId u = 0; u < g.nodes.size() && !pair_found; ++u) {
          if (!is_endpoint_kind(g.nodes[u])) continue;
          if (is_const && g.nodes[u].kind != NodeKind::Variable) continue;
          if (c2 && !is_const && sig && !type_compatible(st, u, sig->first)) continue;
          for (NodeId v = 0; v < g.nodes.size() && !pair_found; ++v) {
            if (u == v || !is_endpoint_kind(g.nodes[v])) continue;
            if (is_const && g.nodes[v].kind != NodeKind::Entity) continue;
            any_pair = true;
            if (comps.same(u, v)) continue;
            if (c2) {
              if (is_const) {
                if (!type_compatible(st, u, g.nodes[v].entity_type)) continue;
              } else if (sig && !type_compatible(st, v, sig->second)) {
                continue;
              }
            }
            pair_found = true;
          }
        }
        if (!pair_found) {
          if (c2 && any_pair) return LegalityVerdict::no(is_const ? "TypeConflict" : "SelectionalPreference");
          return LegalityVerdict::no(any_pair ? "Cyclic" : "DeadEnd");
        }
      }
      return LegalityVerdict::ok();
    }
    case ActionKind::StartOperation: {
      if (!schema.has_operation(action.label)) return LegalityVerdict::no("UnknownSymbol");
      return LegalityVerdict::ok();
    }
    case ActionKind::EndOperation: {
      if (st.open_scopes.empty()) return LegalityVerdict::no("UnbalancedOperation");
      std::size_t idx = st.open_scopes.back();
      if (g.scopes[idx].operation != action.label)
        return LegalityVerdict::no("UnbalancedOperation");
      if (g.scopes[idx].elements.empty()) return LegalityVerdict::no("EmptyScope");
      if (c1 && !schema.roles_of(action.label).empty()) {
        bool var_exists = false;
        for (const Node& n : g.nodes) var_exists |= n.kind == NodeKind::Variable;
        if (!var_exists) return LegalityVerdict::no("DeadEnd");
      }
      return LegalityVerdict::ok();
    }
    case ActionKind::Argument:
      break;  // handled above
  }
  return LegalityVerdict::no("InvalidArgument");
}

// Whether the sequence may stop here. Stopping requires a finished,
// convertible graph: no pending arity, balanced scopes, a return variable and
// at least one predicate. At C1 and above the graph must also be well formed.
inline LegalityVerdict check_stop(const PartialGraphState& st, const KBSchema& schema,
                                  ConstraintLevel level) {
  (void)schema;
  if (st.pending) return LegalityVerdict::no("ArityViolation");
  if (!st.open_scopes.empty()) return LegalityVerdict::no("UnbalancedOperation");
  if (!st.graph.return_node) return LegalityVerdict::no("IncompleteGraph");
  if (st.graph.edges.empty() && st.graph.attachments.empty() && st.graph.scopes.empty())
    return LegalityVerdict::no("IncompleteGraph");
  if (level != ConstraintLevel::None) {
    auto violations = validate_wellformed(st.graph);
    if (!violations.empty())
      return LegalityVerdict::no(violation_kind_name(violations.front().kind));
  }
  return LegalityVerdict::ok();
}

// Filters a candidate vocabulary, preserving its order.
inline std::vector<Action> legal_actions(const PartialGraphState& st,
                                         const std::vector<Action>& vocabulary,
                                         const KBSchema& schema, ConstraintLevel level) {
  std::vector<Action> out;
  for (const Action& a : vocabulary) {
    if (check_action(st, a, schema, level).allowed) out.push_back(a);
  }
  return out;
}

}  // namespace seq2act

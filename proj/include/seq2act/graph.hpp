#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "seq2act/errors.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

using NodeId = std::size_t;
inline constexpr std::size_t kNoScope = static_cast<std::size_t>(-1);

enum class NodeKind { Variable, Entity, Type };

inline const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Variable: return "variable";
    case NodeKind::Entity: return "entity";
    case NodeKind::Type: return "type";
  }
  return "?";
}

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Variable;
  std::string label;
  // Resolved schema type for entity nodes; lets the graph print entity
  // literals without a schema handle.
  std::string entity_type;
};

struct Edge {
  std::string relation;
  NodeId arg1 = 0;
  NodeId arg2 = 0;
};

struct TypeAttachment {
  NodeId type_node = 0;
  NodeId constrained_node = 0;
};

// Reference to a graph element in creation order. Element lists (per scope and
// at top level) preserve the order in which the graph was grown, which is what
// makes conversion back to logical-form text deterministic.
struct ElemRef {
  enum class Kind { Node, Edge, Attachment, Scope };
  Kind kind = Kind::Node;
  std::size_t index = 0;

  friend bool operator==(const ElemRef& a, const ElemRef& b) {
    return a.kind == b.kind && a.index == b.index;
  }
};

struct OperationScope {
  std::string operation;
  // role name -> bound node, in role order (arg-return last by convention).
  std::vector<std::pair<std::string, NodeId>> role_args;
  std::vector<ElemRef> elements;  // elements directly inside the scope
};

// The meaning representation: variable/entity/type nodes, binary relation
// edges, type attachments and operation scopes. Plain value type; copy freely.
struct SemanticGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<TypeAttachment> attachments;
  std::vector<OperationScope> scopes;
  std::vector<ElemRef> top_elements;
  std::optional<NodeId> return_node;

  bool has_node(NodeId id) const { return id < nodes.size(); }

  std::vector<ElemRef>& elements_of(std::size_t scope_index) {
    return scope_index == kNoScope ? top_elements : scopes[scope_index].elements;
  }
};

// ---------------------------------------------------------------------------
// Construction

// Adds a node. When a schema is given, entity and type labels are validated
// against it and the entity's schema type is recorded on the node.
inline NodeId add_node(SemanticGraph& g, NodeKind kind, const std::string& label,
                       const KBSchema* schema = nullptr,
                       std::size_t scope_index = kNoScope) {
  Node n;
  n.id = g.nodes.size();
  n.kind = kind;
  n.label = label;
  if (kind == NodeKind::Entity) {
    if (schema) {
      if (!schema->has_entity(label))
        fail(Errc::UnknownEntity, "entity '" + label + "' not in schema");
      n.entity_type = schema->type_of_entity(label);
    }
  } else if (kind == NodeKind::Type) {
    if (schema && !schema->has_type(label))
      fail(Errc::UnknownType, "type '" + label + "' not in schema");
  }
  g.nodes.push_back(n);
  g.elements_of(scope_index).push_back({ElemRef::Kind::Node, n.id});
  return n.id;
}

inline void add_edge(SemanticGraph& g, const std::string& relation, NodeId arg1,
                     NodeId arg2, std::size_t scope_index = kNoScope) {
  if (!g.has_node(arg1) || !g.has_node(arg2))
    fail(Errc::DanglingEndpoint, "edge '" + relation + "' references a missing node");
  if (arg1 == arg2)
    fail(Errc::SelfLoop, "edge '" + relation + "' connects a node to itself");
  if (g.nodes[arg1].kind == NodeKind::Type || g.nodes[arg2].kind == NodeKind::Type)
    fail(Errc::InvalidArgument, "edge endpoints must be variables or entities");
  g.edges.push_back({relation, arg1, arg2});
  g.elements_of(scope_index).push_back({ElemRef::Kind::Edge, g.edges.size() - 1});
}

inline void add_attachment(SemanticGraph& g, NodeId type_node, NodeId constrained,
                           std::size_t scope_index = kNoScope) {
  if (!g.has_node(type_node) || !g.has_node(constrained))
    fail(Errc::DanglingEndpoint, "attachment references a missing node");
  if (g.nodes[type_node].kind != NodeKind::Type)
    fail(Errc::InvalidArgument, "attachment source must be a type node");
  if (g.nodes[constrained].kind == NodeKind::Type)
    fail(Errc::InvalidArgument, "attachment target must be a variable or entity");
  for (const auto& a : g.attachments) {
    if (a.constrained_node == constrained &&
        g.nodes[a.type_node].label == g.nodes[type_node].label)
      fail(Errc::DuplicateAttachment,
           "node already constrained by type '" + g.nodes[type_node].label + "'");
  }
  g.attachments.push_back({type_node, constrained});
  g.elements_of(scope_index).push_back({ElemRef::Kind::Attachment, g.attachments.size() - 1});
}

// Opens an operation scope nested in `parent` and returns its index.
inline std::size_t begin_scope(SemanticGraph& g, const std::string& operation,
                               std::size_t parent = kNoScope) {
  g.scopes.push_back(OperationScope{operation, {}, {}});
  std::size_t idx = g.scopes.size() - 1;
  g.elements_of(parent).push_back({ElemRef::Kind::Scope, idx});
  return idx;
}

// ---------------------------------------------------------------------------
// Well-formedness

struct Violation {
  enum class Kind { Disconnected, Cyclic, DanglingReference, ScopeImbalance };
  Kind kind;
  std::string detail;
};

inline const char* violation_kind_name(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::Disconnected: return "Disconnected";
    case Violation::Kind::Cyclic: return "Cyclic";
    case Violation::Kind::DanglingReference: return "DanglingReference";
    case Violation::Kind::ScopeImbalance: return "ScopeImbalance";
  }
  return "?";
}

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  // Returns false if x and y were already connected.
  bool unite(std::size_t x, std::size_t y) {
    std::size_t rx = find(x), ry = find(y);
    if (rx == ry) return false;
    parent_[rx] = ry;
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

// Checks the graph invariants and returns the violations in a fixed order:
// connectivity first, then cycles, then dangling references, then scope
// imbalance. An empty result means the graph is well formed.
//
// Connectivity counts relation edges, type attachments and operation role
// bindings as links (an aggregation couples its bound nodes even without an
// edge between them). Acyclicity is checked over relation edges only.
inline std::vector<Violation> validate_wellformed(const SemanticGraph& g) {
  std::vector<Violation> connectivity, cycles, dangling, scopes;

  auto node_ok = [&](NodeId id) { return g.has_node(id); };

  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const Edge& e = g.edges[i];
    if (!node_ok(e.arg1) || !node_ok(e.arg2))
      dangling.push_back({Violation::Kind::DanglingReference,
                          "edge " + std::to_string(i) + " (" + e.relation + ")"});
  }
  for (std::size_t i = 0; i < g.attachments.size(); ++i) {
    const TypeAttachment& a = g.attachments[i];
    if (!node_ok(a.type_node) || !node_ok(a.constrained_node))
      dangling.push_back({Violation::Kind::DanglingReference,
                          "attachment " + std::to_string(i)});
  }
  for (std::size_t s = 0; s < g.scopes.size(); ++s) {
    for (const auto& [role, node] : g.scopes[s].role_args) {
      if (!node_ok(node))
        dangling.push_back({Violation::Kind::DanglingReference,
                            "scope " + g.scopes[s].operation + " role " + role});
    }
  }

  // Scope containment: every scope must appear exactly once as an element.
  {
    std::vector<int> seen(g.scopes.size(), 0);
    auto scan = [&](const std::vector<ElemRef>& elems) {
      for (const auto& el : elems) {
        if (el.kind == ElemRef::Kind::Scope && el.index < g.scopes.size()) ++seen[el.index];
      }
    };
    scan(g.top_elements);
    for (const auto& sc : g.scopes) scan(sc.elements);
    for (std::size_t s = 0; s < g.scopes.size(); ++s) {
      if (seen[s] != 1)
        scopes.push_back({Violation::Kind::ScopeImbalance,
                          "scope " + g.scopes[s].operation + " contained " +
                              std::to_string(seen[s]) + " times"});
    }
    for (std::size_t s = 0; s < g.scopes.size(); ++s) {
      if (g.scopes[s].elements.empty())
        scopes.push_back({Violation::Kind::ScopeImbalance,
                          "scope " + g.scopes[s].operation + " is empty"});
    }
  }

  if (!g.nodes.empty()) {
    // Cycles over relation edges.
    detail::UnionFind uf(g.nodes.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const Edge& e = g.edges[i];
      if (!node_ok(e.arg1) || !node_ok(e.arg2)) continue;
      if (!uf.unite(e.arg1, e.arg2))
        cycles.push_back({Violation::Kind::Cyclic,
                          "edge " + std::to_string(i) + " (" + e.relation + ") closes a cycle"});
    }
    // Connectivity over edges, attachments and scope role bindings. Scopes
    // act as virtual nodes linking their bound arguments.
    detail::UnionFind conn(g.nodes.size() + g.scopes.size());
    for (const Edge& e : g.edges)
      if (node_ok(e.arg1) && node_ok(e.arg2)) conn.unite(e.arg1, e.arg2);
    for (const TypeAttachment& a : g.attachments)
      if (node_ok(a.type_node) && node_ok(a.constrained_node))
        conn.unite(a.type_node, a.constrained_node);
    for (std::size_t s = 0; s < g.scopes.size(); ++s) {
      for (const auto& [role, node] : g.scopes[s].role_args)
        if (node_ok(node)) conn.unite(g.nodes.size() + s, node);
    }
    std::set<std::size_t> roots;
    for (NodeId n = 0; n < g.nodes.size(); ++n) roots.insert(conn.find(n));
    if (roots.size() > 1)
      connectivity.push_back({Violation::Kind::Disconnected,
                              std::to_string(roots.size()) + " components"});
  }

  std::vector<Violation> out;
  out.insert(out.end(), connectivity.begin(), connectivity.end());
  out.insert(out.end(), cycles.begin(), cycles.end());
  out.insert(out.end(), dangling.begin(), dangling.end());
  out.insert(out.end(), scopes.begin(), scopes.end());
  return out;
}

// ---------------------------------------------------------------------------
// Isomorphism

namespace detail {

// Canonical signature of a graph under a fixed renaming of variable labels.
// Element order inside scopes and at top level is deliberately erased (sorted)
// so that equality is modulo conjunct order.
class GraphSignature {
 public:
  GraphSignature(const SemanticGraph& g, const std::map<std::string, std::string>& var_rename)
      : g_(g), rename_(var_rename) {}

  std::string compute() const {
    std::ostringstream out;
    out << "return=" << (g_.return_node ? node_name(*g_.return_node) : "-") << ";";
    out << container_sig(g_.top_elements);
    return out.str();
  }

 private:
  std::string node_name(NodeId id) const {
    const Node& n = g_.nodes[id];
    if (n.kind == NodeKind::Variable) {
      auto it = rename_.find(n.label);
      return "v:" + (it == rename_.end() ? n.label : it->second);
    }
    if (n.kind == NodeKind::Entity) return "e:" + n.label;
    return "t:" + n.label;
  }

  std::string elem_sig(const ElemRef& el) const {
    switch (el.kind) {
      case ElemRef::Kind::Node:
        return "n(" + node_name(el.index) + ")";
      case ElemRef::Kind::Edge: {
        const Edge& e = g_.edges[el.index];
        return "r(" + e.relation + "," + node_name(e.arg1) + "," + node_name(e.arg2) + ")";
      }
      case ElemRef::Kind::Attachment: {
        const TypeAttachment& a = g_.attachments[el.index];
        return "a(" + g_.nodes[a.type_node].label + "," + node_name(a.constrained_node) + ")";
      }
      case ElemRef::Kind::Scope: {
        const OperationScope& s = g_.scopes[el.index];
        std::vector<std::string> roles;
        for (const auto& [role, node] : s.role_args) roles.push_back(role + "=" + node_name(node));
        std::sort(roles.begin(), roles.end());
        std::string sig = "s(" + s.operation + ";";
        for (const auto& r : roles) sig += r + ",";
        sig += ";" + container_sig(s.elements) + ")";
        return sig;
      }
    }
    return "?";
  }

  std::string container_sig(const std::vector<ElemRef>& elems) const {
    std::vector<std::string> sigs;
    sigs.reserve(elems.size());
    for (const auto& el : elems) sigs.push_back(elem_sig(el));
    std::sort(sigs.begin(), sigs.end());
    std::string out = "{";
    for (const auto& s : sigs) out += s + "|";
    out += "}";
    return out;
  }

  const SemanticGraph& g_;
  const std::map<std::string, std::string>& rename_;
};

inline std::vector<std::string> variable_labels(const SemanticGraph& g) {
  std::vector<std::string> out;
  for (const Node& n : g.nodes)
    if (n.kind == NodeKind::Variable) out.push_back(n.label);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// True iff some variable-renaming bijection maps g1 onto g2 preserving node
// kinds, entity/type labels, edges, attachments, scopes and the return node.
// Conjunct order is irrelevant. Exhaustive over variable bijections, which is
// fine at the graph sizes this toolkit works with.
inline bool graphs_isomorphic(const SemanticGraph& g1, const SemanticGraph& g2) {
  if (g1.nodes.size() != g2.nodes.size() || g1.edges.size() != g2.edges.size() ||
      g1.attachments.size() != g2.attachments.size() || g1.scopes.size() != g2.scopes.size())
    return false;
  std::vector<std::string> v1 = detail::variable_labels(g1);
  std::vector<std::string> v2 = detail::variable_labels(g2);
  if (v1.size() != v2.size()) return false;

  static const std::map<std::string, std::string> kNoRename;
  std::string target = detail::GraphSignature(g2, kNoRename).compute();

  // v2 sorted ascending is the first permutation; try every bijection v1->v2.
  std::vector<std::string> perm = v2;
  std::sort(perm.begin(), perm.end());
  do {
    std::map<std::string, std::string> rename;
    for (std::size_t i = 0; i < v1.size(); ++i) rename[v1[i]] = perm[i];
    if (detail::GraphSignature(g1, rename).compute() == target) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace seq2act

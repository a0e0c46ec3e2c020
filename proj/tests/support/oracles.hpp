#pragma once

// Brute-force reference checkers, written independently of the library
// implementations they are used to cross-check.

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "seq2act/graph.hpp"

namespace testsupport {

// Connectivity by explicit breadth-first search over the same link set the
// library defines (edges, attachments, scope role bindings).
inline bool brute_connected(const seq2act::SemanticGraph& g) {
  using seq2act::NodeId;
  if (g.nodes.empty()) return true;
  std::size_t total = g.nodes.size() + g.scopes.size();
  std::vector<std::vector<std::size_t>> adj(total);
  auto link = [&](std::size_t a, std::size_t b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (const auto& e : g.edges) link(e.arg1, e.arg2);
  for (const auto& a : g.attachments) link(a.type_node, a.constrained_node);
  for (std::size_t s = 0; s < g.scopes.size(); ++s)
    for (const auto& [role, node] : g.scopes[s].role_args) link(g.nodes.size() + s, node);

  std::vector<bool> seen(total, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    std::size_t cur = stack.back();
    stack.pop_back();
    for (std::size_t nxt : adj[cur]) {
      if (!seen[nxt]) {
        seen[nxt] = true;
        stack.push_back(nxt);
      }
    }
  }
  for (NodeId n = 0; n < g.nodes.size(); ++n)
    if (!seen[n]) return false;
  return true;
}

// Cycle detection over relation edges by DFS with parent-edge exclusion.
inline bool brute_has_cycle(const seq2act::SemanticGraph& g) {
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(g.nodes.size());
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    adj[g.edges[i].arg1].push_back({g.edges[i].arg2, i});
    adj[g.edges[i].arg2].push_back({g.edges[i].arg1, i});
  }
  std::vector<int> state(g.nodes.size(), 0);
  std::function<bool(std::size_t, std::size_t)> dfs = [&](std::size_t u, std::size_t via) {
    state[u] = 1;
    for (auto [v, edge] : adj[u]) {
      if (edge == via) continue;
      if (state[v] == 1) return true;
      if (state[v] == 0 && dfs(v, edge)) return true;
    }
    state[u] = 2;
    return false;
  };
  for (std::size_t n = 0; n < g.nodes.size(); ++n)
    if (state[n] == 0 && dfs(n, static_cast<std::size_t>(-1))) return true;
  return false;
}

// Isomorphism by direct enumeration of variable-node bijections, comparing
// element sets pairwise under the candidate mapping.
inline bool brute_isomorphic(const seq2act::SemanticGraph& g1, const seq2act::SemanticGraph& g2) {
  using namespace seq2act;
  if (g1.nodes.size() != g2.nodes.size() || g1.edges.size() != g2.edges.size() ||
      g1.attachments.size() != g2.attachments.size() || g1.scopes.size() != g2.scopes.size())
    return false;

  auto vars_of = [](const SemanticGraph& g) {
    std::vector<std::string> vars;
    for (const auto& n : g.nodes)
      if (n.kind == NodeKind::Variable) vars.push_back(n.label);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    return vars;
  };
  std::vector<std::string> v1 = vars_of(g1), v2 = vars_of(g2);
  if (v1.size() != v2.size()) return false;

  auto name = [](const SemanticGraph& g, NodeId id,
                 const std::map<std::string, std::string>& rename) {
    const Node& n = g.nodes[id];
    std::string prefix = n.kind == NodeKind::Variable ? "v" : n.kind == NodeKind::Entity ? "e" : "t";
    std::string label = n.label;
    if (n.kind == NodeKind::Variable && rename.count(label)) label = rename.at(label);
    return prefix + ":" + label;
  };

  // Multiset description of one element container, recursing into scopes.
  std::function<std::multiset<std::string>(const SemanticGraph&, const std::vector<ElemRef>&,
                                           const std::map<std::string, std::string>&)>
      describe = [&](const SemanticGraph& g, const std::vector<ElemRef>& elems,
                     const std::map<std::string, std::string>& rename) {
        std::multiset<std::string> out;
        for (const auto& el : elems) {
          if (el.kind == ElemRef::Kind::Node) {
            out.insert("node " + name(g, el.index, rename));
          } else if (el.kind == ElemRef::Kind::Edge) {
            const Edge& e = g.edges[el.index];
            out.insert("edge " + e.relation + " " + name(g, e.arg1, rename) + " " +
                       name(g, e.arg2, rename));
          } else if (el.kind == ElemRef::Kind::Attachment) {
            const TypeAttachment& a = g.attachments[el.index];
            out.insert("attach " + g.nodes[a.type_node].label + " " +
                       name(g, a.constrained_node, rename));
          } else {
            const OperationScope& s = g.scopes[el.index];
            std::multiset<std::string> inner = describe(g, s.elements, rename);
            std::string roles;
            std::vector<std::string> parts;
            for (const auto& [role, node] : s.role_args)
              parts.push_back(role + "=" + name(g, node, rename));
            std::sort(parts.begin(), parts.end());
            for (const auto& p : parts) roles += p + ";";
            std::string body;
            for (const auto& d : inner) body += d + "&";
            out.insert("scope " + s.operation + " [" + roles + "] {" + body + "}");
          }
        }
        return out;
      };

  std::map<std::string, std::string> id;
  std::string ret2 = g2.return_node ? name(g2, *g2.return_node, id) : "-";
  auto target = describe(g2, g2.top_elements, id);

  std::vector<std::string> perm = v2;
  do {
    std::map<std::string, std::string> rename;
    for (std::size_t i = 0; i < v1.size(); ++i) rename[v1[i]] = perm[i];
    std::string ret1 = g1.return_node ? name(g1, *g1.return_node, rename) : "-";
    if (ret1 == ret2 && describe(g1, g1.top_elements, rename) == target) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace testsupport

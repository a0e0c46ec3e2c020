#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "seq2act/graph.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// Post-hoc semantic validation of a finished graph against a schema,
// independent of the incremental constraint controller: collects every type
// requirement each node accumulates (entity declarations, type attachments,
// relation argument positions, const bindings) and reports conflicts and
// schema mismatches. Used to audit decoder output.
inline std::vector<std::string> semantic_violations(const SemanticGraph& g,
                                                    const KBSchema& schema) {
  std::vector<std::string> out;
  std::map<NodeId, std::set<std::string>> required;

  auto require = [&](NodeId n, const std::string& type) {
    if (g.nodes[n].kind == NodeKind::Type) return;
    required[n].insert(type);
  };

  for (const Node& n : g.nodes) {
    if (n.kind == NodeKind::Entity) {
      if (!schema.has_entity(n.label)) {
        out.push_back("entity '" + n.label + "' not in schema");
      } else {
        require(n.id, schema.type_of_entity(n.label));
      }
    }
  }
  for (const TypeAttachment& a : g.attachments) {
    const std::string& t = g.nodes[a.type_node].label;
    if (!schema.has_type(t)) out.push_back("type '" + t + "' not in schema");
    require(a.constrained_node, t);
  }
  for (const Edge& e : g.edges) {
    if (e.relation == "const") {
      const Node& ent = g.nodes[e.arg2];
      if (ent.kind == NodeKind::Entity && schema.has_entity(ent.label))
        require(e.arg1, schema.type_of_entity(ent.label));
      continue;
    }
    auto it = schema.relations.find(e.relation);
    if (it == schema.relations.end()) {
      out.push_back("relation '" + e.relation + "' not in schema");
      continue;
    }
    require(e.arg1, it->second.first);
    require(e.arg2, it->second.second);
  }

  for (const auto& [node, types] : required) {
    if (types.size() > 1) {
      std::string msg = "node '" + g.nodes[node].label + "' requires conflicting types:";
      for (const auto& t : types) msg += " " + t;
      out.push_back(msg);
    }
  }
  return out;
}

}  // namespace seq2act

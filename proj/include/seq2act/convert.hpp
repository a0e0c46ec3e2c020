#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "seq2act/actions.hpp"
#include "seq2act/errors.hpp"
#include "seq2act/graph.hpp"
#include "seq2act/logical_form.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// Three-way conversion logical form <-> semantic graph <-> action sequence.
//
// Both directions out of a logical form run the same depth-first traversal,
// which fixes a canonical element order: starting from the answer variable,
// each node emits its type predicates first, then its binary predicates
// (relations and const bindings), then the operators it is bound to, each
// group in source order, recursing into newly reached nodes. Operator bodies
// are traversed the same way, seeded with the nodes known before the operator
// began. Variables are renamed to A, B, C, ... in discovery order. The
// traversal is idempotent on its own output, which is what makes printing
// canonical and round trips exact.

namespace convert_detail {

// Receives the traversal's emission events in order.
class Sink {
 public:
  virtual ~Sink() = default;
  virtual void create_var(const std::string& label) = 0;
  virtual void create_entity(const std::string& type, const std::string& name) = 0;
  virtual void attach_type(const std::string& type, const std::string& target) = 0;
  virtual void emit_edge(const std::string& relation, const std::string& arg1,
                         const std::string& arg2) = 0;
  virtual void begin_operation(const std::string& op) = 0;
  virtual void end_operation(const std::string& op,
                             const std::vector<std::pair<std::string, std::string>>& roles) = 0;
};

inline bool term_mentions_var(const LfTerm& term, const std::string& name);

inline bool arg_is_var(const LfArg& a, const std::string& name) {
  const LfVar* v = std::get_if<LfVar>(&a);
  return v && v->name == name;
}

inline bool body_mentions_var(const std::vector<LfTerm>& body, const std::string& name) {
  for (const LfTerm& t : body)
    if (term_mentions_var(t, name)) return true;
  return false;
}

inline bool term_mentions_var(const LfTerm& term, const std::string& name) {
  if (const auto* tp = std::get_if<LfTypePred>(&term.node)) return arg_is_var(tp->arg, name);
  if (const auto* rp = std::get_if<LfRelationPred>(&term.node))
    return arg_is_var(rp->arg1, name) || arg_is_var(rp->arg2, name);
  if (const auto* cp = std::get_if<LfConstPred>(&term.node)) return cp->var == name;
  const auto& op = std::get<LfOperatorApp>(term.node);
  for (const auto& v : op.leading_vars)
    if (v == name) return true;
  if (op.return_var && *op.return_var == name) return true;
  return body_mentions_var(op.body, name);
}

class Traversal {
 public:
  Traversal(Sink& sink, const KBSchema* schema) : sink_(sink), schema_(schema) {}

  void run(const LogicalForm& lf) {
    if (lf.body.empty()) fail(Errc::EmptyBody, "logical form has an empty body");
    ensure_var(lf.answer_var);
    emit_conjunction(lf.body, {var_key(lf.answer_var)});
  }

 private:
  static std::string var_key(const std::string& name) { return "v:" + name; }
  static std::string entity_key(const std::string& name) { return "e:" + name; }

  bool strict() const { return schema_ != nullptr; }

  std::string ensure_var(const std::string& orig) {
    std::string key = var_key(orig);
    auto it = labels_.find(key);
    if (it != labels_.end()) return it->second;
    std::string label = lf_detail::canonical_var_name(var_count_++);
    labels_[key] = label;
    discovery_.push_back(key);
    sink_.create_var(label);
    return label;
  }

  std::string ensure_entity(const LfEntity& e) {
    std::string key = entity_key(e.name);
    auto it = labels_.find(key);
    if (it != labels_.end()) {
      if (entity_literal_type_.at(e.name) != e.type)
        fail(Errc::UnknownSymbol, "entity '" + e.name + "' used with conflicting literal types '" +
                                      entity_literal_type_.at(e.name) + "' and '" + e.type + "'");
      return it->second;
    }
    if (strict()) {
      if (!schema_->has_entity(e.name))
        fail(Errc::UnknownSymbol, "entity '" + e.name + "' not in schema");
      if (schema_->type_of_entity(e.name) != e.type)
        fail(Errc::UnknownSymbol,
             "entity '" + e.name + "' is not of type '" + e.type + "'");
    }
    labels_[key] = e.name;
    entity_literal_type_[e.name] = e.type;
    discovery_.push_back(key);
    sink_.create_entity(e.type, e.name);
    return e.name;
  }

  std::string ensure_arg(const LfArg& a) {
    if (const LfVar* v = std::get_if<LfVar>(&a)) return ensure_var(v->name);
    return ensure_entity(std::get<LfEntity>(a));
  }

  static std::string arg_key(const LfArg& a) {
    if (const LfVar* v = std::get_if<LfVar>(&a)) return var_key(v->name);
    return entity_key(std::get<LfEntity>(a).name);
  }

  // --- term/key touch tests -------------------------------------------------

  static bool touches_as_type_subject(const LfTerm& t, const std::string& key) {
    const auto* tp = std::get_if<LfTypePred>(&t.node);
    return tp && arg_key(tp->arg) == key;
  }

  static bool touches_as_binary(const LfTerm& t, const std::string& key) {
    if (const auto* rp = std::get_if<LfRelationPred>(&t.node))
      return arg_key(rp->arg1) == key || arg_key(rp->arg2) == key;
    if (const auto* cp = std::get_if<LfConstPred>(&t.node))
      return var_key(cp->var) == key || entity_key(cp->entity.name) == key;
    return false;
  }

  static bool touches_as_operator(const LfTerm& t, const std::string& key) {
    const auto* op = std::get_if<LfOperatorApp>(&t.node);
    if (!op) return false;
    for (const auto& v : op->leading_vars)
      if (var_key(v) == key) return true;
    return op->return_var && var_key(*op->return_var) == key;
  }

  // --- conjunction traversal ------------------------------------------------

  struct ConjFrame {
    const std::vector<LfTerm>* terms;
    std::vector<bool> emitted;
    std::size_t remaining;
  };

  void emit_conjunction(const std::vector<LfTerm>& terms,
                        const std::vector<std::string>& inherited) {
    ConjFrame frame{&terms, std::vector<bool>(terms.size(), false), terms.size()};
    for (const std::string& key : inherited) {
      if (frame.remaining == 0) break;
      process_node(frame, key);
    }
    while (frame.remaining > 0) {
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!frame.emitted[i]) {
          emit_term(frame, i);
          break;
        }
      }
    }
  }

  // Emits every not-yet-emitted term of the conjunction that touches `key`:
  // type predicates first, then binaries, then operators, each in source
  // order, re-scanning after each recursive emission.
  void process_node(ConjFrame& frame, const std::string& key) {
    while (frame.remaining > 0) {
      std::size_t pick = frame.terms->size();
      for (int category = 0; category < 3 && pick == frame.terms->size(); ++category) {
        for (std::size_t i = 0; i < frame.terms->size(); ++i) {
          if (frame.emitted[i]) continue;
          const LfTerm& t = (*frame.terms)[i];
          bool hit = category == 0   ? touches_as_type_subject(t, key)
                     : category == 1 ? touches_as_binary(t, key)
                                     : touches_as_operator(t, key);
          if (hit) {
            pick = i;
            break;
          }
        }
      }
      if (pick == frame.terms->size()) return;
      emit_term(frame, pick);
    }
  }

  void emit_term(ConjFrame& frame, std::size_t index) {
    frame.emitted[index] = true;
    --frame.remaining;
    const LfTerm& t = (*frame.terms)[index];

    if (const auto* tp = std::get_if<LfTypePred>(&t.node)) {
      if (strict() && !schema_->has_type(tp->type))
        fail(Errc::UnknownSymbol, "type '" + tp->type + "' not in schema");
      std::string target = ensure_arg(tp->arg);
      if (attached_.insert({tp->type, target}).second) sink_.attach_type(tp->type, target);
      process_node(frame, arg_key(tp->arg));
      return;
    }

    if (const auto* rp = std::get_if<LfRelationPred>(&t.node)) {
      if (strict() && !schema_->has_relation(rp->relation))
        fail(Errc::UnknownSymbol, "relation '" + rp->relation + "' not in schema");
      std::string l1 = ensure_arg(rp->arg1);
      std::string l2 = ensure_arg(rp->arg2);
      if (l1 == l2)
        fail(Errc::SelfLoop, "relation '" + rp->relation + "' applied to '" + l1 + "' twice");
      if (edges_.insert({rp->relation, l1, l2}).second) sink_.emit_edge(rp->relation, l1, l2);
      process_node(frame, arg_key(rp->arg1));
      process_node(frame, arg_key(rp->arg2));
      return;
    }

    if (const auto* cp = std::get_if<LfConstPred>(&t.node)) {
      std::string vl = ensure_var(cp->var);
      std::string el = ensure_entity(cp->entity);
      if (edges_.insert({"const", vl, el}).second) sink_.emit_edge("const", vl, el);
      process_node(frame, var_key(cp->var));
      process_node(frame, entity_key(cp->entity.name));
      return;
    }

    const auto& op = std::get<LfOperatorApp>(t.node);
    emit_operator(frame, op);
  }

  void emit_operator(ConjFrame& frame, const LfOperatorApp& op) {
    std::vector<std::string> declared_roles;
    if (strict()) {
      if (!schema_->has_operation(op.op))
        fail(Errc::UnknownSymbol, "operation '" + op.op + "' not in schema");
      declared_roles = schema_->roles_of(op.op);
      std::size_t non_return = 0;
      bool has_return = false;
      for (const auto& r : declared_roles) {
        if (r == "arg-return") has_return = true;
        else ++non_return;
      }
      if (op.leading_vars.size() != non_return)
        fail(Errc::ArityViolation, "operation '" + op.op + "' expects " +
                                       std::to_string(non_return) + " leading role variables, got " +
                                       std::to_string(op.leading_vars.size()));
      if (op.return_var.has_value() != has_return)
        fail(Errc::ArityViolation, "operation '" + op.op + "' " +
                                       (has_return ? "requires" : "does not take") +
                                       " a return variable");
    } else {
      for (std::size_t i = 0; i < op.leading_vars.size(); ++i)
        declared_roles.push_back("arg-" + std::to_string(i));
      if (op.return_var) declared_roles.push_back("arg-return");
    }

    // Leading role variables are introduced by the operator itself; create
    // them before the scope opens so argument actions can reference them.
    std::vector<std::string> seed = discovery_;
    for (const auto& v : op.leading_vars) {
      if (!labels_.count(var_key(v)) && strict() && !body_mentions_var(op.body, v))
        fail(Errc::UnboundVariable,
             "role variable '" + v + "' of operation '" + op.op + "' is unbound");
      ensure_var(v);
    }

    sink_.begin_operation(op.op);
    emit_conjunction(op.body, seed);
    if (op.return_var && !labels_.count(var_key(*op.return_var))) {
      if (strict())
        fail(Errc::UnboundVariable, "return variable '" + *op.return_var + "' of operation '" +
                                        op.op + "' is unbound");
      ensure_var(*op.return_var);
    }

    std::vector<std::pair<std::string, std::string>> role_pairs;
    std::size_t leading_used = 0;
    for (const auto& role : declared_roles) {
      if (role == "arg-return") {
        role_pairs.emplace_back(role, labels_.at(var_key(*op.return_var)));
      } else {
        role_pairs.emplace_back(role, labels_.at(var_key(op.leading_vars[leading_used++])));
      }
    }
    sink_.end_operation(op.op, role_pairs);

    for (const auto& v : op.leading_vars) process_node(frame, var_key(v));
    if (op.return_var) process_node(frame, var_key(*op.return_var));
  }

  Sink& sink_;
  const KBSchema* schema_;
  std::map<std::string, std::string> labels_;  // key -> emitted label
  std::map<std::string, std::string> entity_literal_type_;
  std::vector<std::string> discovery_;
  std::set<std::pair<std::string, std::string>> attached_;
  std::set<std::tuple<std::string, std::string, std::string>> edges_;
  std::size_t var_count_ = 0;
};

// Builds the semantic graph directly from the traversal events. Mirrors the
// action interpreter's conventions (first variable is the return node, a
// top-level arg-return overrides it).
class GraphBuilderSink : public Sink {
 public:
  explicit GraphBuilderSink(const KBSchema* schema) : schema_(schema) {}

  void create_var(const std::string& label) override {
    NodeId id = add_node(g_, NodeKind::Variable, label, schema_, current());
    symbols_[label] = id;
    if (!g_.return_node) g_.return_node = id;
  }

  void create_entity(const std::string& type, const std::string& name) override {
    NodeId id = add_node(g_, NodeKind::Entity, name, schema_, current());
    if (g_.nodes[id].entity_type.empty()) g_.nodes[id].entity_type = type;
    symbols_[name] = id;
  }

  void attach_type(const std::string& type, const std::string& target) override {
    NodeId type_node = add_node(g_, NodeKind::Type, type, schema_, current());
    add_attachment(g_, type_node, symbols_.at(target), current());
  }

  void emit_edge(const std::string& relation, const std::string& arg1,
                 const std::string& arg2) override {
    add_edge(g_, relation, symbols_.at(arg1), symbols_.at(arg2), current());
  }

  void begin_operation(const std::string& op) override {
    stack_.push_back(begin_scope(g_, op, current()));
  }

  void end_operation(const std::string& op,
                     const std::vector<std::pair<std::string, std::string>>& roles) override {
    std::size_t idx = stack_.back();
    stack_.pop_back();
    // Possible when every body term was a duplicate of something emitted
    // outside the scope; such input has no graph representation.
    if (g_.scopes[idx].elements.empty())
      fail(Errc::EmptyScope, "operation '" + op + "' has an empty scope after deduplication");
    for (const auto& [role, label] : roles) {
      NodeId node = symbols_.at(label);
      g_.scopes[idx].role_args.emplace_back(role, node);
      if (role == "arg-return" && stack_.empty()) g_.return_node = node;
    }
  }

  SemanticGraph take() { return std::move(g_); }

 private:
  std::size_t current() const { return stack_.empty() ? kNoScope : stack_.back(); }

  SemanticGraph g_;
  const KBSchema* schema_;
  std::map<std::string, NodeId> symbols_;
  std::vector<std::size_t> stack_;
};

class ActionEmitterSink : public Sink {
 public:
  void create_var(const std::string& label) override {
    seq_.push_back(make_action(ActionKind::AddVariable, label));
  }
  void create_entity(const std::string& type, const std::string& name) override {
    (void)type;
    seq_.push_back(make_action(ActionKind::AddEntity, name));
  }
  void attach_type(const std::string& type, const std::string& target) override {
    seq_.push_back(make_action(ActionKind::AddType, type));
    seq_.push_back(make_argument("arg", target));
  }
  void emit_edge(const std::string& relation, const std::string& arg1,
                 const std::string& arg2) override {
    seq_.push_back(make_action(ActionKind::AddEdge, relation));
    seq_.push_back(make_argument("arg1_node", arg1));
    seq_.push_back(make_argument("arg2_node", arg2));
  }
  void begin_operation(const std::string& op) override {
    seq_.push_back(make_action(ActionKind::StartOperation, op));
  }
  void end_operation(const std::string& op,
                     const std::vector<std::pair<std::string, std::string>>& roles) override {
    seq_.push_back(make_action(ActionKind::EndOperation, op));
    for (const auto& [role, label] : roles) seq_.push_back(make_argument(role, label));
  }

  std::vector<Action> take() { return std::move(seq_); }

 private:
  std::vector<Action> seq_;
};

}  // namespace convert_detail

// Logical form -> semantic graph. With a schema the conversion is strict:
// entities, types, relations and operator arities are validated. Without one
// the literal types in the AST are trusted and operator roles get positional
// names.
inline SemanticGraph lf_to_graph(const LogicalForm& lf, const KBSchema* schema = nullptr) {
  convert_detail::GraphBuilderSink sink(schema);
  convert_detail::Traversal(sink, schema).run(lf);
  SemanticGraph g = sink.take();
  return g;
}

// Logical form -> action sequence (strict; role names come from the schema).
inline std::vector<Action> lf_to_actions(const LogicalForm& lf, const KBSchema& schema) {
  convert_detail::ActionEmitterSink sink;
  convert_detail::Traversal(sink, &schema).run(lf);
  return sink.take();
}

// Semantic graph -> logical form. Walks element lists in creation order, so a
// graph built by lf_to_graph or build_graph prints deterministically.
inline LogicalForm graph_to_lf(const SemanticGraph& g) {
  if (!g.return_node || g.nodes[*g.return_node].kind != NodeKind::Variable)
    fail(Errc::EmptyBody, "graph has no return variable");

  auto argval = [&](NodeId id) -> LfArg {
    const Node& n = g.nodes[id];
    if (n.kind == NodeKind::Variable) return LfVar{n.label};
    if (n.kind == NodeKind::Entity) {
      if (n.entity_type.empty())
        fail(Errc::InvalidArgument, "entity node '" + n.label + "' has no resolved type");
      return LfEntity{n.entity_type, n.label};
    }
    fail(Errc::InvalidArgument, "type node used as a predicate argument");
  };

  // Recursive element-list to term-list rendering.
  auto render = [&](const std::vector<ElemRef>& elems, auto&& self) -> std::vector<LfTerm> {
    std::vector<LfTerm> terms;
    for (const ElemRef& el : elems) {
      switch (el.kind) {
        case ElemRef::Kind::Node:
          break;  // nodes surface through the predicates that use them
        case ElemRef::Kind::Edge: {
          const Edge& e = g.edges[el.index];
          if (e.relation == "const") {
            const Node& v = g.nodes[e.arg1];
            const Node& ent = g.nodes[e.arg2];
            if (v.kind != NodeKind::Variable || ent.kind != NodeKind::Entity)
              fail(Errc::InvalidArgument, "const edge must bind a variable to an entity");
            terms.push_back(
                LfTerm{LfConstPred{v.label, LfEntity{ent.entity_type, ent.label}}});
          } else {
            terms.push_back(LfTerm{LfRelationPred{e.relation, argval(e.arg1), argval(e.arg2)}});
          }
          break;
        }
        case ElemRef::Kind::Attachment: {
          const TypeAttachment& a = g.attachments[el.index];
          terms.push_back(
              LfTerm{LfTypePred{g.nodes[a.type_node].label, argval(a.constrained_node)}});
          break;
        }
        case ElemRef::Kind::Scope: {
          const OperationScope& sc = g.scopes[el.index];
          LfOperatorApp op;
          op.op = sc.operation;
          for (const auto& [role, node] : sc.role_args) {
            if (role == "arg-return")
              op.return_var = g.nodes[node].label;
            else
              op.leading_vars.push_back(g.nodes[node].label);
          }
          op.body = self(sc.elements, self);
          if (op.body.empty())
            fail(Errc::EmptyBody, "operation '" + sc.operation + "' has an empty scope");
          terms.push_back(LfTerm{std::move(op)});
          break;
        }
      }
    }
    return terms;
  };

  LogicalForm lf;
  lf.answer_var = g.nodes[*g.return_node].label;
  lf.body = render(g.top_elements, render);
  if (lf.body.empty())
    fail(Errc::EmptyBody, "graph has no predicate to print");
  return lf;
}

// Action sequence -> logical form, via the graph.
inline LogicalForm actions_to_lf(const std::vector<Action>& seq, const KBSchema& schema) {
  return graph_to_lf(build_graph(seq, schema));
}

// Canonical printing: normalize ordering and variable names through the graph
// representation, then render. Idempotent, and invariant under conjunct
// permutation of the input.
inline std::string print_lf(const LogicalForm& lf, const KBSchema* schema = nullptr) {
  return render_lf(graph_to_lf(lf_to_graph(lf, schema)));
}

}  // namespace seq2act

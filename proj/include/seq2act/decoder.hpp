#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seq2act/constraints.hpp"
#include "seq2act/convert.hpp"
#include "seq2act/model.hpp"
#include "seq2act/postcheck.hpp"
#include "seq2act/trainer.hpp"

namespace seq2act {

// Constrained beam-search inference: grow action prefixes ranked by
// accumulated log-probability, filter candidate actions through the
// constraint controller (dropped actions simply lose their mass; nothing is
// renormalized), and return the highest-scoring completed sequence with its
// graph and logical form.

// Entity replacing on an input token stream: longest-match against schema
// entity surface forms, one placeholder per distinct entity, numbered per
// type in order of appearance.
struct InputReplacement {
  std::vector<std::string> tokens;
  std::map<std::string, std::string> placeholder_entities;
};

inline InputReplacement replace_input(const KBSchema& schema, std::vector<std::string> tokens) {
  InputReplacement out;
  std::vector<std::pair<std::vector<std::string>, std::string>> surfaces;
  for (const auto& [name, type] : schema.entity_type) {
    if (parse_placeholder(name, schema, nullptr)) continue;
    std::vector<std::string> words;
    std::string w;
    std::istringstream ss(name);
    while (std::getline(ss, w, '_'))
      if (!w.empty()) words.push_back(w);
    surfaces.emplace_back(std::move(words), name);
  }
  // Longest surface form first; names break ties for determinism.
  std::sort(surfaces.begin(), surfaces.end(), [](const auto& a, const auto& b) {
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.second < b.second;
  });
  std::map<std::string, std::size_t> per_type;
  std::map<std::string, std::string> entity_to_placeholder;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& [words, name] : surfaces) {
      if (i + words.size() > tokens.size()) continue;
      bool eq = true;
      for (std::size_t k = 0; k < words.size() && eq; ++k) eq = tokens[i + k] == words[k];
      if (!eq) continue;
      std::string& ph = entity_to_placeholder[name];
      if (ph.empty()) {
        const std::string& type = schema.type_of_entity(name);
        ph = "<" + type + ":" + std::to_string(per_type[type]++) + ">";
        out.placeholder_entities[ph] = name;
      }
      tokens.erase(tokens.begin() + i, tokens.begin() + i + words.size());
      tokens.insert(tokens.begin() + i, ph);
      break;
    }
  }
  out.tokens = std::move(tokens);
  return out;
}

// ---------------------------------------------------------------------------
// Beam search

struct BeamItem {
  std::vector<std::size_t> action_ids;
  double log_prob = 0.0;
  CellState state;   // decoder state after consuming the prefix
  Value context;     // attention context at that state
  Value logits;      // scores for the next action
  Value attention;   // attention weights at that state
  PartialGraphState graph_state;
};

struct ScoredExtension {
  std::size_t action_id = 0;
  double score = 0.0;
  std::string text;  // serialized action, or "</s>"
};

// Top-scoring legal extensions of one item: candidates are ranked by score
// with ties broken by lexicographic action text, and illegal actions are
// filtered before ranking.
inline std::vector<ScoredExtension> expand(double base_score, const Tensor& log_probs,
                                           const std::vector<char>& legal,
                                           const std::vector<std::string>& texts,
                                           std::size_t beam_size) {
  std::vector<ScoredExtension> out;
  for (std::size_t a = 0; a < log_probs.numel(); ++a) {
    if (!legal[a]) continue;
    out.push_back({a, base_score + log_probs[a], texts[a]});
  }
  std::sort(out.begin(), out.end(), [](const ScoredExtension& x, const ScoredExtension& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.text < y.text;
  });
  if (out.size() > beam_size) out.resize(beam_size);
  return out;
}

struct StepDiagnostics {
  std::size_t step = 0;
  std::vector<std::pair<std::string, double>> expanded;       // kept candidates
  std::vector<std::pair<std::string, std::string>> filtered;  // action -> rule
  std::vector<double> attention;                              // best item's weights
};

struct ParseResult {
  std::vector<Action> actions;
  double log_prob = 0.0;
  SemanticGraph graph;
  std::string logical_form;      // entities restored
  std::string raw_logical_form;  // as decoded, with placeholders
  std::map<std::string, std::string> placeholder_entities;
  std::vector<StepDiagnostics> diagnostics;  // populated with explain
};

struct DecodeOptions {
  std::size_t beam_size = 5;
  ConstraintLevel level = ConstraintLevel::C1C2;
  std::size_t max_steps = 0;  // 0: three times the longest training sequence
  bool explain = false;
};

inline ParseResult parse_sentence(const Checkpoint& ckpt, const std::string& sentence,
                                  const DecodeOptions& opts = {}) {
  const ModelConfig& cfg = ckpt.config;
  const ActionVocab& vocab = ckpt.actions;
  const KBSchema& schema = ckpt.schema;

  std::vector<std::string> raw_tokens = tokenize(sentence);
  if (raw_tokens.empty()) fail(Errc::EmptySentence, "empty input sentence");
  InputReplacement input = replace_input(schema, std::move(raw_tokens));
  std::vector<std::size_t> word_ids = encode_words(ckpt.words, input.tokens);
  std::size_t max_steps =
      opts.max_steps ? opts.max_steps : 3 * std::max<std::size_t>(ckpt.max_target_len, 8);

  // Cached per-id action texts for tie-breaking.
  std::vector<std::string> texts(vocab.size());
  for (std::size_t a = 0; a < vocab.size(); ++a)
    texts[a] = a == ActionVocab::kEos ? "</s>"
               : a == ActionVocab::kBos ? "<s>"
                                        : action_to_string(vocab.action_of(a));

  Tape tape;
  ModelHandles handles = register_model(tape, ckpt.params);
  EncodedSentence enc = encode(tape, handles, cfg, word_ids);

  auto advance_item = [&](BeamItem& item, std::size_t prev_action) {
    item.state = decode_advance(tape, handles, vocab, item.state, item.context, prev_action);
    DecodeStep step = decode_step(tape, handles, enc, item.state);
    item.context = step.context;
    item.logits = step.logits;
    item.attention = step.attention;
  };

  BeamItem root;
  root.state = decoder_initial_state(tape, enc, cfg.hidden_size);
  root.context = decode_step(tape, handles, enc, root.state).context;
  root.graph_state = initial_state(schema);
  advance_item(root, ActionVocab::kBos);

  std::vector<BeamItem> beam;
  beam.push_back(std::move(root));
  std::optional<std::pair<double, std::vector<std::size_t>>> best_completed;
  ParseResult result;

  for (std::size_t step_no = 0; step_no < max_steps && !beam.empty(); ++step_no) {
    // No length normalization: a prefix's score only decreases, so search can
    // stop when the best live item cannot beat the best completed one.
    if (best_completed) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const BeamItem& item : beam) best_live = std::max(best_live, item.log_prob);
      if (best_live <= best_completed->first) break;
    }

    StepDiagnostics diag;
    diag.step = step_no;

    struct Pooled {
      ScoredExtension ext;
      std::size_t item;
    };
    std::vector<Pooled> pooled;
    for (std::size_t it = 0; it < beam.size(); ++it) {
      BeamItem& item = beam[it];
      Tensor log_probs = ops::log_softmax(tape.val(item.logits));
      std::vector<char> legal(vocab.size(), 0);
      for (std::size_t a = 0; a < vocab.size(); ++a) {
        if (a == ActionVocab::kBos) continue;
        LegalityVerdict v =
            a == ActionVocab::kEos
                ? check_stop(item.graph_state, schema, opts.level)
                : check_action(item.graph_state, vocab.action_of(a), schema, opts.level);
        legal[a] = v.allowed ? 1 : 0;
        if (!v.allowed && opts.explain && it == 0)
          diag.filtered.emplace_back(texts[a], v.violated_rule);
      }
      for (ScoredExtension& ext : expand(item.log_prob, log_probs, legal, texts, opts.beam_size))
        pooled.push_back({std::move(ext), it});
    }
    std::sort(pooled.begin(), pooled.end(), [](const Pooled& x, const Pooled& y) {
      if (x.ext.score != y.ext.score) return x.ext.score > y.ext.score;
      return x.ext.text < y.ext.text;
    });

    std::vector<BeamItem> next;
    for (const Pooled& cand : pooled) {
      if (next.size() >= opts.beam_size) break;
      const BeamItem& parent = beam[cand.item];
      if (opts.explain) diag.expanded.emplace_back(cand.ext.text, cand.ext.score);
      if (cand.ext.action_id == ActionVocab::kEos) {
        if (!best_completed || cand.ext.score > best_completed->first)
          best_completed = {cand.ext.score, parent.action_ids};
        continue;  // completed items are held aside, not expanded
      }
      BeamItem child;
      child.action_ids = parent.action_ids;
      child.action_ids.push_back(cand.ext.action_id);
      child.log_prob = cand.ext.score;
      child.state = parent.state;
      child.context = parent.context;
      child.graph_state = parent.graph_state;
      apply_action(child.graph_state, vocab.action_of(cand.ext.action_id));
      advance_item(child, cand.ext.action_id);
      next.push_back(std::move(child));
    }
    if (opts.explain) {
      if (!next.empty()) {
        const Tensor& attn = tape.val(next[0].attention);
        diag.attention.assign(attn.data.begin(), attn.data.end());
      }
      result.diagnostics.push_back(std::move(diag));
    }
    beam = std::move(next);
  }

  if (!best_completed)
    fail(Errc::NoCompleteParse, "no complete parse within " + std::to_string(max_steps) +
                                    " steps at level " + constraint_level_name(opts.level));

  result.log_prob = best_completed->first;
  for (std::size_t id : best_completed->second) result.actions.push_back(vocab.action_of(id));
  result.graph = build_graph(result.actions, schema);
  LogicalForm lf = graph_to_lf(result.graph);
  result.raw_logical_form = render_lf(lf);
  result.placeholder_entities = input.placeholder_entities;
  result.logical_form = render_lf(substitute_entities(lf, input.placeholder_entities));
  return result;
}

// Recomputes a sequence's log-probability from scratch; used to audit decoder
// scores.
inline double rescore_tokens(const Checkpoint& ckpt, const std::vector<std::size_t>& word_ids,
                             const std::vector<Action>& actions) {
  Tape tape;
  ModelHandles handles = register_model(tape, ckpt.params);
  std::vector<std::size_t> target;
  for (const Action& a : actions) target.push_back(ckpt.actions.id_of(a));
  target.push_back(ActionVocab::kEos);
  return tape.val(
      sequence_log_prob(tape, handles, ckpt.config, ckpt.actions, word_ids, target))[0];
}

}  // namespace seq2act

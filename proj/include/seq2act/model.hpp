#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seq2act/actions.hpp"
#include "seq2act/autodiff.hpp"
#include "seq2act/errors.hpp"
#include "seq2act/nn.hpp"
#include "seq2act/schema.hpp"
#include "seq2act/tensor.hpp"

namespace seq2act {

struct ModelConfig {
  std::size_t hidden_size = 200;
  std::size_t word_dim = 100;
  std::size_t action_struct_dim = 50;  // structure-part embedding width
  std::size_t action_sem_dim = 50;     // semantic-part embedding width
  std::uint64_t seed = 1;

  std::size_t action_dim() const { return action_struct_dim + action_sem_dim; }
};

// ---------------------------------------------------------------------------
// Vocabularies

// Word vocabulary with a universal token at index 0 for unknown and rare
// words.
struct WordVocab {
  std::vector<std::string> tokens{"<unk>"};
  std::map<std::string, std::size_t> index;

  static constexpr std::size_t kUnk = 0;

  std::size_t add(const std::string& token) {
    auto it = index.find(token);
    if (it != index.end()) return it->second;
    tokens.push_back(token);
    index[token] = tokens.size() - 1;
    return tokens.size() - 1;
  }

  std::size_t id_of(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnk : it->second;
  }

  std::size_t size() const { return tokens.size(); }
};

// Action vocabulary. Every entry is a (structure part, semantic part) pair;
// the two parts index their own embedding tables, so actions sharing a part
// share that sub-embedding. Ids 0 and 1 are the begin/end-of-sequence
// markers.
struct ActionVocab {
  struct Entry {
    std::string structure;
    std::string semantic;
    std::optional<Action> action;  // absent for <bos>/<eos>
  };

  static constexpr std::size_t kBos = 0;
  static constexpr std::size_t kEos = 1;

  std::vector<Entry> entries;
  std::vector<std::string> structure_parts;
  std::vector<std::string> semantic_parts;
  std::vector<std::pair<std::size_t, std::size_t>> part_ids;  // per entry
  std::map<std::string, std::size_t> index;                   // "structure:semantic" -> id

  ActionVocab() {
    add_special("<s>", "<pad>");
    add_special("</s>", "<pad>");
  }

  std::size_t add(const Action& a) {
    std::string key = action_to_string(a);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    entries.push_back({structure_part(a), semantic_part(a), a});
    register_parts(entries.back());
    index[key] = entries.size() - 1;
    return entries.size() - 1;
  }

  std::optional<std::size_t> find(const Action& a) const {
    auto it = index.find(action_to_string(a));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  std::size_t id_of(const Action& a) const {
    auto id = find(a);
    if (!id) fail(Errc::UnknownActionPart, "action '" + action_to_string(a) + "' not in vocabulary");
    return *id;
  }

  const Action& action_of(std::size_t id) const {
    if (id >= entries.size() || !entries[id].action)
      fail(Errc::UnknownActionPart, "id " + std::to_string(id) + " is not a graph action");
    return *entries[id].action;
  }

  std::size_t size() const { return entries.size(); }

 private:
  void add_special(const std::string& structure, const std::string& semantic) {
    entries.push_back({structure, semantic, std::nullopt});
    register_parts(entries.back());
    index[structure + ":" + semantic] = entries.size() - 1;
  }

  void register_parts(const Entry& e) {
    part_ids.push_back({part_id(structure_parts, structure_index_, e.structure),
                        part_id(semantic_parts, semantic_index_, e.semantic)});
  }

  static std::size_t part_id(std::vector<std::string>& parts,
                             std::map<std::string, std::size_t>& idx, const std::string& s) {
    auto it = idx.find(s);
    if (it != idx.end()) return it->second;
    parts.push_back(s);
    idx[s] = parts.size() - 1;
    return parts.size() - 1;
  }

  std::map<std::string, std::size_t> structure_index_;
  std::map<std::string, std::size_t> semantic_index_;
};

// All actions derivable from a schema: node/edge/operation actions for every
// declared symbol, plus argument actions over the given node labels. Keeps
// constrained decoding able to propose schema-legal actions never seen in
// training.
inline std::vector<Action> schema_actions(const KBSchema& schema,
                                          const std::vector<std::string>& var_labels) {
  std::vector<Action> out;
  for (const auto& v : var_labels) out.push_back(make_action(ActionKind::AddVariable, v));
  for (const auto& [e, t] : schema.entity_type) out.push_back(make_action(ActionKind::AddEntity, e));
  for (const auto& t : schema.types) out.push_back(make_action(ActionKind::AddType, t));
  for (const auto& [r, sig] : schema.relations) out.push_back(make_action(ActionKind::AddEdge, r));
  out.push_back(make_action(ActionKind::AddEdge, "const"));
  for (const auto& [op, roles] : schema.operations) {
    out.push_back(make_action(ActionKind::StartOperation, op));
    out.push_back(make_action(ActionKind::EndOperation, op));
  }
  std::vector<std::string> labels = var_labels;
  for (const auto& [e, t] : schema.entity_type) labels.push_back(e);
  std::vector<std::string> roles{"arg", "arg1_node", "arg2_node"};
  for (const auto& [op, op_roles] : schema.operations)
    for (const auto& r : op_roles)
      if (std::find(roles.begin(), roles.end(), r) == roles.end()) roles.push_back(r);
  for (const auto& role : roles) {
    bool node_role = role == "arg" || role == "arg1_node" || role == "arg2_node";
    for (const auto& label : labels) {
      // Operation roles bind variables only; skip entity labels there.
      if (node_role || !schema.has_entity(label)) out.push_back(make_argument(role, label));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameters

struct ModelParameters {
  Tensor word_embed;        // [Vw x Dw]
  Tensor act_struct_embed;  // [Vs x Dstruct]
  Tensor act_sem_embed;     // [Vm x Dsem]
  LstmParams enc_fwd, enc_bwd, dec;
  Tensor w_init;  // [H x 2H]
  Tensor w_att;   // [H x 2H]
  Tensor w_out;   // [Va x 3H]

  template <typename F>
  void for_each_block(F&& f) {
    f("word_embed", word_embed);
    f("act_struct_embed", act_struct_embed);
    f("act_sem_embed", act_sem_embed);
    f("enc_fwd.wx", enc_fwd.wx);
    f("enc_fwd.wh", enc_fwd.wh);
    f("enc_fwd.b", enc_fwd.b);
    f("enc_bwd.wx", enc_bwd.wx);
    f("enc_bwd.wh", enc_bwd.wh);
    f("enc_bwd.b", enc_bwd.b);
    f("dec.wx", dec.wx);
    f("dec.wh", dec.wh);
    f("dec.b", dec.b);
    f("w_init", w_init);
    f("w_att", w_att);
    f("w_out", w_out);
  }

  template <typename F>
  void for_each_block(F&& f) const {
    const_cast<ModelParameters*>(this)->for_each_block(
        [&](const char* name, Tensor& t) { f(name, static_cast<const Tensor&>(t)); });
  }

  // All parameters drawn from U[-0.1, 0.1].
  static ModelParameters init(const ModelConfig& cfg, std::size_t word_vocab,
                              std::size_t struct_vocab, std::size_t sem_vocab,
                              std::size_t action_vocab, Rng& rng) {
    ModelParameters p;
    std::size_t h = cfg.hidden_size;
    p.word_embed = Tensor::uniform({word_vocab, cfg.word_dim}, -0.1, 0.1, rng);
    p.act_struct_embed = Tensor::uniform({struct_vocab, cfg.action_struct_dim}, -0.1, 0.1, rng);
    p.act_sem_embed = Tensor::uniform({sem_vocab, cfg.action_sem_dim}, -0.1, 0.1, rng);
    p.enc_fwd = LstmParams::init(h, cfg.word_dim, rng);
    p.enc_bwd = LstmParams::init(h, cfg.word_dim, rng);
    p.dec = LstmParams::init(h, cfg.action_dim() + 2 * h, rng);
    p.w_init = Tensor::uniform({h, 2 * h}, -0.1, 0.1, rng);
    p.w_att = Tensor::uniform({h, 2 * h}, -0.1, 0.1, rng);
    p.w_out = Tensor::uniform({action_vocab, 3 * h}, -0.1, 0.1, rng);
    return p;
  }
};

struct ModelHandles {
  Value word_embed, act_struct, act_sem, w_init, w_att, w_out;
  LstmHandles enc_fwd, enc_bwd, dec;
};

inline ModelHandles register_model(Tape& tape, const ModelParameters& p) {
  ModelHandles h;
  h.word_embed = tape.leaf(&p.word_embed);
  h.act_struct = tape.leaf(&p.act_struct_embed);
  h.act_sem = tape.leaf(&p.act_sem_embed);
  h.enc_fwd = register_lstm(tape, p.enc_fwd);
  h.enc_bwd = register_lstm(tape, p.enc_bwd);
  h.dec = register_lstm(tape, p.dec);
  h.w_init = tape.leaf(&p.w_init);
  h.w_att = tape.leaf(&p.w_att);
  h.w_out = tape.leaf(&p.w_out);
  return h;
}

// ---------------------------------------------------------------------------
// Encoder / decoder

// Context-sensitive embeddings b_i = [h_i^F, h_i^B] from the bidirectional
// recurrence, the attention keys W(a) b_i, and the decoder's initial hidden
// state tanh(W(s) [h_m^F, h_1^B]).
struct EncodedSentence {
  std::vector<Value> context;
  std::vector<Value> att_keys;
  Value init_hidden;
  std::size_t length = 0;
};

inline EncodedSentence encode(Tape& tape, const ModelHandles& h, const ModelConfig& cfg,
                              const std::vector<std::size_t>& word_ids) {
  if (word_ids.empty()) fail(Errc::EmptySentence, "cannot encode an empty sentence");
  std::size_t m = word_ids.size();

  std::vector<Value> embeds(m);
  for (std::size_t i = 0; i < m; ++i) embeds[i] = tape.row(h.word_embed, word_ids[i]);

  std::vector<Value> fwd(m), bwd(m);
  CellState f = initial_cell_state(tape, cfg.hidden_size);
  for (std::size_t i = 0; i < m; ++i) {
    f = cell_step(tape, h.enc_fwd, embeds[i], f);
    fwd[i] = f.h;
  }
  CellState b = initial_cell_state(tape, cfg.hidden_size);
  for (std::size_t i = m; i-- > 0;) {
    b = cell_step(tape, h.enc_bwd, embeds[i], b);
    bwd[i] = b.h;
  }

  EncodedSentence enc;
  enc.length = m;
  enc.context.reserve(m);
  enc.att_keys.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Value bi = tape.concat(fwd[i], bwd[i]);
    enc.context.push_back(bi);
    enc.att_keys.push_back(tape.matvec(h.w_att, bi));
  }
  enc.init_hidden = tape.tanh_(tape.matvec(h.w_init, tape.concat(fwd[m - 1], bwd[0])));
  return enc;
}

inline CellState decoder_initial_state(Tape& tape, const EncodedSentence& enc,
                                       std::size_t hidden) {
  return {enc.init_hidden, tape.constant(Tensor::zeros({hidden}))};
}

// Factored action embedding: [phi_struct(structure part), phi_sem(semantic
// part)].
inline Value action_embedding(Tape& tape, const ModelHandles& h, const ActionVocab& vocab,
                              std::size_t action_id) {
  if (action_id >= vocab.size())
    fail(Errc::UnknownActionPart, "action id " + std::to_string(action_id) + " out of range");
  auto [sid, mid] = vocab.part_ids[action_id];
  return tape.concat(tape.row(h.act_struct, sid), tape.row(h.act_sem, mid));
}

// One decoder step from state s_j: attention over the input, the context
// vector, and the unnormalized output scores over actions.
struct DecodeStep {
  Value logits;     // [Va]
  Value attention;  // [m], sums to 1
  Value context;    // [2H]
};

inline DecodeStep decode_step(Tape& tape, const ModelHandles& h, const EncodedSentence& enc,
                              const CellState& state) {
  DecodeStep out;
  Value scores = tape.dots_with(state.h, enc.att_keys);
  out.attention = tape.softmax_(scores);
  out.context = tape.weighted_sum(out.attention, enc.context);
  out.logits = tape.matvec(h.w_out, tape.concat(state.h, out.context));
  return out;
}

// Consumes the chosen action: s_{j+1} = LSTM([phi(y_j), c_j], s_j).
inline CellState decode_advance(Tape& tape, const ModelHandles& h, const ActionVocab& vocab,
                                const CellState& state, Value context, std::size_t action_id) {
  Value input = tape.concat(action_embedding(tape, h, vocab, action_id), context);
  return cell_step(tape, h.dec, input, state);
}

// Teacher-forced log P(Y | X). The target must end with the end-of-sequence
// id. Each step advances the state by consuming the previous action (the
// begin-of-sequence marker before the first prediction) together with that
// state's attention context, then predicts from the advanced state.
inline Value sequence_log_prob(Tape& tape, const ModelHandles& h, const ModelConfig& cfg,
                               const ActionVocab& vocab, const std::vector<std::size_t>& word_ids,
                               const std::vector<std::size_t>& target_ids) {
  if (target_ids.empty() || target_ids.back() != ActionVocab::kEos)
    fail(Errc::InvalidArgument, "target must be non-empty and end with </s>");
  EncodedSentence enc = encode(tape, h, cfg, word_ids);
  CellState state = decoder_initial_state(tape, enc, cfg.hidden_size);
  Value context = decode_step(tape, h, enc, state).context;
  std::vector<Value> step_log_probs;
  step_log_probs.reserve(target_ids.size());
  std::size_t prev = ActionVocab::kBos;
  for (std::size_t target : target_ids) {
    state = decode_advance(tape, h, vocab, state, context, prev);
    DecodeStep step = decode_step(tape, h, enc, state);
    step_log_probs.push_back(tape.log_prob_of(step.logits, target));
    context = step.context;
    prev = target;
  }
  return tape.sum_list(step_log_probs);
}

}  // namespace seq2act

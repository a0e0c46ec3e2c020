#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "seq2act/convert.hpp"
#include "seq2act/errors.hpp"
#include "seq2act/logical_form.hpp"
#include "seq2act/model.hpp"
#include "seq2act/schema.hpp"

namespace seq2act {

// ---------------------------------------------------------------------------
// Corpus ingestion

struct RawExample {
  std::string utterance;
  std::string logical_form;
};

inline std::vector<std::string> tokenize(const std::string& utterance) {
  std::vector<std::string> tokens;
  std::istringstream in(utterance);
  std::string tok;
  auto strip = [](std::string s) {
    auto is_punct = [](char c) {
      return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == '"' || c == '\'';
    };
    while (!s.empty() && is_punct(s.front())) s.erase(s.begin());
    while (!s.empty() && is_punct(s.back())) s.pop_back();
    return s;
  };
  while (in >> tok) {
    for (char& c : tok) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    tok = strip(tok);
    if (!tok.empty()) tokens.push_back(tok);
  }
  return tokens;
}

// Reads UTF-8 lines "utterance<TAB>logical_form". Blank lines are skipped.
inline std::vector<RawExample> read_corpus_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open corpus file '" + path + "'");
  std::vector<RawExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail(Errc::ParseError, path + ":" + std::to_string(line_no) + ": expected a TAB separator");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Entity replacing

// Placeholder tokens look like <state:0>; the type must be declared.
inline bool parse_placeholder(const std::string& s, const KBSchema& schema, std::string* type_out) {
  if (s.size() < 5 || s.front() != '<' || s.back() != '>') return false;
  std::size_t colon = s.find(':');
  if (colon == std::string::npos) return false;
  std::string type = s.substr(1, colon - 1);
  if (!schema.has_type(type)) return false;
  for (std::size_t i = colon + 1; i + 1 < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  if (type_out) *type_out = type;
  return true;
}

struct CorpusExample {
  std::vector<std::string> tokens;  // with placeholders substituted
  std::string lf_text;              // canonical, with placeholders
  std::vector<Action> actions;
  std::map<std::string, std::string> placeholder_entities;  // <state:0> -> texas
};

namespace trainer_detail {

inline void collect_entities(const std::vector<LfTerm>& terms, std::vector<LfEntity*>& out) {
  for (auto& t : const_cast<std::vector<LfTerm>&>(terms)) {
    if (auto* tp = std::get_if<LfTypePred>(&t.node)) {
      if (auto* e = std::get_if<LfEntity>(&tp->arg)) out.push_back(e);
    } else if (auto* rp = std::get_if<LfRelationPred>(&t.node)) {
      if (auto* e = std::get_if<LfEntity>(&rp->arg1)) out.push_back(e);
      if (auto* e = std::get_if<LfEntity>(&rp->arg2)) out.push_back(e);
    } else if (auto* cp = std::get_if<LfConstPred>(&t.node)) {
      out.push_back(&cp->entity);
    } else if (auto* op = std::get_if<LfOperatorApp>(&t.node)) {
      collect_entities(op->body, out);
    }
  }
}

// Validation of a logical form whose entities may already be placeholders.
inline void validate_with_placeholders(const LogicalForm& lf, const KBSchema& schema) {
  std::vector<LfEntity*> entities;
  collect_entities(lf.body, entities);
  for (const LfEntity* e : entities) {
    std::string type;
    if (parse_placeholder(e->name, schema, &type)) {
      if (type != e->type)
        fail(Errc::UnknownSymbol, "placeholder '" + e->name + "' used as type '" + e->type + "'");
      continue;
    }
    if (!schema.has_entity(e->name))
      fail(Errc::UnresolvableEntity, "entity '" + e->name + "' not in schema");
    if (schema.type_of_entity(e->name) != e->type)
      fail(Errc::UnknownSymbol, "entity '" + e->name + "' is not of type '" + e->type + "'");
  }
  // Types, relations and operations must resolve exactly.
  struct Walk {
    const KBSchema& schema;
    void terms(const std::vector<LfTerm>& ts) {
      for (const LfTerm& t : ts) {
        if (const auto* tp = std::get_if<LfTypePred>(&t.node)) {
          if (!schema.has_type(tp->type))
            fail(Errc::UnknownSymbol, "type '" + tp->type + "' not in schema");
        } else if (const auto* rp = std::get_if<LfRelationPred>(&t.node)) {
          if (!schema.has_relation(rp->relation))
            fail(Errc::UnknownSymbol, "relation '" + rp->relation + "' not in schema");
        } else if (const auto* op = std::get_if<LfOperatorApp>(&t.node)) {
          if (!schema.has_operation(op->op))
            fail(Errc::UnknownSymbol, "operation '" + op->op + "' not in schema");
          terms(op->body);
        }
      }
    }
  };
  Walk{schema}.terms(lf.body);
}

}  // namespace trainer_detail

// Replaces entity mentions in one example with typed placeholders: the
// logical form's entities (in appearance order) become <type:k>, and every
// utterance occurrence of the entity's surface form (its name with
// underscores as spaces; longest entities first) becomes the same token.
struct ReplacedExample {
  std::vector<std::string> tokens;
  LogicalForm lf;
  std::map<std::string, std::string> placeholder_entities;
};

inline ReplacedExample replace_entities(const std::vector<std::string>& tokens,
                                        const LogicalForm& lf, const KBSchema& schema) {
  ReplacedExample out;
  out.tokens = tokens;
  out.lf = lf;
  trainer_detail::validate_with_placeholders(out.lf, schema);

  std::vector<LfEntity*> refs;
  trainer_detail::collect_entities(out.lf.body, refs);

  // Distinct entities in appearance order; placeholders counted per type.
  std::vector<std::pair<std::string, std::string>> entities;  // (name, type)
  for (const LfEntity* e : refs) {
    if (parse_placeholder(e->name, schema, nullptr)) {
      out.placeholder_entities.emplace(e->name, e->name);  // already replaced
      continue;
    }
    bool seen = false;
    for (const auto& [n, t] : entities) seen |= n == e->name;
    if (!seen) entities.emplace_back(e->name, e->type);
  }

  std::map<std::string, std::size_t> per_type;
  std::map<std::string, std::string> name_to_placeholder;
  for (const auto& [name, type] : entities) {
    std::string ph = "<" + type + ":" + std::to_string(per_type[type]++) + ">";
    name_to_placeholder[name] = ph;
    out.placeholder_entities[ph] = name;
  }

  // Utterance side: longest surface forms first so multiword names win.
  std::vector<std::pair<std::vector<std::string>, std::string>> surfaces;  // words -> placeholder
  for (const auto& [name, ph] : name_to_placeholder) {
    std::vector<std::string> words;
    std::string word;
    std::istringstream ss(name);
    while (std::getline(ss, word, '_'))
      if (!word.empty()) words.push_back(word);
    surfaces.emplace_back(std::move(words), ph);
  }
  std::sort(surfaces.begin(), surfaces.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
  for (const auto& [words, ph] : surfaces) {
    bool found = false;
    for (std::size_t i = 0; i + words.size() <= out.tokens.size();) {
      bool match = true;
      for (std::size_t k = 0; k < words.size() && match; ++k) match = out.tokens[i + k] == words[k];
      if (match) {
        out.tokens.erase(out.tokens.begin() + i, out.tokens.begin() + i + words.size());
        out.tokens.insert(out.tokens.begin() + i, ph);
        found = true;
        ++i;
      } else {
        ++i;
      }
    }
    if (!found) {
      std::string name;
      for (const auto& [n, p] : name_to_placeholder)
        if (p == ph) name = n;
      fail(Errc::UnresolvableEntity, "entity '" + name + "' has no mention in the utterance");
    }
  }

  // Rewrite the logical form.
  for (LfEntity* e : refs) {
    auto it = name_to_placeholder.find(e->name);
    if (it != name_to_placeholder.end()) e->name = it->second;
  }
  return out;
}

// Restores real entity names on a predicted logical form.
inline LogicalForm substitute_entities(LogicalForm lf,
                                       const std::map<std::string, std::string>& placeholders) {
  std::vector<LfEntity*> refs;
  trainer_detail::collect_entities(lf.body, refs);
  for (LfEntity* e : refs) {
    auto it = placeholders.find(e->name);
    if (it != placeholders.end()) e->name = it->second;
  }
  return lf;
}

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessedCorpus {
  std::vector<CorpusExample> examples;
  WordVocab words;
  ActionVocab actions;
  KBSchema schema;  // augmented with placeholder entities
  std::size_t max_target_len = 0;
};

// Adds <type:k> placeholder entities for k in [0, count_per_type[type]).
inline KBSchema augment_with_placeholders(const KBSchema& schema,
                                          const std::map<std::string, std::size_t>& per_type) {
  KBSchema out = schema;
  for (const auto& [type, count] : per_type) {
    for (std::size_t k = 0; k < count; ++k)
      out.entity_type["<" + type + ":" + std::to_string(k) + ">"] = type;
  }
  return out;
}

// Full preprocessing: entity replacing, canonical conversion to actions,
// vocabulary freezing (words occurring once map to the universal token).
inline PreprocessedCorpus preprocess(const std::vector<RawExample>& raw, const KBSchema& schema) {
  PreprocessedCorpus out;

  std::vector<ReplacedExample> replaced;
  std::map<std::string, std::size_t> placeholders_per_type;
  for (const RawExample& ex : raw) {
    LogicalForm lf = parse_lf(ex.logical_form);
    ReplacedExample r = replace_entities(tokenize(ex.utterance), lf, schema);
    for (const auto& [ph, name] : r.placeholder_entities) {
      std::string type;
      parse_placeholder(ph, schema, &type);
      std::size_t index = std::stoul(ph.substr(type.size() + 2));
      placeholders_per_type[type] = std::max(placeholders_per_type[type], index + 1);
    }
    replaced.push_back(std::move(r));
  }

  out.schema = augment_with_placeholders(schema, placeholders_per_type);

  // Word vocabulary: singletons fall back to the universal token.
  std::map<std::string, std::size_t> counts;
  for (const auto& r : replaced)
    for (const auto& t : r.tokens) ++counts[t];
  for (const auto& r : replaced)
    for (const auto& t : r.tokens)
      if (counts[t] >= 2) out.words.add(t);

  // Examples with canonical text and action sequences.
  std::vector<std::string> var_labels;
  for (const auto& r : replaced) {
    CorpusExample ex;
    ex.tokens = r.tokens;
    SemanticGraph g = lf_to_graph(r.lf, &out.schema);
    LogicalForm canonical = graph_to_lf(g);
    ex.lf_text = render_lf(canonical);
    ex.actions = lf_to_actions(r.lf, out.schema);
    ex.placeholder_entities = r.placeholder_entities;
    out.max_target_len = std::max(out.max_target_len, ex.actions.size() + 1);
    for (const Action& a : ex.actions) {
      if (a.kind == ActionKind::AddVariable &&
          std::find(var_labels.begin(), var_labels.end(), a.label) == var_labels.end())
        var_labels.push_back(a.label);
    }
    out.examples.push_back(std::move(ex));
  }
  std::sort(var_labels.begin(), var_labels.end());

  // Action vocabulary: observed actions plus everything the schema offers.
  for (const auto& ex : out.examples)
    for (const Action& a : ex.actions) out.actions.add(a);
  for (const Action& a : schema_actions(out.schema, var_labels)) out.actions.add(a);
  return out;
}

// ---------------------------------------------------------------------------
// Training

// 30 epochs at 0.1, halving every 5 epochs after epoch 15.
struct TrainSchedule {
  std::size_t epochs = 30;
  double initial_lr = 0.1;
  std::size_t halve_after_epoch = 15;
  std::size_t halve_every = 5;

  double lr_at(std::size_t epoch) const {  // 1-based
    if (epoch <= halve_after_epoch) return initial_lr;
    std::size_t halvings = (epoch - halve_after_epoch - 1) / halve_every + 1;
    return initial_lr / static_cast<double>(1ULL << halvings);
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double mean_neg_log_prob = 0.0;
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochMetrics> metrics;
};

inline std::vector<std::size_t> encode_words(const WordVocab& vocab,
                                             const std::vector<std::string>& tokens) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id_of(t));
  return ids;
}

inline std::vector<std::size_t> encode_target(const ActionVocab& vocab,
                                              const std::vector<Action>& actions) {
  std::vector<std::size_t> ids;
  ids.reserve(actions.size() + 1);
  for (const Action& a : actions) ids.push_back(vocab.id_of(a));
  ids.push_back(ActionVocab::kEos);
  return ids;
}

// Per-example stochastic gradient descent on -log P(Y|X), example order
// shuffled each epoch with the seeded generator. Deterministic given the
// seed.
inline TrainResult train(const ModelConfig& cfg, const TrainSchedule& schedule,
                         const PreprocessedCorpus& corpus,
                         const std::function<void(const EpochMetrics&)>& on_epoch = nullptr) {
  if (corpus.examples.empty()) fail(Errc::EmptyInput, "training corpus is empty");

  Rng rng(cfg.seed);
  TrainResult result;
  result.params =
      ModelParameters::init(cfg, corpus.words.size(), corpus.actions.structure_parts.size(),
                            corpus.actions.semantic_parts.size(), corpus.actions.size(), rng);

  std::vector<std::vector<std::size_t>> word_ids, target_ids;
  for (const auto& ex : corpus.examples) {
    word_ids.push_back(encode_words(corpus.words, ex.tokens));
    target_ids.push_back(encode_target(corpus.actions, ex.actions));
  }

  std::vector<std::size_t> order(corpus.examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= schedule.epochs; ++epoch) {
    double lr = schedule.lr_at(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      Tape tape;
      ModelHandles h = register_model(tape, result.params);
      Value lp = sequence_log_prob(tape, h, cfg, corpus.actions, word_ids[idx], target_ids[idx]);
      Value loss = tape.scale(lp, -1.0);
      double value = tape.val(loss)[0];
      if (!std::isfinite(value))
        fail(Errc::DivergenceDetected, "non-finite loss at epoch " + std::to_string(epoch));
      loss_sum += value;
      tape.backward(loss);

      std::vector<Value> handles{h.word_embed, h.act_struct, h.act_sem, h.enc_fwd.wx,
                                 h.enc_fwd.wh, h.enc_fwd.b,  h.enc_bwd.wx, h.enc_bwd.wh,
                                 h.enc_bwd.b,  h.dec.wx,     h.dec.wh,     h.dec.b,
                                 h.w_init,     h.w_att,      h.w_out};
      std::size_t block = 0;
      result.params.for_each_block([&](const char*, Tensor& t) {
        const Tensor& g = tape.grad(handles[block++]);
        for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] -= lr * g.data[i];
      });
    }
    EpochMetrics m{epoch, lr, loss_sum / corpus.examples.size()};
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  ModelConfig config;
  WordVocab words;
  ActionVocab actions;
  KBSchema schema;
  std::size_t max_target_len = 0;
  ModelParameters params;
};

inline std::uint64_t vocabulary_hash(const WordVocab& words, const ActionVocab& actions) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& t : words.tokens) mix(t);
  for (const auto& e : actions.entries) mix(e.structure + ":" + e.semantic);
  return h;
}

namespace checkpoint_detail {

inline constexpr char kMagic[8] = {'S', '2', 'A', 'C', 'K', 'P', 'T', '\n'};
inline constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::string buf;
  void bytes(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  void bytes(void* p, std::size_t n) {
    if (pos + n > buf.size()) fail(Errc::CorruptCheckpoint, "truncated checkpoint");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, 8);
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (pos + n > buf.size()) fail(Errc::CorruptCheckpoint, "truncated checkpoint");
    std::string s(buf, pos, n);
    pos += n;
    return s;
  }
};

inline std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace checkpoint_detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  using namespace checkpoint_detail;
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kVersion);

  w.u64(ckpt.config.hidden_size);
  w.u64(ckpt.config.word_dim);
  w.u64(ckpt.config.action_struct_dim);
  w.u64(ckpt.config.action_sem_dim);
  w.u64(ckpt.config.seed);
  w.u64(ckpt.max_target_len);
  w.u64(vocabulary_hash(ckpt.words, ckpt.actions));

  w.u64(ckpt.words.tokens.size());
  for (const auto& t : ckpt.words.tokens) w.str(t);
  // Entries beyond the two specials round-trip through the action text form.
  w.u64(ckpt.actions.size() - 2);
  for (std::size_t i = 2; i < ckpt.actions.size(); ++i)
    w.str(action_to_string(*ckpt.actions.entries[i].action));
  w.str(render_schema(ckpt.schema));

  const_cast<ModelParameters&>(ckpt.params).for_each_block([&](const char* name, Tensor& t) {
    w.str(name);
    w.u64(t.shape.size());
    for (std::size_t d : t.shape) w.u64(d);
    w.bytes(t.data.data(), t.data.size() * sizeof(double));
  });

  w.u64(fnv1a(w.buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write checkpoint '" + path + "'");
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace checkpoint_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot read checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();

  if (buf.size() < sizeof(kMagic) + 12 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    fail(Errc::CorruptCheckpoint, "bad magic in '" + path + "'");
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, buf.data() + buf.size() - 8, 8);
  std::string payload = buf.substr(0, buf.size() - 8);
  if (fnv1a(payload) != stored_sum)
    fail(Errc::CorruptCheckpoint, "checksum mismatch in '" + path + "'");

  Reader r{payload};
  r.pos = sizeof(kMagic);
  std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(Errc::VersionMismatch, "checkpoint version " + std::to_string(version) +
                                    ", expected " + std::to_string(kVersion));

  Checkpoint ckpt;
  ckpt.config.hidden_size = r.u64();
  ckpt.config.word_dim = r.u64();
  ckpt.config.action_struct_dim = r.u64();
  ckpt.config.action_sem_dim = r.u64();
  ckpt.config.seed = r.u64();
  ckpt.max_target_len = r.u64();
  std::uint64_t vocab_hash = r.u64();

  std::uint64_t n_words = r.u64();
  if (n_words == 0) fail(Errc::CorruptCheckpoint, "empty word vocabulary");
  std::string unk = r.str();
  if (unk != "<unk>") fail(Errc::CorruptCheckpoint, "unexpected universal token");
  for (std::uint64_t i = 1; i < n_words; ++i) ckpt.words.add(r.str());

  std::uint64_t n_actions = r.u64();
  for (std::uint64_t i = 0; i < n_actions; ++i) ckpt.actions.add(string_to_action(r.str()));
  ckpt.schema = load_schema(r.str());

  if (vocabulary_hash(ckpt.words, ckpt.actions) != vocab_hash)
    fail(Errc::VersionMismatch, "vocabulary hash mismatch in '" + path + "'");

  ckpt.params.for_each_block([&](const char* name, Tensor& t) {
    std::string stored = r.str();
    if (stored != name)
      fail(Errc::CorruptCheckpoint, "expected block '" + std::string(name) + "', found '" +
                                        stored + "'");
    std::uint64_t ndims = r.u64();
    std::vector<std::size_t> shape(ndims);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = r.u64();
      numel *= d;
    }
    t = Tensor::zeros(shape);
    r.bytes(t.data.data(), numel * sizeof(double));
  });
  if (r.pos != payload.size()) fail(Errc::CorruptCheckpoint, "trailing bytes in '" + path + "'");
  return ckpt;
}

// VersionMismatch when a checkpoint's vocabularies differ from freshly
// derived ones (e.g. resuming against a different corpus).
inline void verify_vocabulary(const Checkpoint& ckpt, const WordVocab& words,
                              const ActionVocab& actions) {
  if (vocabulary_hash(ckpt.words, ckpt.actions) != vocabulary_hash(words, actions))
    fail(Errc::VersionMismatch, "checkpoint was trained with a different vocabulary");
}

}  // namespace seq2act

// Acceptance suite: runs every acceptance criterion end to end and prints one
// pass/fail line per criterion. Exit status is zero iff all criteria pass.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include "seq2act/constraints.hpp"
#include "seq2act/convert.hpp"
#include "seq2act/decoder.hpp"
#include "seq2act/evaluator.hpp"
#include "seq2act/postcheck.hpp"
#include "seq2act/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/lf_generator.hpp"
#include "support/walks.hpp"

using namespace seq2act;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

KBSchema toy_schema_from_file() {
  std::ifstream in("data/geo_toy.schema");
  if (!in) fail(Errc::IoError, "run from the repository root: data/geo_toy.schema not found");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_schema(ss.str());
}

std::vector<RawExample> load_tsv(const std::string& path) { return read_corpus_tsv(path); }

// Shared between criteria 1 and 2: every corpus line and 1000 generated
// logical forms run the full conversion cycle once.
struct ConversionSweep {
  std::size_t total = 0;
  std::size_t round_trip_ok = 0;
  std::size_t graph_consistent = 0;
  double seconds = 0;
};

ConversionSweep run_conversion_sweep(const KBSchema& schema) {
  auto start = std::chrono::steady_clock::now();
  ConversionSweep sweep;
  std::vector<LogicalForm> forms;
  for (const char* path : {"data/geo_toy_train.tsv", "data/geo_toy_test.tsv"}) {
    for (const RawExample& ex : load_tsv(path)) forms.push_back(parse_lf(ex.logical_form, &schema));
  }
  Rng rng(424242);
  testsupport::LfGenerator gen(schema, rng, 4);
  for (int i = 0; i < 1000; ++i) forms.push_back(gen.generate());

  for (const LogicalForm& lf : forms) {
    ++sweep.total;
    std::string canonical = print_lf(lf, &schema);
    std::vector<Action> actions = lf_to_actions(lf, schema);
    LogicalForm back = actions_to_lf(actions, schema);
    if (print_lf(back) == canonical) ++sweep.round_trip_ok;
    if (graphs_isomorphic(build_graph(actions, schema), lf_to_graph(lf, &schema)))
      ++sweep.graph_consistent;
  }
  sweep.seconds = seconds_since(start);
  return sweep;
}

Outcome criterion_round_trip(const ConversionSweep& sweep) {
  std::ostringstream d;
  d << sweep.round_trip_ok << "/" << sweep.total << " identical after lf->actions->lf in "
    << sweep.seconds << " s";
  return {sweep.round_trip_ok == sweep.total && sweep.total >= 1250 && sweep.seconds < 10.0,
          d.str()};
}

Outcome criterion_graph_consistency(const ConversionSweep& sweep) {
  std::ostringstream d;
  d << sweep.graph_consistent << "/" << sweep.total << " isomorphic between direct and folded";
  return {sweep.graph_consistent == sweep.total, d.str()};
}

Outcome criterion_controller_soundness(const KBSchema& schema) {
  auto start = std::chrono::steady_clock::now();
  // Trimmed argument-label pool keeps the per-step vocabulary small.
  KBSchema trimmed = schema;
  trimmed.entity_type = {{"texas", "state"},  {"iowa", "state"},       {"austin", "city"},
                         {"boise", "city"},   {"rio_grande", "river"}, {"snake_river", "river"}};
  auto vocab = testsupport::vocabulary_for(trimmed, {"A", "B", "C"});

  const std::size_t walks = 10000;
  const unsigned threads = std::max(2u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> c1_done{0}, c1_ok{0}, c2_done{0}, c2_attempts{0}, violations{0};

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(900000 + i);
      auto walk = testsupport::random_legal_walk(trimmed, vocab, ConstraintLevel::C1, rng, 30);
      ++c1_done;
      if (!walk.completed) continue;
      SemanticGraph g = build_graph(walk.actions, trimmed);
      if (validate_wellformed(g).empty()) ++c1_ok;

      // One C1C2 walk per index for the semantic half; truncated attempts are
      // resampled a few times.
      for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng2(7700000 + i * 8 + static_cast<std::size_t>(attempt));
        ++c2_attempts;
        auto w2 = testsupport::random_legal_walk(trimmed, vocab, ConstraintLevel::C1C2, rng2, 30);
        if (!w2.completed) continue;
        SemanticGraph g2 = build_graph(w2.actions, trimmed);
        violations += semantic_violations(g2, trimmed).size();
        ++c2_done;
        break;
      }
    }
  };
  std::vector<std::future<void>> futs;
  std::size_t chunk = walks / threads + 1;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t b = t * chunk, e = std::min(walks, (t + 1) * chunk);
    if (b >= e) break;
    futs.push_back(std::async(std::launch::async, worker, b, e));
  }
  for (auto& f : futs) f.get();

  double secs = seconds_since(start);
  std::ostringstream d;
  d << c1_ok << "/" << c1_done << " C1 walks well-formed; " << c2_done << " C1C2 walks with "
    << violations << " semantic violations (" << c2_attempts << " attempts) in " << secs << " s";
  bool pass = c1_ok == walks && c1_done == walks && c2_done >= walks * 99 / 100 &&
              violations == 0 && secs < 30.0;
  return {pass, d.str()};
}

Outcome criterion_controller_oracle(const KBSchema& toy) {
  auto start = std::chrono::steady_clock::now();
  (void)toy;
  // Exhaustive enumeration needs a desk-scale sub-schema of the geography
  // domain: one type, one entity, one relation, one operation.
  const KBSchema& schema = testsupport::micro_schema();
  auto vocab = testsupport::vocabulary_for(schema, {"A", "B"});

  std::map<std::string, bool> memo;
  std::set<std::string> seen;
  std::vector<PartialGraphState> frontier{initial_state(schema)};
  seen.insert(testsupport::state_key(frontier[0]));
  std::size_t states = 0, checks = 0, disagreements = 0;

  // Process every state reachable within 8 actions, expanding up to depth 8.
  for (int depth = 0; depth <= 8 && !frontier.empty(); ++depth) {
    std::vector<PartialGraphState> next;
    for (const PartialGraphState& st : frontier) {
      ++states;
      for (const Action& a : vocab) {
        ++checks;
        bool controller = check_action(st, a, schema, ConstraintLevel::C1).allowed;
        bool oracle = testsupport::oracle_action_legal(st, a, schema, memo);
        if (controller != oracle) ++disagreements;
        if (controller && depth < 8) {
          PartialGraphState child = st;
          apply_action(child, a);
          if (seen.insert(testsupport::state_key(child)).second) next.push_back(child);
        }
      }
    }
    frontier = std::move(next);
  }
  std::ostringstream d;
  d << states << " reachable states, " << checks << " action checks, " << disagreements
    << " disagreements in " << seconds_since(start) << " s";
  return {disagreements == 0 && states > 20000, d.str()};
}

Outcome criterion_gradients(const KBSchema& schema) {
  auto start = std::chrono::steady_clock::now();
  std::vector<RawExample> raw{
      {"which states border texas", "answer(A,(state(A),next_to(A,stateid(texas))))"},
      {"how many states border iowa", "answer(A,count(B,(state(B),next_to(B,stateid(iowa))),A))"},
  };
  PreprocessedCorpus corpus = preprocess(raw, schema);
  ModelConfig cfg;
  cfg.hidden_size = 8;
  cfg.word_dim = 6;
  cfg.action_struct_dim = 4;
  cfg.action_sem_dim = 4;
  cfg.seed = 21;
  Rng rng(cfg.seed);
  ModelParameters params =
      ModelParameters::init(cfg, corpus.words.size(), corpus.actions.structure_parts.size(),
                            corpus.actions.semantic_parts.size(), corpus.actions.size(), rng);
  auto words = encode_words(corpus.words, corpus.examples[1].tokens);
  auto target = encode_target(corpus.actions, corpus.examples[1].actions);

  std::vector<Tensor*> blocks;
  params.for_each_block([&](const char*, Tensor& t) { blocks.push_back(&t); });
  std::vector<Tensor> analytic_store;
  auto run = [&](bool want) -> double {
    Tape tape;
    ModelHandles h = register_model(tape, params);
    Value loss = tape.scale(sequence_log_prob(tape, h, cfg, corpus.actions, words, target), -1.0);
    double v = tape.val(loss)[0];
    if (want) {
      tape.backward(loss);
      std::vector<Value> handles{h.word_embed, h.act_struct, h.act_sem, h.enc_fwd.wx,
                                 h.enc_fwd.wh, h.enc_fwd.b,  h.enc_bwd.wx, h.enc_bwd.wh,
                                 h.enc_bwd.b,  h.dec.wx,     h.dec.wh,     h.dec.b,
                                 h.w_init,     h.w_att,      h.w_out};
      analytic_store.clear();
      for (Value hv : handles) analytic_store.push_back(tape.grad(hv));
    }
    return v;
  };
  run(true);
  std::vector<const Tensor*> analytic;
  for (const Tensor& t : analytic_store) analytic.push_back(&t);
  Rng sample_rng(5005);
  GradCheckReport report =
      grad_check([&] { return run(false); }, blocks, analytic, 1e-5, sample_rng, 200);
  double secs = seconds_since(start);
  std::ostringstream d;
  d << "max relative error " << report.max_rel_error << " over " << report.coordinates
    << " coordinates in " << secs << " s";
  return {report.max_rel_error <= 1e-5 && report.coordinates >= 200 && secs < 60.0, d.str()};
}

Outcome criterion_normalization(const KBSchema& schema) {
  ActionVocab vocab;
  for (const Action& a : schema_actions(schema, {"A", "B"})) vocab.add(a);
  ModelConfig cfg;
  cfg.hidden_size = 12;
  cfg.word_dim = 8;
  cfg.action_struct_dim = 5;
  cfg.action_sem_dim = 5;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    ModelParameters params = ModelParameters::init(
        cfg, 9, vocab.structure_parts.size(), vocab.semantic_parts.size(), vocab.size(), rng);
    Tape tape;
    ModelHandles h = register_model(tape, params);
    std::vector<std::size_t> words;
    for (std::size_t i = 0; i < 1 + rng.below(6); ++i) words.push_back(rng.below(9));
    EncodedSentence enc = encode(tape, h, cfg, words);
    CellState st = decoder_initial_state(tape, enc, cfg.hidden_size);
    Value ctx = decode_step(tape, h, enc, st).context;
    std::size_t prev = ActionVocab::kBos;
    for (int j = 0; j < 5; ++j) {
      st = decode_advance(tape, h, vocab, st, ctx, prev);
      DecodeStep step = decode_step(tape, h, enc, st);
      ctx = step.context;
      const Tensor& attn = tape.val(step.attention);
      double asum = 0.0;
      for (double v : attn.data) asum += v;
      worst = std::max(worst, std::abs(asum - 1.0));
      Tensor dist = softmax(tape.val(step.logits));
      double dsum = 0.0;
      for (double v : dist.data) dsum += v;
      worst = std::max(worst, std::abs(dsum - 1.0));
      prev = rng.below(vocab.size());
    }
  }
  std::ostringstream d;
  d << "worst |sum - 1| = " << worst;
  return {worst <= 1e-12, d.str()};
}

Outcome criterion_end_to_end(const KBSchema& schema) {
  auto start = std::chrono::steady_clock::now();
  PreprocessedCorpus corpus = preprocess(load_tsv("data/geo_toy_train.tsv"), schema);
  ModelConfig cfg;  // defaults: 200 hidden units, 100-dim word vectors
  cfg.seed = 1;
  TrainSchedule schedule;  // 30 epochs, lr 0.1 halving every 5 epochs after 15
  TrainResult trained = train(cfg, schedule, corpus);
  Checkpoint ckpt{cfg, corpus.words, corpus.actions, corpus.schema, corpus.max_target_len,
                  std::move(trained.params)};

  auto evaluate_level = [&](ConstraintLevel level) {
    DecodeOptions opts;
    opts.beam_size = 5;
    opts.level = level;
    std::vector<std::string> preds, golds;
    for (const RawExample& ex : load_tsv("data/geo_toy_test.tsv")) {
      golds.push_back(ex.logical_form);
      try {
        preds.push_back(parse_sentence(ckpt, ex.utterance, opts).logical_form);
      } catch (const Error& e) {
        preds.push_back(std::string("<ERROR:") + errc_name(e.code()) + ">");
      }
    }
    return evaluate(preds, golds).accuracy;
  };
  double acc_constrained = evaluate_level(ConstraintLevel::C1C2);
  double acc_none = evaluate_level(ConstraintLevel::None);
  double secs = seconds_since(start);
  std::ostringstream d;
  d << "held-out accuracy c1c2 " << acc_constrained << ", unconstrained " << acc_none << " in "
    << secs << " s";
  return {acc_constrained >= 0.95 && acc_constrained >= acc_none && secs < 600.0, d.str()};
}

Outcome criterion_beam_argmax() {
  const KBSchema& schema = testsupport::micro_schema();
  std::vector<RawExample> raw{
      {"which states border texas", "answer(A,(state(A),next_to(A,stateid(texas))))"},
      {"how many states border texas",
       "answer(A,count(B,(state(B),next_to(B,stateid(texas))),A))"},
  };
  PreprocessedCorpus corpus = preprocess(raw, schema);
  ModelConfig cfg;
  cfg.hidden_size = 12;
  cfg.word_dim = 8;
  cfg.action_struct_dim = 4;
  cfg.action_sem_dim = 4;
  cfg.seed = 5;
  TrainSchedule sched;
  sched.epochs = 15;
  TrainResult r = train(cfg, sched, corpus);
  Checkpoint ckpt{cfg, corpus.words, corpus.actions, corpus.schema, corpus.max_target_len,
                  std::move(r.params)};

  InputReplacement input = replace_input(ckpt.schema, tokenize("which states border texas"));
  std::vector<std::size_t> word_ids = encode_words(ckpt.words, input.tokens);

  // Brute-force argmax over all C1-legal stop-ready sequences of length <= 6.
  double best_score = -1e300;
  std::vector<Action> best_seq;
  std::function<void(PartialGraphState&, std::vector<Action>&, std::size_t)> enumerate =
      [&](PartialGraphState& gs, std::vector<Action>& prefix, std::size_t depth) {
        if (check_stop(gs, ckpt.schema, ConstraintLevel::C1).allowed) {
          double score = rescore_tokens(ckpt, word_ids, prefix);
          if (score > best_score) {
            best_score = score;
            best_seq = prefix;
          }
        }
        if (depth == 6) return;
        for (std::size_t a = 2; a < ckpt.actions.size(); ++a) {
          const Action& action = ckpt.actions.action_of(a);
          if (!check_action(gs, action, ckpt.schema, ConstraintLevel::C1).allowed) continue;
          PartialGraphState child = gs;
          apply_action(child, action);
          prefix.push_back(action);
          enumerate(child, prefix, depth + 1);
          prefix.pop_back();
        }
      };
  PartialGraphState root = initial_state(ckpt.schema);
  std::vector<Action> prefix;
  enumerate(root, prefix, 0);

  DecodeOptions wide;
  wide.beam_size = 1000000;
  wide.level = ConstraintLevel::C1;
  wide.max_steps = 6;
  ParseResult wide_res = parse_sentence(ckpt, "which states border texas", wide);

  DecodeOptions one;
  one.beam_size = 1;
  one.level = ConstraintLevel::C1;
  ParseResult greedy = parse_sentence(ckpt, "which states border texas", one);
  DecodeOptions five = one;
  five.beam_size = 5;
  ParseResult beam5 = parse_sentence(ckpt, "which states border texas", five);

  bool argmax_ok =
      wide_res.actions == best_seq && std::abs(wide_res.log_prob - best_score) < 1e-9;
  bool monotone = beam5.log_prob >= greedy.log_prob - 1e-12;
  std::ostringstream d;
  d << "full-width beam " << (argmax_ok ? "matches" : "differs from")
    << " brute-force argmax (score " << wide_res.log_prob << "); beam5 >= beam1: "
    << (monotone ? "yes" : "no");
  return {argmax_ok && monotone && !best_seq.empty(), d.str()};
}

Outcome criterion_compactness(const KBSchema& schema) {
  std::vector<std::pair<std::string, std::size_t>> corpus;
  for (const char* path : {"data/geo_toy_train.tsv", "data/geo_toy_test.tsv"}) {
    for (const RawExample& ex : load_tsv(path)) {
      LogicalForm lf = parse_lf(ex.logical_form, &schema);
      corpus.emplace_back(print_lf(lf, &schema), lf_to_actions(lf, schema).size());
    }
  }
  LengthStats stats = length_stats(corpus);
  std::ostringstream d;
  d << "bundled corpus: mean lf tokens " << stats.mean_lf_tokens << ", mean actions "
    << stats.mean_action_tokens;
  bool pass = stats.mean_action_tokens < stats.mean_lf_tokens;

  // When real Geo data is supplied the reduction must land near the reported
  // 35.5 percent; the bundled corpus settles the direction either way.
  std::ifstream geo("data/geo880_train.tsv");
  if (geo) {
    std::vector<std::pair<std::string, std::size_t>> real;
    for (const RawExample& ex : read_corpus_tsv("data/geo880_train.tsv")) {
      try {
        LogicalForm lf = parse_lf(ex.logical_form);
        real.emplace_back(print_lf(lf), lf_to_actions(lf, schema).size());
      } catch (const Error&) {
      }
    }
    if (!real.empty()) {
      LengthStats rs = length_stats(real);
      double reduction = 100.0 * (1.0 - rs.mean_action_tokens / rs.mean_lf_tokens);
      d << "; user-supplied geo880 reduction " << reduction << "%";
      pass = pass && reduction >= 25.5 && reduction <= 45.5;
    }
  } else {
    d << " (no user-supplied geo880; direction checked on the bundled corpus)";
  }
  return {pass, d.str()};
}

Outcome criterion_lr_schedule() {
  TrainSchedule sched;
  bool ok = true;
  std::vector<std::pair<std::size_t, double>> expectations = {
      {1, 0.1},    {8, 0.1},    {15, 0.1},    {16, 0.05},   {20, 0.05},
      {21, 0.025}, {25, 0.025}, {26, 0.0125}, {30, 0.0125}};
  for (const auto& [epoch, lr] : expectations) ok = ok && sched.lr_at(epoch) == lr;
  // The trace recorded by an actual run matches the rule.
  const KBSchema& schema = testsupport::micro_schema();
  PreprocessedCorpus corpus = preprocess(
      {{"which states border texas", "answer(A,(state(A),next_to(A,stateid(texas))))"}}, schema);
  ModelConfig cfg;
  cfg.hidden_size = 4;
  cfg.word_dim = 3;
  cfg.action_struct_dim = 2;
  cfg.action_sem_dim = 2;
  TrainResult r = train(cfg, sched, corpus);
  ok = ok && r.metrics.size() == 30;
  for (const EpochMetrics& m : r.metrics) ok = ok && m.learning_rate == sched.lr_at(m.epoch);
  return {ok, "lr trace 0.1 (1-15), 0.05 (16-20), 0.025 (21-25), 0.0125 (26-30)"};
}

Outcome criterion_checkpoint(const KBSchema& schema) {
  PreprocessedCorpus corpus = preprocess(
      {{"which states border texas", "answer(A,(state(A),next_to(A,stateid(texas))))"},
       {"what cities are in texas", "answer(A,(city(A),loc(A,stateid(texas))))"}},
      schema);
  ModelConfig cfg;
  cfg.hidden_size = 6;
  cfg.word_dim = 4;
  cfg.action_struct_dim = 3;
  cfg.action_sem_dim = 3;
  TrainSchedule sched;
  sched.epochs = 2;
  TrainResult r = train(cfg, sched, corpus);
  Checkpoint ckpt{cfg, corpus.words, corpus.actions, corpus.schema, corpus.max_target_len,
                  std::move(r.params)};

  const std::string p1 = "build/acceptance_ckpt1.bin", p2 = "build/acceptance_ckpt2.bin";
  save_checkpoint(ckpt, p1);
  Checkpoint loaded = load_checkpoint(p1);
  save_checkpoint(loaded, p2);
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  std::string b1 = slurp(p1), b2 = slurp(p2);
  bool identical = !b1.empty() && b1 == b2;

  std::string corrupted = b1;
  corrupted[b1.size() / 2] = static_cast<char>(corrupted[b1.size() / 2] ^ 0x77);
  std::ofstream(p2, std::ios::binary)
      .write(corrupted.data(), static_cast<std::streamsize>(corrupted.size()));
  bool rejected = false;
  try {
    load_checkpoint(p2);
  } catch (const Error& e) {
    rejected = e.code() == Errc::CorruptCheckpoint;
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
  std::ostringstream d;
  d << "save->load->save " << (identical ? "bit-identical" : "differs") << ", corruption "
    << (rejected ? "rejected" : "accepted");
  return {identical && rejected, d.str()};
}

}  // namespace

int main() {
  KBSchema schema;
  try {
    schema = toy_schema_from_file();
  } catch (const Error& e) {
    std::cerr << "setup failure: " << e.what() << "\n";
    return 2;
  }

  ConversionSweep sweep;
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"round-trip conversion",
       [&] {
         sweep = run_conversion_sweep(schema);
         return criterion_round_trip(sweep);
       }},
      {"graph consistency", [&] { return criterion_graph_consistency(sweep); }},
      {"controller soundness", [&] { return criterion_controller_soundness(schema); }},
      {"controller oracle equivalence", [&] { return criterion_controller_oracle(schema); }},
      {"gradient correctness", [&] { return criterion_gradients(schema); }},
      {"attention and softmax normalization", [&] { return criterion_normalization(schema); }},
      {"toy end-to-end accuracy", [&] { return criterion_end_to_end(schema); }},
      {"beam search argmax", [] { return criterion_beam_argmax(); }},
      {"compactness", [&] { return criterion_compactness(schema); }},
      {"learning-rate schedule", [] { return criterion_lr_schedule(); }},
      {"checkpoint integrity", [&] { return criterion_checkpoint(schema); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " ("
              << criteria[i].first << "): " << outcome.detail << "\n";
    std::cout.flush();
    failures += outcome.pass ? 0 : 1;
  }
  std::cout << (failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED") << " ("
            << (criteria.size() - failures) << "/" << criteria.size() << ")\n";
  return failures == 0 ? 0 : 1;
}

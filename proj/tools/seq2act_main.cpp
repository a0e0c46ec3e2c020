// Command-line front end: convert corpora between logical forms and action
// sequences, validate them against a schema, train the parser, run
// constrained beam-search inference and score predictions.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "seq2act/convert.hpp"
#include "seq2act/decoder.hpp"
#include "seq2act/evaluator.hpp"
#include "seq2act/postcheck.hpp"
#include "seq2act/trainer.hpp"

using namespace seq2act;
using nlohmann::json;

namespace {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("SEQ2ACT_LOG");
  if (!env) return LogLevel::Quiet;
  std::string v = env;
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  return LogLevel::Quiet;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[seq2act] " << msg << "\n";
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << what << " file '" << path << "'\n";
    std::exit(2);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KBSchema load_schema_file(const std::string& path) {
  std::string text = read_file(path, "schema");
  try {
    return load_schema(text);
  } catch (const Error& e) {
    std::cerr << "error: schema '" << path << "': " << e.what() << "\n";
    std::exit(2);
  }
}

std::vector<std::string> read_lines(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << what << " file '" << path << "'\n";
    std::exit(2);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    std::exit(2);
  }
  return out;
}

ConstraintLevel parse_level(const std::string& name) {
  if (name == "none") return ConstraintLevel::None;
  if (name == "c1") return ConstraintLevel::C1;
  if (name == "c1c2") return ConstraintLevel::C1C2;
  std::cerr << "error: unknown constraint level '" << name << "'\n";
  std::exit(2);
}

// ---------------------------------------------------------------------------

int cmd_convert(const std::string& schema_path, const std::string& corpus_path,
                const std::string& direction, const std::string& out_path) {
  KBSchema schema = load_schema_file(schema_path);
  std::vector<std::string> lines = read_lines(corpus_path, "corpus");
  std::ostringstream out;
  int errors = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) {
      std::cerr << "line " << (i + 1) << ": empty line\n";
      ++errors;
      continue;
    }
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      std::cerr << "line " << (i + 1) << ": ParseError: expected a TAB separator\n";
      ++errors;
      continue;
    }
    std::string utterance = line.substr(0, tab);
    std::string payload = line.substr(tab + 1);
    try {
      if (direction == "actions") {
        LogicalForm lf = parse_lf(payload, &schema);
        out << utterance << "\t" << actions_to_text(lf_to_actions(lf, schema)) << "\n";
      } else {
        std::vector<Action> actions = actions_from_text(payload);
        out << utterance << "\t" << print_lf(actions_to_lf(actions, schema)) << "\n";
      }
    } catch (const Error& e) {
      std::cerr << "line " << (i + 1) << ": " << e.what() << "\n";
      ++errors;
    }
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    open_output(out_path) << out.str();
  }
  return errors ? 1 : 0;
}

int cmd_validate(const std::string& schema_path, const std::string& corpus_path,
                 bool predictions) {
  KBSchema schema = load_schema_file(schema_path);
  std::vector<std::string> lines = read_lines(corpus_path, "input");
  int errors = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string lf_text = lines[i];
    std::size_t tab = lf_text.find('\t');
    if (tab != std::string::npos)
      lf_text = predictions ? lf_text.substr(0, tab) : lf_text.substr(tab + 1);
    try {
      LogicalForm lf = parse_lf(lf_text, &schema);
      SemanticGraph g = lf_to_graph(lf, &schema);
      for (const Violation& v : validate_wellformed(g)) {
        std::cerr << "line " << (i + 1) << ": " << violation_kind_name(v.kind) << ": "
                  << v.detail << "\n";
        ++errors;
      }
      for (const std::string& v : semantic_violations(g, schema)) {
        std::cerr << "line " << (i + 1) << ": " << v << "\n";
        ++errors;
      }
    } catch (const Error& e) {
      std::cerr << "line " << (i + 1) << ": " << e.what() << "\n";
      ++errors;
    }
  }
  std::cout << lines.size() << " lines, " << errors << " problems\n";
  return errors ? 1 : 0;
}

int cmd_train(const std::string& schema_path, const std::string& corpus_path,
              const std::string& out_path, const std::string& metrics_path, ModelConfig cfg,
              TrainSchedule schedule) {
  KBSchema schema = load_schema_file(schema_path);
  std::vector<RawExample> raw;
  try {
    raw = read_corpus_tsv(corpus_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::IoError ? 2 : 1;
  }
  try {
    log_info("preprocessing " + std::to_string(raw.size()) + " examples");
    PreprocessedCorpus corpus = preprocess(raw, schema);
    log_info("word vocab " + std::to_string(corpus.words.size()) + ", action vocab " +
             std::to_string(corpus.actions.size()));
    json metrics_json;
    metrics_json["epochs"] = json::array();
    TrainResult result = train(cfg, schedule, corpus, [&](const EpochMetrics& m) {
      log_info("epoch " + std::to_string(m.epoch) + " lr " + std::to_string(m.learning_rate) +
               " loss " + std::to_string(m.mean_neg_log_prob));
      metrics_json["epochs"].push_back({{"epoch", m.epoch},
                                        {"lr", m.learning_rate},
                                        {"mean_neg_log_prob", m.mean_neg_log_prob}});
    });
    Checkpoint ckpt{cfg, corpus.words, corpus.actions, corpus.schema, corpus.max_target_len,
                    std::move(result.params)};
    save_checkpoint(ckpt, out_path);
    std::string mpath = metrics_path.empty() ? out_path + ".metrics.json" : metrics_path;
    open_output(mpath) << metrics_json.dump(2) << "\n";
    std::cout << "checkpoint written to " << out_path << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_parse(const std::string& ckpt_path, const std::string& input_path,
              const std::string& out_path, const std::string& level_name, std::size_t beam,
              bool explain) {
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(ckpt_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  DecodeOptions opts;
  opts.beam_size = beam;
  opts.level = parse_level(level_name);
  opts.explain = explain;

  std::vector<std::string> lines = read_lines(input_path, "input");
  std::ostringstream out;
  std::ostringstream explain_out;
  int errors = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string sentence = lines[i];
    std::size_t tab = sentence.find('\t');
    if (tab != std::string::npos) sentence = sentence.substr(0, tab);  // TSV input: first column
    try {
      ParseResult res = parse_sentence(ckpt, sentence, opts);
      std::ostringstream score;
      score.precision(17);
      score << res.log_prob;
      out << res.logical_form << "\t" << score.str() << "\n";
      if (explain) {
        for (const StepDiagnostics& d : res.diagnostics) {
          json j;
          j["line"] = i + 1;
          j["step"] = d.step;
          j["kept"] = json::array();
          for (const auto& [text, s] : d.expanded) j["kept"].push_back({text, s});
          j["filtered"] = json::array();
          for (const auto& [text, rule] : d.filtered) j["filtered"].push_back({text, rule});
          j["attention"] = d.attention;
          explain_out << j.dump() << "\n";
        }
      }
      log_info("line " + std::to_string(i + 1) + " -> " + res.logical_form);
    } catch (const Error& e) {
      out << "<ERROR:" << errc_name(e.code()) << ">\t0\n";
      std::cerr << "line " << (i + 1) << ": " << e.what() << "\n";
      ++errors;
    }
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    open_output(out_path) << out.str();
    if (explain) open_output(out_path + ".explain.jsonl") << explain_out.str();
  }
  return errors ? 1 : 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path,
             const std::string& out_path) {
  std::vector<std::string> pred_lines = read_lines(pred_path, "predictions");
  std::vector<std::string> gold_lines = read_lines(gold_path, "gold");
  std::vector<std::string> preds, golds;
  for (const auto& line : pred_lines) {
    std::size_t tab = line.find('\t');
    preds.push_back(tab == std::string::npos ? line : line.substr(0, tab));
  }
  for (const auto& line : gold_lines) {
    std::size_t tab = line.find('\t');
    golds.push_back(tab == std::string::npos ? line : line.substr(tab + 1));
  }
  try {
    EvalReport report = evaluate(preds, golds);
    std::cout << render_report_table(report);
    json j;
    j["total"] = report.total;
    j["correct"] = report.correct;
    j["accuracy"] = report.accuracy;
    j["string_correct"] = report.string_correct;
    j["string_accuracy"] = report.string_accuracy;
    j["mean_lf_tokens"] = report.mean_lf_tokens;
    j["verdicts"] = json::array();
    for (const auto& v : report.verdicts) {
      j["verdicts"].push_back({{"semantic_match", v.semantic_match},
                               {"string_match", v.string_match},
                               {"error", v.error}});
    }
    if (!out_path.empty()) open_output(out_path) << j.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-to-action semantic parsing toolkit"};
  app.require_subcommand(1);

  std::string schema_path, corpus_path, out_path, metrics_path, ckpt_path, input_path;
  std::string direction = "actions", level = "c1c2", pred_path, gold_path;
  std::size_t beam = 5;
  bool explain = false, predictions = false;
  ModelConfig cfg;
  TrainSchedule schedule;
  double lr = 0.1;

  CLI::App* convert = app.add_subcommand("convert", "convert between logical forms and actions");
  convert->add_option("--schema", schema_path, "schema file")->required();
  convert->add_option("--to", direction, "target representation: actions or lf")
      ->check(CLI::IsMember({"actions", "lf"}));
  convert->add_option("--out", out_path, "output file (stdout if omitted)");
  convert->add_option("corpus", corpus_path, "TSV corpus file")->required();

  CLI::App* validate = app.add_subcommand("validate", "validate logical forms against a schema");
  validate->add_option("--schema", schema_path, "schema file")->required();
  validate->add_flag("--predictions", predictions, "input is a predictions file (lf<TAB>score)");
  validate->add_option("corpus", corpus_path, "TSV corpus or predictions file")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--schema", schema_path, "schema file")->required();
  train_cmd->add_option("--corpus", corpus_path, "training TSV")->required();
  train_cmd->add_option("--out", out_path, "checkpoint path")->required();
  train_cmd->add_option("--metrics", metrics_path, "metrics JSON path");
  train_cmd->add_option("--epochs", schedule.epochs, "training epochs");
  train_cmd->add_option("--lr", lr, "initial learning rate");
  train_cmd->add_option("--seed", cfg.seed, "random seed");
  train_cmd->add_option("--hidden", cfg.hidden_size, "hidden units");
  train_cmd->add_option("--word-dim", cfg.word_dim, "word embedding width");
  train_cmd->add_option("--struct-dim", cfg.action_struct_dim, "structure-part embedding width");
  train_cmd->add_option("--sem-dim", cfg.action_sem_dim, "semantic-part embedding width");

  CLI::App* parse_cmd = app.add_subcommand("parse", "parse sentences with a trained model");
  parse_cmd->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
  parse_cmd->add_option("--level", level, "constraint level: none, c1 or c1c2")
      ->check(CLI::IsMember({"none", "c1", "c1c2"}));
  parse_cmd->add_option("--beam", beam, "beam size");
  parse_cmd->add_option("--out", out_path, "predictions file (stdout if omitted)");
  parse_cmd->add_flag("--explain", explain, "write per-step pruning diagnostics");
  parse_cmd->add_option("input", input_path, "sentences, one per line (TSV: first column)")
      ->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "score predictions against gold logical forms");
  eval_cmd->add_option("--predictions", pred_path, "predictions file")->required();
  eval_cmd->add_option("--gold", gold_path, "gold TSV corpus")->required();
  eval_cmd->add_option("--out", out_path, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  schedule.initial_lr = lr;
  if (convert->parsed()) return cmd_convert(schema_path, corpus_path, direction, out_path);
  if (validate->parsed()) return cmd_validate(schema_path, corpus_path, predictions);
  if (train_cmd->parsed())
    return cmd_train(schema_path, corpus_path, out_path, metrics_path, cfg, schedule);
  if (parse_cmd->parsed())
    return cmd_parse(ckpt_path, input_path, out_path, level, beam, explain);
  if (eval_cmd->parsed()) return cmd_eval(pred_path, gold_path, out_path);
  return 2;
}

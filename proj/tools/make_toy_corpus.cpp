// Generates the bundled toy geography corpus: utterance/logical-form pairs
// over data/geo_toy.schema, written as TSV train/test splits. Deterministic;
// every emitted logical form is canonical, strict-parsed and round-trips
// through the action conversion before it is written.

#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "seq2act/convert.hpp"
#include "seq2act/evaluator.hpp"
#include "seq2act/rng.hpp"
#include "seq2act/schema.hpp"

using namespace seq2act;

namespace {

struct Template {
  std::vector<std::string> surfaces;  // utterance patterns with {s}/{c}/{r} slots
  std::string lf;                     // logical-form pattern with the same slots
};

const std::vector<Template> kTemplates = {
    {{"which states border {s}", "what states border {s}", "states that border {s}"},
     "answer(A,(state(A),next_to(A,stateid({s}))))"},
    {{"what cities are in {s}", "which cities are located in {s}", "cities in {s}"},
     "answer(A,(city(A),loc(A,stateid({s}))))"},
    {{"what is the capital of {s}", "name the capital of {s}"},
     "answer(A,(city(A),capital(A,stateid({s}))))"},
    {{"which rivers run through {s}", "what rivers traverse {s}"},
     "answer(A,(river(A),traverses(A,stateid({s}))))"},
    {{"how many states border {s}", "number of states bordering {s}"},
     "answer(A,count(B,(state(B),next_to(B,stateid({s}))),A))"},
    {{"how many cities are in {s}"},
     "answer(A,count(B,(city(B),loc(B,stateid({s}))),A))"},
    {{"how many rivers run through {s}"},
     "answer(A,count(B,(river(B),traverses(B,stateid({s}))),A))"},
    {{"which states do not border {s}", "what states do not border {s}"},
     "answer(A,(state(A),not(next_to(A,stateid({s})))))"},
    {{"which state borders the most states"},
     "answer(A,most(A,B,(state(A),next_to(A,B),state(B))))"},
    {{"which river runs through the most states"},
     "answer(A,most(A,B,(river(A),traverses(A,B),state(B))))"},
    {{"what cities are in states that border {s}"},
     "answer(A,(city(A),loc(A,B),state(B),next_to(B,stateid({s}))))"},
    {{"which rivers run through states that border {s}"},
     "answer(A,(river(A),traverses(A,B),state(B),next_to(B,stateid({s}))))"},
    {{"which states border states that border {s}"},
     "answer(A,(state(A),next_to(A,B),state(B),next_to(B,stateid({s}))))"},
    {{"what is the total area of states that border {s}"},
     "answer(A,sum(B,C,(state(C),next_to(C,stateid({s})),area(C,B)),A))"},
    {{"what is the area of {s}"}, "answer(A,area(stateid({s}),A))"},
    {{"what is the population of {c}"}, "answer(A,population(cityid({c}),A))"},
    {{"in which state is {c}", "where is {c}"}, "answer(A,(state(A),loc(cityid({c}),A)))"},
    {{"which states does the {r} run through", "what states does the {r} traverse"},
     "answer(A,(state(A),traverses(riverid({r}),A)))"},
};

std::string fill(std::string text, const std::string& slot, const std::string& value) {
  std::size_t pos;
  while ((pos = text.find(slot)) != std::string::npos) text.replace(pos, slot.size(), value);
  return text;
}

std::string spaced(const std::string& entity) {
  std::string out = entity;
  for (char& c : out)
    if (c == '_') c = ' ';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::string schema_path = argc > 1 ? argv[1] : "data/geo_toy.schema";
  std::string train_path = argc > 2 ? argv[2] : "data/geo_toy_train.tsv";
  std::string test_path = argc > 3 ? argv[3] : "data/geo_toy_test.tsv";

  std::ifstream schema_in(schema_path);
  if (!schema_in) {
    std::cerr << "cannot open " << schema_path << "\n";
    return 2;
  }
  std::string schema_text((std::istreambuf_iterator<char>(schema_in)),
                          std::istreambuf_iterator<char>());
  KBSchema schema = load_schema(schema_text);

  std::vector<std::string> states, cities, rivers;
  for (const auto& [name, type] : schema.entity_type) {
    if (type == "state") states.push_back(name);
    if (type == "city") cities.push_back(name);
    if (type == "river") rivers.push_back(name);
  }

  // Expand every template against every slot filler and surface variant.
  struct Pair {
    std::string utterance, lf;
    std::size_t template_id;
  };
  std::vector<Pair> pool;
  for (std::size_t t = 0; t < kTemplates.size(); ++t) {
    const Template& tpl = kTemplates[t];
    const bool has_s = tpl.lf.find("{s}") != std::string::npos;
    const bool has_c = tpl.lf.find("{c}") != std::string::npos;
    const bool has_r = tpl.lf.find("{r}") != std::string::npos;
    std::vector<std::string> fillers{""};
    std::string slot;
    if (has_s) {
      fillers = states;
      slot = "{s}";
    } else if (has_c) {
      fillers = cities;
      slot = "{c}";
    } else if (has_r) {
      fillers = rivers;
      slot = "{r}";
    }
    for (const std::string& entity : fillers) {
      for (const std::string& surface : tpl.surfaces) {
        std::string utterance =
            slot.empty() ? surface : fill(surface, slot, spaced(entity));
        std::string lf = slot.empty() ? tpl.lf : fill(tpl.lf, slot, entity);
        // Canonicalize and verify the full conversion cycle.
        LogicalForm parsed = parse_lf(lf, &schema);
        std::string canonical = print_lf(parsed, &schema);
        std::vector<Action> actions = lf_to_actions(parsed, schema);
        if (!graphs_isomorphic(build_graph(actions, schema), lf_to_graph(parsed, &schema))) {
          std::cerr << "conversion mismatch for: " << lf << "\n";
          return 1;
        }
        pool.push_back({utterance, canonical, t});
      }
    }
  }

  Rng rng(20180707);
  rng.shuffle(pool);

  // 200 train / 50 test; every template must appear in training.
  const std::size_t train_n = 200, test_n = 50;
  if (pool.size() < train_n + test_n) {
    std::cerr << "pool too small: " << pool.size() << "\n";
    return 1;
  }
  std::vector<Pair> train(pool.begin(), pool.begin() + train_n);
  std::vector<Pair> test(pool.begin() + train_n, pool.begin() + train_n + test_n);
  std::set<std::size_t> train_templates;
  for (const auto& p : train) train_templates.insert(p.template_id);
  for (auto& p : test) {
    if (train_templates.count(p.template_id)) continue;
    // Swap with a training example whose template is redundant there.
    for (auto& q : train) {
      std::size_t qt = q.template_id;
      std::size_t count = 0;
      for (const auto& r : train) count += r.template_id == qt;
      if (count > 1) {
        std::swap(p, q);
        train_templates.insert(q.template_id);
        break;
      }
    }
  }

  auto write = [](const std::string& path, const std::vector<Pair>& rows) {
    std::ofstream out(path, std::ios::trunc);
    for (const auto& r : rows) out << r.utterance << "\t" << r.lf << "\n";
    std::cout << path << ": " << rows.size() << " examples\n";
  };
  write(train_path, train);
  write(test_path, test);

  std::vector<std::pair<std::string, std::size_t>> lengths;
  for (const auto& p : pool)
    lengths.emplace_back(p.lf, lf_to_actions(parse_lf(p.lf), schema).size());
  LengthStats stats = length_stats(lengths);
  std::cout << "mean lf tokens " << stats.mean_lf_tokens << ", mean actions "
            << stats.mean_action_tokens << "\n";
  return 0;
}

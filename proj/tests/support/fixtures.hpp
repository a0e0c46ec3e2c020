#pragma once

#include <string>

#include "seq2act/schema.hpp"

namespace testsupport {

// The toy geography schema used across the test suite; mirrors
// data/geo_toy.schema.
inline const char* kToySchemaText = R"(# toy geography domain
type state
type city
type river
type num
entity texas : state
entity iowa : state
entity ohio : state
entity utah : state
entity idaho : state
entity oregon : state
entity nevada : state
entity georgia : state
entity montana : state
entity colorado : state
entity virginia : state
entity vermont : state
entity austin : city
entity boise : city
entity denver : city
entity salem : city
entity atlanta : city
entity helena : city
entity rio_grande : river
entity snake_river : river
entity red_river : river
entity gila_river : river
relation next_to(state, state)
relation loc(city, state)
relation capital(city, state)
relation traverses(river, state)
relation area(state, num)
relation population(city, num)
operation count(arg-for, arg-return)
operation most(arg-for, arg-for)
operation sum(arg-for, arg-in, arg-return)
operation not()
)";

inline const seq2act::KBSchema& toy_schema() {
  static const seq2act::KBSchema schema = seq2act::load_schema(kToySchemaText);
  return schema;
}

// A deliberately tiny schema for exhaustive state-space tests.
inline const char* kMicroSchemaText = R"(type state
entity texas : state
relation next_to(state, state)
operation count(arg-for, arg-return)
)";

inline const seq2act::KBSchema& micro_schema() {
  static const seq2act::KBSchema schema = seq2act::load_schema(kMicroSchemaText);
  return schema;
}

}  // namespace testsupport

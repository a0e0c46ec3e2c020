#include <catch2/catch_amalgamated.hpp>

#include "seq2act/convert.hpp"
#include "seq2act/logical_form.hpp"
#include "support/fixtures.hpp"

using namespace seq2act;
using testsupport::toy_schema;

namespace {
const char* kBorderTexas = "answer(A,(state(A),next_to(A,stateid(texas))))";
const char* kCountIowa = "answer(A,count(B,(const(C,stateid(iowa)),next_to(C,B),state(B)),A))";
}  // namespace

TEST_CASE("parse_lf reads the running example") {
  LogicalForm lf = parse_lf(kBorderTexas);
  CHECK(lf.answer_var == "A");
  REQUIRE(lf.body.size() == 2);
  const auto* tp = std::get_if<LfTypePred>(&lf.body[0].node);
  REQUIRE(tp);
  CHECK(tp->type == "state");
  const auto* rp = std::get_if<LfRelationPred>(&lf.body[1].node);
  REQUIRE(rp);
  CHECK(rp->relation == "next_to");
  const auto* ent = std::get_if<LfEntity>(&rp->arg2);
  REQUIRE(ent);
  CHECK(ent->type == "state");
  CHECK(ent->name == "texas");
}

TEST_CASE("parse_lf reads aggregation queries") {
  LogicalForm lf = parse_lf(kCountIowa);
  REQUIRE(lf.body.size() == 1);
  const auto* op = std::get_if<LfOperatorApp>(&lf.body[0].node);
  REQUIRE(op);
  CHECK(op->op == "count");
  CHECK(op->leading_vars == std::vector<std::string>{"B"});
  REQUIRE(op->return_var.has_value());
  CHECK(*op->return_var == "A");
  REQUIRE(op->body.size() == 3);
  CHECK(std::holds_alternative<LfConstPred>(op->body[0].node));
}

TEST_CASE("parse_lf reports syntax errors with position") {
  auto code = [](const std::string& text) {
    try {
      parse_lf(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  CHECK(code("answer(A,") == Errc::SyntaxError);
  CHECK(code("answer(A)") == Errc::SyntaxError);
  CHECK(code("ask(A,state(A))") == Errc::SyntaxError);
  CHECK(code("answer(A,state(A)) trailing") == Errc::SyntaxError);
  CHECK(code("answer(A,state(texas))") == Errc::SyntaxError);  // bare entity argument
  CHECK(code("answer(A,most(A,B,(state(A)),(state(B))))") == Errc::SyntaxError);
}

TEST_CASE("strict parsing validates symbols against the schema") {
  CHECK_NOTHROW(parse_lf(kBorderTexas, &toy_schema()));
  auto strict_code = [](const std::string& text) {
    try {
      parse_lf(text, &testsupport::toy_schema());
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  CHECK(strict_code("answer(A,(state(A),next_to(A,stateid(atlantis))))") == Errc::UnknownSymbol);
  CHECK(strict_code("answer(A,(realm(A)))") == Errc::UnknownSymbol);
  CHECK(strict_code("answer(A,(state(A),borders(A,stateid(texas))))") == Errc::UnknownSymbol);
  CHECK(strict_code("answer(A,(state(A),next_to(A,cityid(texas))))") == Errc::UnknownSymbol);
  CHECK(strict_code("answer(A,count(B,C,(state(B)),A))") == Errc::ArityViolation);
}

TEST_CASE("print_lf is the identity on canonical text") {
  for (const char* text : {kBorderTexas, kCountIowa}) {
    LogicalForm lf = parse_lf(text);
    CHECK(print_lf(lf) == text);
  }
}

TEST_CASE("print_lf canonicalizes conjunct order") {
  // Same query with permuted conjuncts and odd variable names.
  LogicalForm permuted = parse_lf("answer(Q,(next_to(Q,stateid(texas)),state(Q)))");
  CHECK(print_lf(permuted) == kBorderTexas);
}

TEST_CASE("print_lf canonicalizes variable names in discovery order") {
  LogicalForm lf = parse_lf("answer(Z,(state(Z),next_to(Z,Y),state(Y)))");
  CHECK(print_lf(lf) == "answer(A,(state(A),next_to(A,B),state(B)))");
}

TEST_CASE("single-term bodies print without wrapping parens") {
  LogicalForm lf = parse_lf("answer(A,state(A))");
  CHECK(print_lf(lf) == "answer(A,state(A))");
  LogicalForm wrapped = parse_lf("answer(A,(state(A)))");
  CHECK(print_lf(wrapped) == "answer(A,state(A))");
}

TEST_CASE("role-free operators parse and print") {
  std::string text = "answer(A,(state(A),not(next_to(A,stateid(texas)))))";
  LogicalForm lf = parse_lf(text, &toy_schema());
  CHECK(print_lf(lf) == text);
}

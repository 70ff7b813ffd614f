#include <random>
#include <string>

#include "doctest.h"
#include "pimolap/query.hpp"
#include "support.hpp"

using namespace pimolap;

TEST_CASE("full grammar") {
  const QueryIR q = parse_query(
      "select sum(extendedprice * discount), count(*), avg(quantity + 1)\n"
      "from lineorder\n"
      "where date.year = 1993 and not (discount between 1 and 3) or quantity < -2\n"
      "group by date.year, part.brand");
  REQUIRE(q.aggregates.size() == 3);
  CHECK(q.aggregates[0].kind == AggKind::kSum);
  CHECK(q.aggregates[0].arg->kind == ArithExpr::Kind::kMul);
  CHECK(q.aggregates[1].kind == AggKind::kCount);
  CHECK_FALSE(q.aggregates[1].arg.has_value());
  CHECK(q.aggregates[2].arg->kind == ArithExpr::Kind::kAdd);
  CHECK(q.relation == "lineorder");
  CHECK(q.group_by == std::vector<std::string>{"date.year", "part.brand"});
  // OR binds loosest, NOT binds tighter than AND, BETWEEN is a >= / <= pair.
  REQUIRE(q.predicate.kind == PredicateExpr::Kind::kOr);
  const auto& left = q.predicate.children[0];
  REQUIRE(left.kind == PredicateExpr::Kind::kAnd);
  CHECK(left.children[1].kind == PredicateExpr::Kind::kNot);
  const auto& between = left.children[1].children[0];
  REQUIRE(between.kind == PredicateExpr::Kind::kAnd);
  CHECK(between.children[0].cmp.op == CmpOp::kGe);
  CHECK(between.children[1].cmp.op == CmpOp::kLe);
  CHECK(std::get<std::int64_t>(q.predicate.children[1].cmp.rhs) == -2);
}

TEST_CASE("multiplication binds tighter than addition") {
  const QueryIR q = parse_query("SELECT SUM(a + b * 3) FROM r");
  const ArithExpr& e = *q.aggregates[0].arg;
  REQUIRE(e.kind == ArithExpr::Kind::kAdd);
  CHECK(e.children[1].kind == ArithExpr::Kind::kMul);
}

TEST_CASE("attribute on the right-hand side") {
  const QueryIR q = parse_query("SELECT COUNT(*) FROM r WHERE a <> b");
  CHECK(q.predicate.cmp.op == CmpOp::kNe);
  CHECK(std::get<std::string>(q.predicate.cmp.rhs) == "b");
}

TEST_CASE("errors carry offset, expectation and the offending line") {
  struct Case {
    const char* text;
    std::size_t offset;
    const char* expected;
  };
  const Case cases[] = {
      {"SELECT FROM r", 7, "aggregate"},
      {"SELECT SUM(a FROM r", 13, ")"},
      {"SELECT SUM(a) r", 14, "FROM"},
      {"SELECT SUM(a) FROM r WHERE a <", 30, "integer"},
      {"SELECT SUM(a) FROM r WHERE", 26, "attribute"},
      {"SELECT SUM(a) FROM select", 19, "relation"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    try {
      parse_query(c.text);
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.offset() == c.offset);
      CHECK(e.expected().find(c.expected) != std::string::npos);
      CHECK(e.excerpt() == c.text);
    }
  }
}

TEST_CASE("excerpt is the line holding the error") {
  try {
    parse_query("SELECT SUM(a)\nFROM r\nWHERE a < < 3");
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.excerpt() == "WHERE a < < 3");
    CHECK(std::string(e.what()).find("offset 31") != std::string::npos);
  }
}

TEST_CASE("integer overflow is a parse error") {
  CHECK_THROWS_AS(parse_query("SELECT COUNT(*) FROM r WHERE a < 99999999999999999999"), ParseError);
  CHECK_NOTHROW(parse_query("SELECT COUNT(*) FROM r WHERE a > -9223372036854775808"));
}

TEST_CASE("nesting limit") {
  std::string deep = "SELECT COUNT(*) FROM r WHERE ";
  for (int i = 0; i < 300; ++i) deep += "(";
  deep += "a = 1";
  for (int i = 0; i < 300; ++i) deep += ")";
  CHECK_THROWS_AS(parse_query(deep), ParseError);
  std::string ok = "SELECT COUNT(*) FROM r WHERE ";
  for (int i = 0; i < 50; ++i) ok += "(";
  ok += "a = 1";
  for (int i = 0; i < 50; ++i) ok += ")";
  CHECK_NOTHROW(parse_query(ok));
}

TEST_CASE("round trip: parse(to_string(q)) == q on random queries") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    const Table t = testkit::random_table(rng, 0);
    const QueryIR q = testkit::random_query(rng, t);
    const std::string text = q.to_string();
    CAPTURE(text);
    CHECK(parse_query(text) == q);
  }
}

TEST_CASE("fuzz: mutated queries either parse or raise ParseError") {
  std::mt19937_64 rng(17);
  const std::string alphabet = "()*+,-<>=! abz019.SELECTFROMWHEREANDORNOT\n\t";
  for (int i = 0; i < 3000; ++i) {
    const Table t = testkit::random_table(rng, 0);
    std::string text = testkit::random_query(rng, t).to_string();
    const int edits = static_cast<int>(testkit::uniform(rng, 1, 4));
    for (int e = 0; e < edits && !text.empty(); ++e) {
      const auto pos = static_cast<std::size_t>(testkit::uniform(rng, 0, static_cast<std::int64_t>(text.size()) - 1));
      const char c = alphabet[static_cast<std::size_t>(testkit::uniform(rng, 0, static_cast<std::int64_t>(alphabet.size()) - 1))];
      switch (testkit::uniform(rng, 0, 2)) {
        case 0: text[pos] = c; break;
        case 1: text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), c); break;
        default: text.erase(pos, 1); break;
      }
    }
    try {
      parse_query(text);
    } catch (const ParseError& e) {
      CHECK(e.offset() <= text.size());
    }
  }
}

#pragma once

// Shared fixtures for the unit and acceptance tests: random relations,
// predicates and queries whose results stay inside the engine's limits.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pimolap/engine.hpp"
#include "pimolap/layout.hpp"
#include "pimolap/memory.hpp"
#include "pimolap/relation.hpp"
#include "pimolap/schema.hpp"

namespace testkit {

using namespace pimolap;

inline std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline bool coin(std::mt19937_64& rng, double p = 0.5) {
  return std::uniform_real_distribution<double>(0, 1)(rng) < p;
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(v.size()) - 1))];
}

// Attributes "f0".."fN" plus dimension-style "d.g0".."d.gM"; the last one
// of each family is narrow so it makes a reasonable GROUP BY key.
inline Table random_table(std::mt19937_64& rng, std::size_t rows) {
  Table t;
  t.name = "r";
  const int facts = static_cast<int>(uniform(rng, 2, 5));
  const int dims = static_cast<int>(uniform(rng, 1, 4));
  auto add = [&](const std::string& name, bool narrow) {
    AttributeSpec a;
    a.name = name;
    a.width = static_cast<std::uint32_t>(narrow ? uniform(rng, 1, 3) : uniform(rng, 2, 16));
    if (!narrow && coin(rng, 0.25)) a.sign = Signedness::kSigned;
    t.schema.push_back(a);
  };
  for (int i = 0; i < facts; ++i) add("f" + std::to_string(i), i >= facts - 1);
  for (int i = 0; i < dims; ++i) add("d.g" + std::to_string(i), i >= dims - 1);
  std::vector<std::int64_t> row(t.schema.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const AttributeSpec& a = t.schema[c];
      // Skewed values for narrow attributes so group sizes differ.
      if (a.width <= 3 && coin(rng, 0.6)) {
        row[c] = min_value(a);
      } else {
        row[c] = uniform(rng, min_value(a), max_value(a));
      }
    }
    t.append_row(row);
  }
  return t;
}

inline Table ssb_table(std::uint64_t seed) { return prejoin(gen_ssb_lite(1, seed)); }

inline RelationLayout layout_of(const Schema& schema, Split split, std::uint32_t rows = 1024,
                                std::uint32_t cols = 1024, std::uint32_t scratch = 512) {
  return plan_layout(schema, rows, cols, scratch, split,
                     split == Split::kTwoXb ? dimension_attributes(schema)
                                            : std::vector<std::string>{});
}

inline PimMemory memory_of(const Table& t, Split split, std::uint32_t rows = 1024) {
  return store_records(layout_of(t.schema, split, rows), t);
}

inline std::int64_t random_immediate(std::mt19937_64& rng, const AttributeSpec& a) {
  const std::int64_t lo = min_value(a);
  const std::int64_t hi = max_value(a);
  if (coin(rng, 0.1)) return coin(rng) ? lo - uniform(rng, 1, 3) : hi + uniform(rng, 1, 3);
  return uniform(rng, lo, hi);
}

inline PredicateExpr random_comparison(std::mt19937_64& rng, const Schema& schema) {
  const AttributeSpec& a = pick(rng, schema);
  const CmpOp op = static_cast<CmpOp>(uniform(rng, 0, 5));
  if (coin(rng, 0.2)) {
    std::vector<std::string> peers;
    for (const auto& b : schema) {
      if (b.name != a.name && b.width == a.width && b.sign == a.sign) peers.push_back(b.name);
    }
    if (!peers.empty()) return PredicateExpr::compare(a.name, op, pick(rng, peers));
  }
  return PredicateExpr::compare(a.name, op, random_immediate(rng, a));
}

inline PredicateExpr random_predicate(std::mt19937_64& rng, const Schema& schema, int depth = 3) {
  if (depth == 0 || coin(rng, 0.35)) {
    return coin(rng, 0.05) ? PredicateExpr::truth() : random_comparison(rng, schema);
  }
  switch (uniform(rng, 0, 2)) {
    case 0:
      return PredicateExpr::conj(random_predicate(rng, schema, depth - 1),
                                 random_predicate(rng, schema, depth - 1));
    case 1:
      return PredicateExpr::disj(random_predicate(rng, schema, depth - 1),
                                 random_predicate(rng, schema, depth - 1));
    default:
      return PredicateExpr::negate(random_predicate(rng, schema, depth - 1));
  }
}

inline std::vector<const AttributeSpec*> unsigned_attrs(const Schema& schema,
                                                        std::uint32_t max_width) {
  std::vector<const AttributeSpec*> out;
  for (const auto& a : schema) {
    if (!a.is_signed() && a.width <= max_width) out.push_back(&a);
  }
  return out;
}

inline ArithExpr random_arith(std::mt19937_64& rng, const Schema& schema) {
  const auto small = unsigned_attrs(schema, 16);
  const int shape = static_cast<int>(uniform(rng, 0, 5));
  if (shape <= 2 || small.empty()) return ArithExpr::attribute(pick(rng, schema).name);
  const auto& x = *pick(rng, small);
  const auto& y = *pick(rng, small);
  if (shape == 3) return ArithExpr::add(ArithExpr::attribute(x.name), ArithExpr::attribute(y.name));
  if (shape == 4) {
    return ArithExpr::mul(ArithExpr::attribute(x.name),
                          ArithExpr::immediate(static_cast<std::uint64_t>(uniform(rng, 0, 40))));
  }
  return ArithExpr::add(ArithExpr::mul(ArithExpr::attribute(x.name), ArithExpr::attribute(y.name)),
                        ArithExpr::immediate(static_cast<std::uint64_t>(uniform(rng, 0, 9))));
}

inline QueryIR random_query(std::mt19937_64& rng, const Table& t, bool allow_group = true) {
  QueryIR q;
  q.relation = t.name;
  const int n = static_cast<int>(uniform(rng, 1, 3));
  for (int i = 0; i < n; ++i) {
    AggregateSpec s;
    s.kind = static_cast<AggKind>(uniform(rng, 0, 4));
    if (s.kind != AggKind::kCount || coin(rng, 0.3)) s.arg = random_arith(rng, t.schema);
    q.aggregates.push_back(std::move(s));
  }
  q.predicate = random_predicate(rng, t.schema);
  if (allow_group && coin(rng, 0.5)) {
    std::vector<std::string> narrow;
    for (const auto& a : t.schema) {
      if (a.width <= 3) narrow.push_back(a.name);
    }
    const int k = static_cast<int>(uniform(rng, 1, 2));
    for (int i = 0; i < k && !narrow.empty(); ++i) {
      const std::string g = pick(rng, narrow);
      if (std::find(q.group_by.begin(), q.group_by.end(), g) == q.group_by.end()) {
        q.group_by.push_back(g);
      }
    }
  }
  return q;
}

struct EngineConfig {
  EngineMode mode;
  Split split;
  Circuit circuit;

  std::string label() const {
    return std::string(engine_name(mode)) + "/" + std::string(split_name(split)) + "/" +
           std::string(circuit_name(circuit));
  }
};

// pim and hybrid crossed with both layouts and both circuits.
inline std::vector<EngineConfig> engine_matrix() {
  std::vector<EngineConfig> out;
  for (auto m : {EngineMode::kPim, EngineMode::kHybrid}) {
    for (auto s : {Split::kOneXb, Split::kTwoXb}) {
      for (auto c : {Circuit::kPurePim, Circuit::kPeripheral}) out.push_back({m, s, c});
    }
  }
  return out;
}

}  // namespace testkit

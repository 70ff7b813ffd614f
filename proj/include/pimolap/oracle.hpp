#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pimolap/expr.hpp"
#include "pimolap/isa.hpp"
#include "pimolap/relation.hpp"

namespace pimolap {

// One aggregate result: absent (empty MIN/MAX/AVG/SUM), an exact integer,
// or an average kept as its exact sum and count.
struct AggValue {
  enum class Kind : std::uint8_t { kNull, kInt, kAvg };
  Kind kind = Kind::kNull;
  __int128 integer = 0;
  Average avg;

  static AggValue null() { return {}; }
  static AggValue of(__int128 v) { return {Kind::kInt, v, {}}; }
  static AggValue of(const Average& a) { return {Kind::kAvg, 0, a}; }

  bool is_null() const { return kind == Kind::kNull; }
  nlohmann::json to_json() const;
  std::string to_string() const;
  friend bool operator==(const AggValue&, const AggValue&) = default;
};

std::string int128_to_string(__int128 v);

using GroupKey = std::vector<std::int64_t>;

struct ResultRow {
  GroupKey key;
  std::vector<AggValue> values;
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

// Rows sorted by group key; keys unique.
struct ResultTable {
  std::vector<std::string> group_columns;
  std::vector<std::string> agg_columns;
  std::vector<ResultRow> rows;

  const ResultRow* find(const GroupKey& key) const;
  nlohmann::json to_json() const;
  std::string to_text() const;
  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

// Exact equality for integers and AVG sum/count; AVG values additionally
// compared within `avg_rel_tol`. Returns a description of the first
// difference, or nullopt when the tables agree.
std::optional<std::string> compare_results(const ResultTable& expected, const ResultTable& actual,
                                           double avg_rel_tol = 1e-9);

// Column names of a query's result.
std::vector<std::string> result_columns(const QueryIR& ir);
// Orders rows by key and drops nothing; used by every engine.
void sort_rows(ResultTable& table);

struct HostResult {
  ResultTable table;
  std::uint64_t baseline_bits = 0;
};

// Bits a row-store scan pulls for the query: rows x the width of every
// attribute referenced anywhere in it.
std::uint64_t host_baseline_bits(const QueryIR& ir, const Schema& schema, std::size_t rows);

// Throws PlanError naming the first attribute the schema lacks.
void check_attributes(const QueryIR& ir, const Schema& schema);

bool eval_predicate(const PredicateExpr& pred, const Table& table, std::size_t row);

// Exact value of the expression. With `width_masked` every node wraps at
// its inferred width, as the PIM circuits do.
__int128 eval_arith(const ArithExpr& expr, const Table& table, std::size_t row,
                    bool width_masked = false);

// Full-scan reference engine with 128-bit accumulators. Non-grouped queries
// always yield one row (COUNT 0 and null for the others when nothing
// matches); grouped queries yield one row per group with matches.
HostResult execute_host(const QueryIR& ir, const Table& table, bool width_masked = false);

}  // namespace pimolap

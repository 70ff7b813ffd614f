#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pimolap {

enum class CmpOp : std::uint8_t { kEq, kNe, kLt, kLe, kGt, kGe };

std::string_view cmp_symbol(CmpOp op);
bool apply_cmp(CmpOp op, std::int64_t lhs, std::int64_t rhs);

struct Comparison {
  std::string attr;
  CmpOp op = CmpOp::kEq;
  std::variant<std::string, std::int64_t> rhs;

  bool rhs_is_attr() const { return std::holds_alternative<std::string>(rhs); }
  friend bool operator==(const Comparison&, const Comparison&) = default;
};

// Predicate tree over one relation's attributes.
struct PredicateExpr {
  enum class Kind : std::uint8_t { kTrue, kCmp, kAnd, kOr, kNot };

  Kind kind = Kind::kTrue;
  Comparison cmp;                      // kCmp only
  std::vector<PredicateExpr> children;  // kAnd/kOr: two, kNot: one

  static PredicateExpr truth();
  static PredicateExpr compare(std::string attr, CmpOp op, std::int64_t imm);
  static PredicateExpr compare(std::string attr, CmpOp op, std::string other);
  static PredicateExpr conj(PredicateExpr a, PredicateExpr b);
  static PredicateExpr disj(PredicateExpr a, PredicateExpr b);
  static PredicateExpr negate(PredicateExpr a);

  std::size_t depth() const;
  void collect_attributes(std::set<std::string>& out) const;
  std::string to_string() const;
  friend bool operator==(const PredicateExpr&, const PredicateExpr&) = default;
};

// Integer expression over attributes and non-negative immediates.
// `width` is the declared result width; 0 means "infer from operands".
struct ArithExpr {
  enum class Kind : std::uint8_t { kAttr, kImm, kAdd, kMul };

  Kind kind = Kind::kImm;
  std::string attr;
  std::uint64_t imm = 0;
  std::vector<ArithExpr> children;
  std::uint32_t width = 0;

  static ArithExpr attribute(std::string name);
  static ArithExpr immediate(std::uint64_t value);
  static ArithExpr add(ArithExpr a, ArithExpr b, std::uint32_t width = 0);
  static ArithExpr mul(ArithExpr a, ArithExpr b, std::uint32_t width = 0);

  bool is_attr() const { return kind == Kind::kAttr; }
  void collect_attributes(std::set<std::string>& out) const;
  std::string to_string() const;
  friend bool operator==(const ArithExpr&, const ArithExpr&) = default;
};

enum class AggKind : std::uint8_t { kSum, kMin, kMax, kCount, kAvg };

std::string_view agg_name(AggKind kind);

struct AggregateSpec {
  AggKind kind = AggKind::kCount;
  std::optional<ArithExpr> arg;  // empty for COUNT(*)

  std::string to_string() const;
  friend bool operator==(const AggregateSpec&, const AggregateSpec&) = default;
};

struct QueryIR {
  std::vector<AggregateSpec> aggregates;
  std::string relation;
  PredicateExpr predicate;  // kTrue when there is no WHERE clause
  std::vector<std::string> group_by;

  bool grouped() const { return !group_by.empty(); }
  // Every attribute mentioned anywhere in the query.
  std::set<std::string> referenced_attributes() const;
  // Attributes read by the aggregate arguments.
  std::set<std::string> aggregate_attributes() const;
  std::string to_string() const;
  friend bool operator==(const QueryIR&, const QueryIR&) = default;
};

}  // namespace pimolap

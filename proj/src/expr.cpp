#include "pimolap/expr.hpp"

#include <algorithm>

namespace pimolap {

std::string_view cmp_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::kEq: return "=";
    case CmpOp::kNe: return "<>";
    case CmpOp::kLt: return "<";
    case CmpOp::kLe: return "<=";
    case CmpOp::kGt: return ">";
    case CmpOp::kGe: return ">=";
  }
  return "?";
}

bool apply_cmp(CmpOp op, std::int64_t lhs, std::int64_t rhs) {
  switch (op) {
    case CmpOp::kEq: return lhs == rhs;
    case CmpOp::kNe: return lhs != rhs;
    case CmpOp::kLt: return lhs < rhs;
    case CmpOp::kLe: return lhs <= rhs;
    case CmpOp::kGt: return lhs > rhs;
    case CmpOp::kGe: return lhs >= rhs;
  }
  return false;
}

PredicateExpr PredicateExpr::truth() { return PredicateExpr{}; }

PredicateExpr PredicateExpr::compare(std::string attr, CmpOp op, std::int64_t imm) {
  PredicateExpr e;
  e.kind = Kind::kCmp;
  e.cmp = Comparison{std::move(attr), op, imm};
  return e;
}

PredicateExpr PredicateExpr::compare(std::string attr, CmpOp op, std::string other) {
  PredicateExpr e;
  e.kind = Kind::kCmp;
  e.cmp = Comparison{std::move(attr), op, std::move(other)};
  return e;
}

PredicateExpr PredicateExpr::conj(PredicateExpr a, PredicateExpr b) {
  PredicateExpr e;
  e.kind = Kind::kAnd;
  e.children.push_back(std::move(a));
  e.children.push_back(std::move(b));
  return e;
}

PredicateExpr PredicateExpr::disj(PredicateExpr a, PredicateExpr b) {
  PredicateExpr e;
  e.kind = Kind::kOr;
  e.children.push_back(std::move(a));
  e.children.push_back(std::move(b));
  return e;
}

PredicateExpr PredicateExpr::negate(PredicateExpr a) {
  PredicateExpr e;
  e.kind = Kind::kNot;
  e.children.push_back(std::move(a));
  return e;
}

std::size_t PredicateExpr::depth() const {
  std::size_t d = 0;
  for (const auto& c : children) d = std::max(d, c.depth());
  return d + 1;
}

void PredicateExpr::collect_attributes(std::set<std::string>& out) const {
  if (kind == Kind::kCmp) {
    out.insert(cmp.attr);
    if (cmp.rhs_is_attr()) out.insert(std::get<std::string>(cmp.rhs));
  }
  for (const auto& c : children) c.collect_attributes(out);
}

std::string PredicateExpr::to_string() const {
  switch (kind) {
    case Kind::kTrue: return "TRUE";
    case Kind::kCmp: {
      std::string rhs = cmp.rhs_is_attr() ? std::get<std::string>(cmp.rhs)
                                          : std::to_string(std::get<std::int64_t>(cmp.rhs));
      return cmp.attr + " " + std::string(cmp_symbol(cmp.op)) + " " + rhs;
    }
    case Kind::kAnd:
      return "(" + children[0].to_string() + " AND " + children[1].to_string() + ")";
    case Kind::kOr:
      return "(" + children[0].to_string() + " OR " + children[1].to_string() + ")";
    case Kind::kNot: return "NOT (" + children[0].to_string() + ")";
  }
  return {};
}

ArithExpr ArithExpr::attribute(std::string name) {
  ArithExpr e;
  e.kind = Kind::kAttr;
  e.attr = std::move(name);
  return e;
}

ArithExpr ArithExpr::immediate(std::uint64_t value) {
  ArithExpr e;
  e.kind = Kind::kImm;
  e.imm = value;
  return e;
}

ArithExpr ArithExpr::add(ArithExpr a, ArithExpr b, std::uint32_t width) {
  ArithExpr e;
  e.kind = Kind::kAdd;
  e.children.push_back(std::move(a));
  e.children.push_back(std::move(b));
  e.width = width;
  return e;
}

ArithExpr ArithExpr::mul(ArithExpr a, ArithExpr b, std::uint32_t width) {
  ArithExpr e = add(std::move(a), std::move(b), width);
  e.kind = Kind::kMul;
  return e;
}

void ArithExpr::collect_attributes(std::set<std::string>& out) const {
  if (kind == Kind::kAttr) out.insert(attr);
  for (const auto& c : children) c.collect_attributes(out);
}

std::string ArithExpr::to_string() const {
  switch (kind) {
    case Kind::kAttr: return attr;
    case Kind::kImm: return std::to_string(imm);
    case Kind::kAdd:
      return "(" + children[0].to_string() + " + " + children[1].to_string() + ")";
    case Kind::kMul:
      return "(" + children[0].to_string() + " * " + children[1].to_string() + ")";
  }
  return {};
}

std::string_view agg_name(AggKind kind) {
  switch (kind) {
    case AggKind::kSum: return "SUM";
    case AggKind::kMin: return "MIN";
    case AggKind::kMax: return "MAX";
    case AggKind::kCount: return "COUNT";
    case AggKind::kAvg: return "AVG";
  }
  return "?";
}

std::string AggregateSpec::to_string() const {
  return std::string(agg_name(kind)) + "(" + (arg ? arg->to_string() : "*") + ")";
}

std::set<std::string> QueryIR::referenced_attributes() const {
  std::set<std::string> out = aggregate_attributes();
  predicate.collect_attributes(out);
  out.insert(group_by.begin(), group_by.end());
  return out;
}

std::set<std::string> QueryIR::aggregate_attributes() const {
  std::set<std::string> out;
  for (const auto& a : aggregates) {
    if (a.arg) a.arg->collect_attributes(out);
  }
  return out;
}

std::string QueryIR::to_string() const {
  std::string s = "SELECT ";
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    if (i) s += ", ";
    s += aggregates[i].to_string();
  }
  s += " FROM " + relation;
  if (predicate.kind != PredicateExpr::Kind::kTrue) s += " WHERE " + predicate.to_string();
  if (!group_by.empty()) {
    s += " GROUP BY ";
    for (std::size_t i = 0; i < group_by.size(); ++i) {
      if (i) s += ", ";
      s += group_by[i];
    }
  }
  return s;
}

}  // namespace pimolap

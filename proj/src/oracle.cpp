#include "pimolap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "pimolap/error.hpp"

namespace pimolap {

std::string int128_to_string(__int128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string s;
  while (u > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

namespace {

nlohmann::json int_json(__int128 v) {
  if (v >= std::numeric_limits<std::int64_t>::min() &&
      v <= std::numeric_limits<std::int64_t>::max()) {
    return static_cast<std::int64_t>(v);
  }
  return int128_to_string(v);
}

}  // namespace

nlohmann::json AggValue::to_json() const {
  switch (kind) {
    case Kind::kNull: return nullptr;
    case Kind::kInt: return int_json(integer);
    case Kind::kAvg:
      return nlohmann::json{{"sum", int_json(avg.sum)}, {"count", avg.count}, {"value", avg.value}};
  }
  return nullptr;
}

std::string AggValue::to_string() const {
  switch (kind) {
    case Kind::kNull: return "NULL";
    case Kind::kInt: return int128_to_string(integer);
    case Kind::kAvg: {
      std::ostringstream out;
      out.precision(10);
      out << avg.value;
      return out.str();
    }
  }
  return {};
}

const ResultRow* ResultTable::find(const GroupKey& key) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), key,
                             [](const ResultRow& r, const GroupKey& k) { return r.key < k; });
  return it != rows.end() && it->key == key ? &*it : nullptr;
}

nlohmann::json ResultTable::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : group_columns) cols.push_back(c);
  for (const auto& c : agg_columns) cols.push_back(c);
  nlohmann::json out_rows = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row = nlohmann::json::array();
    for (auto k : r.key) row.push_back(k);
    for (const auto& v : r.values) row.push_back(v.to_json());
    out_rows.push_back(std::move(row));
  }
  return nlohmann::json{{"columns", cols}, {"rows", out_rows}};
}

std::string ResultTable::to_text() const {
  std::vector<std::string> header = group_columns;
  header.insert(header.end(), agg_columns.begin(), agg_columns.end());
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::vector<std::string> line;
    for (auto k : r.key) line.push_back(std::to_string(k));
    for (const auto& v : r.values) line.push_back(v.to_string());
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& line : cells) widths[c] = std::max(widths[c], line[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out << "  ";
      out << line[c] << std::string(widths[c] - line[c].size(), ' ');
    }
    out << '\n';
  };
  emit(header);
  std::vector<std::string> rule;
  for (auto w : widths) rule.push_back(std::string(w, '-'));
  emit(rule);
  for (const auto& line : cells) emit(line);
  out << "(" << rows.size() << (rows.size() == 1 ? " row)" : " rows)") << '\n';
  return out.str();
}

std::optional<std::string> compare_results(const ResultTable& expected, const ResultTable& actual,
                                           double avg_rel_tol) {
  if (expected.group_columns != actual.group_columns ||
      expected.agg_columns != actual.agg_columns) {
    return "column names differ";
  }
  if (expected.rows.size() != actual.rows.size()) {
    return "row count " + std::to_string(actual.rows.size()) + ", expected " +
           std::to_string(expected.rows.size());
  }
  for (std::size_t i = 0; i < expected.rows.size(); ++i) {
    const auto& e = expected.rows[i];
    const auto& a = actual.rows[i];
    if (e.key != a.key) return "group key differs at row " + std::to_string(i);
    for (std::size_t j = 0; j < e.values.size(); ++j) {
      const AggValue& ev = e.values[j];
      const AggValue& av = a.values.at(j);
      bool same = ev.kind == av.kind;
      if (same && ev.kind == AggValue::Kind::kInt) same = ev.integer == av.integer;
      if (same && ev.kind == AggValue::Kind::kAvg) {
        const double scale = std::max(1.0, std::abs(ev.avg.value));
        same = ev.avg.sum == av.avg.sum && ev.avg.count == av.avg.count &&
               std::abs(ev.avg.value - av.avg.value) <= avg_rel_tol * scale;
      }
      if (!same) {
        return "row " + std::to_string(i) + " column " + expected.agg_columns[j] + ": got " +
               av.to_string() + ", expected " + ev.to_string();
      }
    }
  }
  return std::nullopt;
}

std::vector<std::string> result_columns(const QueryIR& ir) {
  std::vector<std::string> out;
  for (const auto& a : ir.aggregates) out.push_back(a.to_string());
  return out;
}

void sort_rows(ResultTable& table) {
  std::sort(table.rows.begin(), table.rows.end(),
            [](const ResultRow& a, const ResultRow& b) { return a.key < b.key; });
}

void check_attributes(const QueryIR& ir, const Schema& schema) {
  if (ir.aggregates.empty()) throw PlanError("query has no aggregate");
  for (const auto& name : ir.referenced_attributes()) {
    if (!find_attribute(schema, name)) throw PlanError("unknown attribute '" + name + "'");
  }
}

std::uint64_t host_baseline_bits(const QueryIR& ir, const Schema& schema, std::size_t rows) {
  std::uint64_t bits = 0;
  for (const auto& name : ir.referenced_attributes()) {
    bits += schema[attribute_index(schema, name)].width;
  }
  return bits * rows;
}

bool eval_predicate(const PredicateExpr& pred, const Table& table, std::size_t row) {
  switch (pred.kind) {
    case PredicateExpr::Kind::kTrue: return true;
    case PredicateExpr::Kind::kCmp: {
      const std::int64_t lhs = table.at(row, attribute_index(table.schema, pred.cmp.attr));
      const std::int64_t rhs =
          pred.cmp.rhs_is_attr()
              ? table.at(row, attribute_index(table.schema, std::get<std::string>(pred.cmp.rhs)))
              : std::get<std::int64_t>(pred.cmp.rhs);
      return apply_cmp(pred.cmp.op, lhs, rhs);
    }
    case PredicateExpr::Kind::kAnd:
      return eval_predicate(pred.children[0], table, row) &&
             eval_predicate(pred.children[1], table, row);
    case PredicateExpr::Kind::kOr:
      return eval_predicate(pred.children[0], table, row) ||
             eval_predicate(pred.children[1], table, row);
    case PredicateExpr::Kind::kNot: return !eval_predicate(pred.children[0], table, row);
  }
  return false;
}

__int128 eval_arith(const ArithExpr& expr, const Table& table, std::size_t row,
                    bool width_masked) {
  __int128 v = 0;
  switch (expr.kind) {
    case ArithExpr::Kind::kAttr:
      v = table.at(row, attribute_index(table.schema, expr.attr));
      break;
    case ArithExpr::Kind::kImm: v = static_cast<__int128>(expr.imm); break;
    case ArithExpr::Kind::kAdd:
      v = eval_arith(expr.children[0], table, row, width_masked) +
          eval_arith(expr.children[1], table, row, width_masked);
      break;
    case ArithExpr::Kind::kMul:
      v = eval_arith(expr.children[0], table, row, width_masked) *
          eval_arith(expr.children[1], table, row, width_masked);
      break;
  }
  if (width_masked && expr.kind != ArithExpr::Kind::kAttr) {
    const std::uint32_t w = infer_width(expr, table.schema);
    v = static_cast<__int128>(static_cast<unsigned __int128>(v) & low_mask(w));
  }
  return v;
}

namespace {

struct Accumulator {
  __int128 sum = 0;
  std::uint64_t count = 0;
  std::optional<__int128> min;
  std::optional<__int128> max;

  void add(__int128 v) {
    sum += v;
    ++count;
    min = min ? std::min(*min, v) : v;
    max = max ? std::max(*max, v) : v;
  }

  AggValue finish(AggKind kind) const {
    switch (kind) {
      case AggKind::kCount: return AggValue::of(static_cast<__int128>(count));
      case AggKind::kSum: return count ? AggValue::of(sum) : AggValue::null();
      case AggKind::kMin: return min ? AggValue::of(*min) : AggValue::null();
      case AggKind::kMax: return max ? AggValue::of(*max) : AggValue::null();
      case AggKind::kAvg: {
        auto a = compose_avg(sum, count);
        return a ? AggValue::of(*a) : AggValue::null();
      }
    }
    return AggValue::null();
  }
};

}  // namespace

HostResult execute_host(const QueryIR& ir, const Table& table, bool width_masked) {
  check_attributes(ir, table.schema);
  const std::size_t rows = table.row_count();
  std::vector<std::size_t> group_idx;
  for (const auto& g : ir.group_by) group_idx.push_back(attribute_index(table.schema, g));

  std::map<GroupKey, std::vector<Accumulator>> groups;
  if (!ir.grouped()) groups[{}].resize(ir.aggregates.size());
  for (std::size_t r = 0; r < rows; ++r) {
    if (!eval_predicate(ir.predicate, table, r)) continue;
    GroupKey key;
    for (auto gi : group_idx) key.push_back(table.at(r, gi));
    auto& accs = groups[key];
    accs.resize(ir.aggregates.size());
    for (std::size_t a = 0; a < ir.aggregates.size(); ++a) {
      const auto& spec = ir.aggregates[a];
      const bool has_value = spec.arg && spec.kind != AggKind::kCount;
      accs[a].add(has_value ? eval_arith(*spec.arg, table, r, width_masked) : 1);
    }
  }

  HostResult out;
  out.table.group_columns = ir.group_by;
  out.table.agg_columns = result_columns(ir);
  for (const auto& [key, accs] : groups) {
    ResultRow row{key, {}};
    for (std::size_t a = 0; a < ir.aggregates.size(); ++a) {
      row.values.push_back(accs[a].finish(ir.aggregates[a].kind));
    }
    out.table.rows.push_back(std::move(row));
  }
  out.baseline_bits = host_baseline_bits(ir, table.schema, rows);
  return out;
}

}  // namespace pimolap

#include "pimolap/layout.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "pimolap/error.hpp"

namespace pimolap {

std::optional<std::size_t> find_attribute(const Schema& schema, std::string_view name) {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t attribute_index(const Schema& schema, std::string_view name) {
  auto idx = find_attribute(schema, name);
  if (!idx) throw LayoutError("unknown attribute '" + std::string(name) + "'");
  return *idx;
}

void validate_schema(const Schema& schema) {
  std::set<std::string> seen;
  for (const auto& a : schema) {
    if (a.name.empty()) throw LayoutError("attribute with empty name");
    if (a.width < 1 || a.width > 64) {
      throw LayoutError("attribute '" + a.name + "' has width " + std::to_string(a.width) +
                        ", expected 1..64");
    }
    if (!seen.insert(a.name).second) throw LayoutError("duplicate attribute '" + a.name + "'");
  }
}

std::int64_t min_value(const AttributeSpec& spec) {
  if (!spec.is_signed()) return 0;
  if (spec.width >= 64) return std::numeric_limits<std::int64_t>::min();
  return -(std::int64_t{1} << (spec.width - 1));
}

std::int64_t max_value(const AttributeSpec& spec) {
  if (spec.is_signed()) {
    if (spec.width >= 64) return std::numeric_limits<std::int64_t>::max();
    return (std::int64_t{1} << (spec.width - 1)) - 1;
  }
  if (spec.width >= 63) return std::numeric_limits<std::int64_t>::max();
  return (std::int64_t{1} << spec.width) - 1;
}

bool fits(const AttributeSpec& spec, std::int64_t value) {
  return value >= min_value(spec) && value <= max_value(spec);
}

std::uint64_t encode(const AttributeSpec& spec, std::int64_t value) {
  if (!fits(spec, value)) {
    throw LayoutError("value " + std::to_string(value) + " does not fit " +
                      std::to_string(spec.width) + "-bit attribute '" + spec.name + "'");
  }
  return static_cast<std::uint64_t>(value) & low_mask(spec.width);
}

std::int64_t decode(const AttributeSpec& spec, std::uint64_t bits) {
  bits &= low_mask(spec.width);
  if (spec.is_signed() && spec.width < 64 && ((bits >> (spec.width - 1)) & 1)) {
    bits |= ~low_mask(spec.width);
  }
  return static_cast<std::int64_t>(bits);
}

std::uint32_t bits_for_range(std::int64_t lo, std::int64_t hi, Signedness sign) {
  for (std::uint32_t w = 1; w < 64; ++w) {
    AttributeSpec probe{"", w, sign};
    if (lo >= min_value(probe) && hi <= max_value(probe)) return w;
  }
  return 64;
}

void Table::append_row(const std::vector<std::int64_t>& row) {
  if (row.size() != schema.size()) {
    throw LayoutError("row has " + std::to_string(row.size()) + " values, schema has " +
                      std::to_string(schema.size()));
  }
  values.insert(values.end(), row.begin(), row.end());
}

std::string_view split_name(Split split) {
  return split == Split::kOneXb ? "one_xb" : "two_xb";
}

Split parse_split(std::string_view text) {
  if (text == "one_xb") return Split::kOneXb;
  if (text == "two_xb") return Split::kTwoXb;
  throw LayoutError("unknown layout '" + std::string(text) + "' (expected one_xb or two_xb)");
}

std::size_t RelationLayout::live_rows(std::size_t page) const {
  if (page >= page_count()) return 0;
  const std::size_t start = page * rows_per_array;
  return std::min<std::size_t>(rows_per_array, record_count - start);
}

const AttributeSpec& RelationLayout::attribute(std::string_view name) const {
  return schema[attribute_index(schema, name)];
}

const AttributePlacement& RelationLayout::place(std::string_view name) const {
  return placement[attribute_index(schema, name)];
}

std::uint32_t RelationLayout::used_width(std::uint32_t slot) const {
  std::uint32_t used = 0;
  for (const auto& p : placement) {
    if (p.slot == slot) used = std::max(used, p.cols.end());
  }
  return used;
}

Location RelationLayout::locate(std::size_t record, std::string_view attr) const {
  const auto& p = place(attr);
  if (record >= record_count) {
    throw LayoutError("record " + std::to_string(record) + " out of range (record_count=" +
                      std::to_string(record_count) + ")");
  }
  return Location{record / rows_per_array, p.slot, record % rows_per_array, p.cols};
}

nlohmann::json RelationLayout::to_json() const {
  nlohmann::json attrs = nlohmann::json::array();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    attrs.push_back({{"name", schema[i].name},
                     {"width", schema[i].width},
                     {"signed", schema[i].is_signed()},
                     {"slot", placement[i].slot},
                     {"first_col", placement[i].cols.begin},
                     {"last_col", placement[i].cols.last()}});
  }
  return {{"split", split_name(split)},
          {"rows_per_array", rows_per_array},
          {"cols_per_array", cols_per_array},
          {"record_count", record_count},
          {"page_count", page_count()},
          {"scratch", {{"first_col", scratch.begin}, {"last_col", scratch.last()}}},
          {"validity_col", validity_col()},
          {"attributes", attrs}};
}

RelationLayout plan_layout(const Schema& schema, std::uint32_t array_rows,
                           std::uint32_t array_cols, std::uint32_t scratch_bits, Split split,
                           const std::vector<std::string>& second_partition) {
  validate_schema(schema);
  if (array_rows == 0 || array_cols == 0) throw LayoutError("array geometry must be positive");
  if (scratch_bits < 1) throw LayoutError("scratch_bits must be at least 1");
  if (scratch_bits > array_cols) {
    throw LayoutError("scratch of " + std::to_string(scratch_bits) +
                      " columns exceeds array width " + std::to_string(array_cols));
  }

  RelationLayout layout;
  layout.schema = schema;
  layout.split = split;
  layout.rows_per_array = array_rows;
  layout.cols_per_array = array_cols;
  layout.scratch = ColumnRange{array_cols - scratch_bits, scratch_bits};

  std::set<std::string> second;
  if (split == Split::kTwoXb) {
    for (const auto& name : second_partition) {
      if (!find_attribute(schema, name)) {
        throw LayoutError("TWO_XB partition references unknown attribute '" + name + "'");
      }
      second.insert(name);
    }
    layout.second_partition = second_partition;
  } else if (!second_partition.empty()) {
    throw LayoutError("ONE_XB layout takes no partition");
  }

  const std::uint32_t limit = layout.scratch.begin;
  std::uint32_t next[2] = {0, 0};
  for (const auto& attr : schema) {
    const std::uint32_t slot = second.count(attr.name) ? 1 : 0;
    if (next[slot] + attr.width > limit) {
      throw LayoutError("attribute '" + attr.name + "' overflows array " +
                        std::to_string(slot) + ": needs columns up to " +
                        std::to_string(next[slot] + attr.width) + ", only " +
                        std::to_string(limit) + " available before scratch");
    }
    layout.placement.push_back({slot, ColumnRange{next[slot], attr.width}});
    next[slot] += attr.width;
  }
  return layout;
}

}  // namespace pimolap

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pimolap/relation.hpp"

namespace pimolap {

// Which layout a relation uses: all attributes in one array per page, or
// vertically split across an array pair.
enum class Split : std::uint8_t { kOneXb, kTwoXb };

std::string_view split_name(Split split);
Split parse_split(std::string_view text);

struct ColumnRange {
  std::uint32_t begin = 0;
  std::uint32_t width = 0;

  std::uint32_t end() const { return begin + width; }
  std::uint32_t last() const { return begin + width - 1; }
  bool contains(std::uint32_t col) const { return col >= begin && col < end(); }
  bool overlaps(const ColumnRange& other) const {
    return begin < other.end() && other.begin < end();
  }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

struct AttributePlacement {
  std::uint32_t slot = 0;  // array within the page: 0, or 1 under TWO_XB
  ColumnRange cols;
  friend bool operator==(const AttributePlacement&, const AttributePlacement&) = default;
};

struct Location {
  std::size_t page = 0;
  std::uint32_t slot = 0;
  std::size_t row = 0;
  ColumnRange cols;
  friend bool operator==(const Location&, const Location&) = default;
};

// Mapping of a relation onto cell arrays. One record per array row, each
// attribute a contiguous column range packed from column 0 in schema order,
// scratch at the top of every array. The first scratch column is the
// validity bit marking live rows.
struct RelationLayout {
  Schema schema;
  Split split = Split::kOneXb;
  std::vector<std::string> second_partition;  // TWO_XB: attributes in slot 1
  std::uint32_t rows_per_array = 0;
  std::uint32_t cols_per_array = 0;
  ColumnRange scratch;
  std::size_t record_count = 0;
  std::vector<AttributePlacement> placement;  // parallel to schema

  std::uint32_t slot_count() const { return split == Split::kTwoXb ? 2 : 1; }
  std::uint32_t validity_col() const { return scratch.begin; }
  std::size_t page_count() const {
    return (record_count + rows_per_array - 1) / rows_per_array;
  }
  std::size_t live_rows(std::size_t page) const;

  const AttributeSpec& attribute(std::string_view name) const;
  const AttributePlacement& place(std::string_view name) const;
  std::uint32_t used_width(std::uint32_t slot) const;

  // Throws LayoutError for unknown attributes or out-of-range records.
  Location locate(std::size_t record, std::string_view attr) const;

  nlohmann::json to_json() const;
};

// Deterministic packing. Under TWO_XB `second_partition` names the
// attributes that go to slot 1; everything else stays in slot 0.
RelationLayout plan_layout(const Schema& schema, std::uint32_t array_rows,
                           std::uint32_t array_cols, std::uint32_t scratch_bits, Split split,
                           const std::vector<std::string>& second_partition = {});

}  // namespace pimolap

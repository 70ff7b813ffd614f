#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pimolap {

enum class Signedness : std::uint8_t { kUnsigned, kSigned };

struct AttributeSpec {
  std::string name;
  std::uint32_t width = 1;  // bits, 1..64
  Signedness sign = Signedness::kUnsigned;

  bool is_signed() const { return sign == Signedness::kSigned; }
  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

using Schema = std::vector<AttributeSpec>;

std::optional<std::size_t> find_attribute(const Schema& schema, std::string_view name);
// Throws LayoutError naming the attribute when absent.
std::size_t attribute_index(const Schema& schema, std::string_view name);
// Width >= 1, width <= 64, names unique.
void validate_schema(const Schema& schema);

// Smallest value range representable in the attribute.
std::int64_t min_value(const AttributeSpec& spec);
std::int64_t max_value(const AttributeSpec& spec);
bool fits(const AttributeSpec& spec, std::int64_t value);
// Two's complement for signed attributes; throws LayoutError on overflow.
std::uint64_t encode(const AttributeSpec& spec, std::int64_t value);
std::int64_t decode(const AttributeSpec& spec, std::uint64_t bits);

// Minimal bit count covering [lo, hi] with the given signedness.
std::uint32_t bits_for_range(std::int64_t lo, std::int64_t hi, Signedness sign);

inline std::uint64_t low_mask(std::uint32_t width) {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

// Row-major table of integer-encoded attributes.
struct Table {
  std::string name;
  Schema schema;
  std::vector<std::int64_t> values;

  std::size_t row_count() const { return schema.empty() ? 0 : values.size() / schema.size(); }
  std::int64_t at(std::size_t row, std::size_t col) const {
    return values[row * schema.size() + col];
  }
  std::int64_t& at(std::size_t row, std::size_t col) { return values[row * schema.size() + col]; }
  void append_row(const std::vector<std::int64_t>& row);

  friend bool operator==(const Table&, const Table&) = default;
};

}  // namespace pimolap

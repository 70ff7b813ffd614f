#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pimolap {

inline constexpr std::size_t kDefaultArrayRows = 1024;
inline constexpr std::size_t kDefaultArrayCols = 1024;

enum class OpKind : std::uint8_t { kNot, kAnd, kOr, kNor, kXor, kCopy, kSet0, kSet1 };

std::string_view op_name(OpKind kind);
// Number of source columns the op reads.
int op_arity(OpKind kind);

// One column-wise logic operation: dest = kind(srcs...) on every row at once.
struct ColOp {
  OpKind kind = OpKind::kSet0;
  std::array<std::uint32_t, 2> srcs{};
  std::uint32_t dest = 0;

  static ColOp unary(OpKind kind, std::uint32_t src, std::uint32_t dest);
  static ColOp binary(OpKind kind, std::uint32_t a, std::uint32_t b, std::uint32_t dest);
  static ColOp set(bool value, std::uint32_t dest);

  std::string to_string() const;
  friend bool operator==(const ColOp&, const ColOp&) = default;
};

// A rows x cols bit matrix that executes logic between whole columns.
//
// Bits are kept column-major, 64 rows per word, so a column op touches
// ceil(rows/64) words. Padding bits past the last row are always zero.
class CellArray {
 public:
  CellArray(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  // op_count += 1, write_count += rows.
  void exec(const ColOp& op);

  void write_row(std::size_t row, const std::vector<bool>& bits);
  std::vector<bool> read_row(std::size_t row) const;
  std::vector<bool> read_col(std::size_t col) const;
  // Whole-column store from the host; write_count += rows.
  void write_col(std::size_t col, const std::vector<bool>& bits);

  bool bit(std::size_t row, std::size_t col) const;

  // Host store of a `width`-bit field, LSB at `col`. write_count += width.
  void write_bits(std::size_t row, std::size_t col, std::size_t width, std::uint64_t value);
  std::uint64_t read_bits(std::size_t row, std::size_t col, std::size_t width) const;

  // In-array row move used by the pure bulk-bitwise reduction tree. Copies a
  // `width`-column field of `count` consecutive rows. op_count += count,
  // write_count += count * width.
  void copy_rows(std::size_t src_row, std::size_t dst_row, std::size_t count,
                 std::size_t src_col, std::size_t dst_col, std::size_t width);
  // Writes `value` into the field of `count` rows. op_count += count.
  void fill_rows(std::size_t row, std::size_t count, std::size_t col, std::size_t width,
                 std::uint64_t value);

  std::uint64_t op_count() const { return op_count_; }
  std::uint64_t write_count() const { return write_count_; }

 private:
  std::uint64_t* column(std::size_t col) { return bits_.data() + col * words_; }
  const std::uint64_t* column(std::size_t col) const { return bits_.data() + col * words_; }
  void check_row(std::size_t row) const;
  void check_col(std::size_t col, std::string_view what) const;
  void set_bit(std::size_t row, std::size_t col, bool value);

  std::size_t rows_;
  std::size_t cols_;
  std::size_t words_;
  std::uint64_t tail_mask_;
  std::vector<std::uint64_t> bits_;
  std::uint64_t op_count_ = 0;
  std::uint64_t write_count_ = 0;
};

}  // namespace pimolap

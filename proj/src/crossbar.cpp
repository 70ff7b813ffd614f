#include "pimolap/crossbar.hpp"

#include <sstream>

#include "pimolap/error.hpp"

namespace pimolap {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kNot: return "NOT";
    case OpKind::kAnd: return "AND";
    case OpKind::kOr: return "OR";
    case OpKind::kNor: return "NOR";
    case OpKind::kXor: return "XOR";
    case OpKind::kCopy: return "COPY";
    case OpKind::kSet0: return "SET0";
    case OpKind::kSet1: return "SET1";
  }
  return "?";
}

int op_arity(OpKind kind) {
  switch (kind) {
    case OpKind::kNot:
    case OpKind::kCopy: return 1;
    case OpKind::kSet0:
    case OpKind::kSet1: return 0;
    default: return 2;
  }
}

ColOp ColOp::unary(OpKind kind, std::uint32_t src, std::uint32_t dest) {
  return ColOp{kind, {src, 0}, dest};
}

ColOp ColOp::binary(OpKind kind, std::uint32_t a, std::uint32_t b, std::uint32_t dest) {
  return ColOp{kind, {a, b}, dest};
}

ColOp ColOp::set(bool value, std::uint32_t dest) {
  return ColOp{value ? OpKind::kSet1 : OpKind::kSet0, {0, 0}, dest};
}

std::string ColOp::to_string() const {
  std::ostringstream out;
  out << op_name(kind);
  for (int i = 0; i < op_arity(kind); ++i) out << " c" << srcs[i];
  out << " -> c" << dest;
  return out.str();
}

CellArray::CellArray(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0) {
    throw CrossbarError("cell array needs positive dimensions, got " + std::to_string(rows) +
                        "x" + std::to_string(cols));
  }
  words_ = (rows + 63) / 64;
  const std::size_t tail = rows % 64;
  tail_mask_ = tail == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << tail) - 1;
  bits_.assign(words_ * cols, 0);
}

void CellArray::check_row(std::size_t row) const {
  if (row >= rows_) {
    throw CrossbarError("row " + std::to_string(row) + " out of range (rows=" +
                        std::to_string(rows_) + ")");
  }
}

void CellArray::check_col(std::size_t col, std::string_view what) const {
  if (col >= cols_) {
    throw CrossbarError(std::string(what) + ": column " + std::to_string(col) +
                        " out of range (cols=" + std::to_string(cols_) + ")");
  }
}

void CellArray::exec(const ColOp& op) {
  const int arity = op_arity(op.kind);
  for (int i = 0; i < arity; ++i) check_col(op.srcs[i], op.to_string());
  check_col(op.dest, op.to_string());

  std::uint64_t* d = column(op.dest);
  const std::uint64_t* a = arity > 0 ? column(op.srcs[0]) : nullptr;
  const std::uint64_t* b = arity > 1 ? column(op.srcs[1]) : nullptr;
  switch (op.kind) {
    case OpKind::kNot:
      for (std::size_t w = 0; w < words_; ++w) d[w] = ~a[w];
      break;
    case OpKind::kAnd:
      for (std::size_t w = 0; w < words_; ++w) d[w] = a[w] & b[w];
      break;
    case OpKind::kOr:
      for (std::size_t w = 0; w < words_; ++w) d[w] = a[w] | b[w];
      break;
    case OpKind::kNor:
      for (std::size_t w = 0; w < words_; ++w) d[w] = ~(a[w] | b[w]);
      break;
    case OpKind::kXor:
      for (std::size_t w = 0; w < words_; ++w) d[w] = a[w] ^ b[w];
      break;
    case OpKind::kCopy:
      if (d != a) {
        for (std::size_t w = 0; w < words_; ++w) d[w] = a[w];
      }
      break;
    case OpKind::kSet0:
      for (std::size_t w = 0; w < words_; ++w) d[w] = 0;
      break;
    case OpKind::kSet1:
      for (std::size_t w = 0; w < words_; ++w) d[w] = ~std::uint64_t{0};
      break;
  }
  d[words_ - 1] &= tail_mask_;
  ++op_count_;
  write_count_ += rows_;
}

bool CellArray::bit(std::size_t row, std::size_t col) const {
  check_row(row);
  check_col(col, "bit");
  return (column(col)[row / 64] >> (row % 64)) & 1;
}

void CellArray::set_bit(std::size_t row, std::size_t col, bool value) {
  std::uint64_t& word = column(col)[row / 64];
  const std::uint64_t m = std::uint64_t{1} << (row % 64);
  word = value ? (word | m) : (word & ~m);
}

void CellArray::write_row(std::size_t row, const std::vector<bool>& bits) {
  check_row(row);
  if (bits.size() != cols_) {
    throw CrossbarError("write_row: expected " + std::to_string(cols_) + " bits, got " +
                        std::to_string(bits.size()));
  }
  for (std::size_t c = 0; c < cols_; ++c) set_bit(row, c, bits[c]);
  write_count_ += cols_;
}

std::vector<bool> CellArray::read_row(std::size_t row) const {
  check_row(row);
  std::vector<bool> out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = (column(c)[row / 64] >> (row % 64)) & 1;
  return out;
}

std::vector<bool> CellArray::read_col(std::size_t col) const {
  check_col(col, "read_col");
  const std::uint64_t* src = column(col);
  std::vector<bool> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (src[r / 64] >> (r % 64)) & 1;
  return out;
}

void CellArray::write_col(std::size_t col, const std::vector<bool>& bits) {
  check_col(col, "write_col");
  if (bits.size() != rows_) {
    throw CrossbarError("write_col: expected " + std::to_string(rows_) + " bits, got " +
                        std::to_string(bits.size()));
  }
  for (std::size_t r = 0; r < rows_; ++r) set_bit(r, col, bits[r]);
  write_count_ += rows_;
}

void CellArray::write_bits(std::size_t row, std::size_t col, std::size_t width,
                           std::uint64_t value) {
  check_row(row);
  if (width == 0) return;
  check_col(col + width - 1, "write_bits");
  for (std::size_t i = 0; i < width; ++i) set_bit(row, col + i, (value >> i) & 1);
  write_count_ += width;
}

std::uint64_t CellArray::read_bits(std::size_t row, std::size_t col, std::size_t width) const {
  check_row(row);
  if (width == 0) return 0;
  check_col(col + width - 1, "read_bits");
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < width; ++i) {
    value |= ((column(col + i)[row / 64] >> (row % 64)) & 1) << i;
  }
  return value;
}

void CellArray::copy_rows(std::size_t src_row, std::size_t dst_row, std::size_t count,
                          std::size_t src_col, std::size_t dst_col, std::size_t width) {
  if (count == 0 || width == 0) return;
  check_row(src_row + count - 1);
  check_row(dst_row + count - 1);
  check_col(src_col + width - 1, "copy_rows");
  check_col(dst_col + width - 1, "copy_rows");
  for (std::size_t c = 0; c < width; ++c) {
    const std::uint64_t* s = column(src_col + c);
    // Overlap inside one column is only possible when src_col == dst_col;
    // pick the direction that never reads an already-overwritten bit.
    if (dst_row <= src_row) {
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = src_row + i;
        set_bit(dst_row + i, dst_col + c, (s[r / 64] >> (r % 64)) & 1);
      }
    } else {
      for (std::size_t i = count; i-- > 0;) {
        const std::size_t r = src_row + i;
        set_bit(dst_row + i, dst_col + c, (s[r / 64] >> (r % 64)) & 1);
      }
    }
  }
  op_count_ += count;
  write_count_ += count * width;
}

void CellArray::fill_rows(std::size_t row, std::size_t count, std::size_t col, std::size_t width,
                          std::uint64_t value) {
  if (count == 0 || width == 0) return;
  check_row(row + count - 1);
  check_col(col + width - 1, "fill_rows");
  for (std::size_t c = 0; c < width; ++c) {
    const bool b = (value >> c) & 1;
    for (std::size_t i = 0; i < count; ++i) set_bit(row + i, col + c, b);
  }
  op_count_ += count;
  write_count_ += count * width;
}

}  // namespace pimolap

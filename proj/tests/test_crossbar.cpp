#include <algorithm>
#include <random>

#include "doctest.h"
#include "pimolap/crossbar.hpp"
#include "pimolap/error.hpp"

using namespace pimolap;

namespace {

bool reference_op(OpKind k, bool a, bool b) {
  switch (k) {
    case OpKind::kNot: return !a;
    case OpKind::kAnd: return a && b;
    case OpKind::kOr: return a || b;
    case OpKind::kNor: return !(a || b);
    case OpKind::kXor: return a != b;
    case OpKind::kCopy: return a;
    case OpKind::kSet0: return false;
    case OpKind::kSet1: return true;
  }
  return false;
}

const OpKind kAllOps[] = {OpKind::kNot, OpKind::kAnd, OpKind::kOr,   OpKind::kNor,
                          OpKind::kXor, OpKind::kCopy, OpKind::kSet0, OpKind::kSet1};

ColOp make_op(OpKind k, std::uint32_t a, std::uint32_t b, std::uint32_t d) {
  switch (op_arity(k)) {
    case 0: return ColOp::set(k == OpKind::kSet1, d);
    case 1: return ColOp::unary(k, a, d);
    default: return ColOp::binary(k, a, b, d);
  }
}

}  // namespace

TEST_CASE("every op matches its truth table on all input pairs") {
  // Rows 0..3 enumerate (a, b) in {0,1}^2; 130 rows span three words.
  CellArray arr(130, 4);
  std::vector<bool> a(130), b(130);
  for (std::size_t r = 0; r < 130; ++r) {
    a[r] = (r & 1) != 0;
    b[r] = (r & 2) != 0;
  }
  arr.write_col(0, a);
  arr.write_col(1, b);
  for (OpKind k : kAllOps) {
    CAPTURE(op_name(k));
    arr.exec(make_op(k, 0, 1, 2));
    for (std::size_t r = 0; r < 130; ++r) CHECK(arr.bit(r, 2) == reference_op(k, a[r], b[r]));
  }
}

TEST_CASE("in-place ops read before they write") {
  CellArray arr(70, 2);
  std::vector<bool> a(70);
  for (std::size_t r = 0; r < 70; ++r) a[r] = r % 3 == 0;
  arr.write_col(0, a);
  arr.exec(ColOp::unary(OpKind::kNot, 0, 0));
  for (std::size_t r = 0; r < 70; ++r) CHECK(arr.bit(r, 0) == !a[r]);
  arr.exec(ColOp::binary(OpKind::kXor, 0, 0, 0));
  for (std::size_t r = 0; r < 70; ++r) CHECK_FALSE(arr.bit(r, 0));
}

TEST_CASE("padding rows stay zero after NOT and SET1") {
  CellArray arr(65, 2);
  arr.exec(ColOp::set(true, 0));
  arr.exec(ColOp::unary(OpKind::kNot, 1, 1));
  const auto c0 = arr.read_col(0);
  const auto c1 = arr.read_col(1);
  CHECK(c0.size() == 65);
  CHECK(std::count(c0.begin(), c0.end(), true) == 65);
  CHECK(std::count(c1.begin(), c1.end(), true) == 65);
  arr.exec(ColOp::binary(OpKind::kNor, 0, 1, 1));
  const auto c2 = arr.read_col(1);
  CHECK(std::count(c2.begin(), c2.end(), true) == 0);
}

TEST_CASE("op and write counters") {
  CellArray arr(100, 8);
  arr.exec(ColOp::set(true, 3));
  arr.exec(ColOp::binary(OpKind::kAnd, 3, 4, 5));
  CHECK(arr.op_count() == 2);
  CHECK(arr.write_count() == 200);
  arr.write_bits(7, 0, 6, 0x2a);
  CHECK(arr.write_count() == 206);
  CHECK(arr.op_count() == 2);
}

TEST_CASE("field round trip is exact for random widths and positions") {
  std::mt19937_64 rng(7);
  CellArray arr(300, 64 + 20);
  for (int i = 0; i < 500; ++i) {
    const std::size_t width = 1 + rng() % 64;
    const std::size_t col = rng() % (arr.cols() - width + 1);
    const std::size_t row = rng() % arr.rows();
    const std::uint64_t mask = width == 64 ? ~0ULL : (1ULL << width) - 1;
    const std::uint64_t v = rng() & mask;
    arr.write_bits(row, col, width, v);
    CHECK(arr.read_bits(row, col, width) == v);
  }
}

TEST_CASE("row write and read") {
  CellArray arr(4, 5);
  const std::vector<bool> bits{true, false, true, true, false};
  arr.write_row(2, bits);
  CHECK(arr.read_row(2) == bits);
  CHECK(arr.read_row(1) == std::vector<bool>(5, false));
}

TEST_CASE("copy_rows and fill_rows move fields between rows") {
  CellArray arr(10, 16);
  for (std::size_t r = 0; r < 10; ++r) arr.write_bits(r, 0, 8, 10 + r);
  const auto ops = arr.op_count();
  arr.copy_rows(5, 0, 5, 0, 8, 8);
  CHECK(arr.op_count() == ops + 5);
  for (std::size_t r = 0; r < 5; ++r) CHECK(arr.read_bits(r, 8, 8) == 15 + r);
  arr.fill_rows(5, 5, 8, 8, 0xff);
  for (std::size_t r = 5; r < 10; ++r) CHECK(arr.read_bits(r, 8, 8) == 0xff);
  CHECK(arr.read_bits(9, 0, 8) == 19);
}

TEST_CASE("out of range access throws") {
  CellArray arr(8, 8);
  CHECK_THROWS_AS(arr.exec(ColOp::set(true, 8)), CrossbarError);
  CHECK_THROWS_AS(arr.exec(ColOp::binary(OpKind::kAnd, 0, 9, 1)), CrossbarError);
  CHECK_THROWS_AS(arr.read_row(8), CrossbarError);
  CHECK_THROWS_AS(arr.write_bits(0, 4, 5, 0), CrossbarError);
  CHECK_THROWS_AS(arr.write_col(0, std::vector<bool>(7)), CrossbarError);
  CHECK_THROWS_AS(CellArray(0, 4), CrossbarError);
}

TEST_CASE("op text form") {
  CHECK(ColOp::binary(OpKind::kAnd, 12, 40, 77).to_string() == "AND c12 c40 -> c77");
  CHECK(ColOp::set(true, 3).to_string() == "SET1 -> c3");
  CHECK(op_arity(OpKind::kNor) == 2);
}

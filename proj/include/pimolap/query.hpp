#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "pimolap/error.hpp"
#include "pimolap/expr.hpp"

namespace pimolap {

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, std::string expected, std::string excerpt);

  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }
  // The input line containing the offset.
  const std::string& excerpt() const { return excerpt_; }

 private:
  std::size_t offset_;
  std::string expected_;
  std::string excerpt_;
};

// SELECT agg (, agg)* FROM rel [WHERE pred] [GROUP BY attr (, attr)*]
//
// Keywords are case-insensitive and reserved. Attribute names may contain
// dots (`part.brand`). Comparison operands are attributes or integers
// (optionally negative); arithmetic immediates are non-negative.
QueryIR parse_query(std::string_view text);

}  // namespace pimolap

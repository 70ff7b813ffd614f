#include <algorithm>
#include <array>
#include <cctype>
#include <limits>

#include "pimolap/query.hpp"

namespace pimolap {

namespace {

constexpr std::size_t kMaxDepth = 200;
// Long AND/OR chains build deep left-leaning trees; cap their size too.
constexpr std::size_t kMaxNodes = 20000;

std::string line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  const std::size_t nl = offset == 0 ? std::string_view::npos : text.rfind('\n', offset - 1);
  const std::size_t begin = nl == std::string_view::npos ? 0 : nl + 1;
  std::size_t end = text.find('\n', offset);
  if (end == std::string_view::npos) end = text.size();
  return std::string(text.substr(begin, end - begin));
}

enum class Tok { kIdent, kInt, kSym, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;  // identifiers keep their spelling; symbols their chars
  std::uint64_t value = 0;
  std::size_t offset = 0;
};

constexpr std::array<std::string_view, 15> kKeywords = {
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "AND",   "OR",  "NOT",
    "BETWEEN", "SUM", "MIN",   "MAX",   "COUNT", "AVG", "TRUE"};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool is_keyword(std::string_view word) {
  const std::string u = upper(word);
  return std::find(kKeywords.begin(), kKeywords.end(), u) != kKeywords.end();
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) { advance(); }

  QueryIR query() {
    QueryIR ir;
    expect_keyword("SELECT");
    ir.aggregates.push_back(aggregate());
    while (accept_sym(",")) ir.aggregates.push_back(aggregate());
    expect_keyword("FROM");
    ir.relation = identifier("relation name");
    if (accept_keyword("WHERE")) ir.predicate = disjunction();
    if (accept_keyword("GROUP")) {
      expect_keyword("BY");
      ir.group_by.push_back(identifier("group-by attribute"));
      while (accept_sym(",")) ir.group_by.push_back(identifier("group-by attribute"));
    }
    if (tok_.kind != Tok::kEnd) fail("end of query");
    return ir;
  }

 private:
  [[noreturn]] void fail(const std::string& expected) const {
    throw ParseError(tok_.offset, expected, line_at(text_, tok_.offset));
  }

  void advance() {
    std::size_t i = pos_;
    while (i < text_.size() && std::isspace(static_cast<unsigned char>(text_[i]))) ++i;
    tok_ = Token{};
    tok_.offset = i;
    if (i >= text_.size()) {
      pos_ = i;
      return;
    }
    const char c = text_[i];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[j])) ||
                                  text_[j] == '_' || text_[j] == '.')) {
        ++j;
      }
      tok_.kind = Tok::kIdent;
      tok_.text = std::string(text_.substr(i, j - i));
      pos_ = j;
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      std::uint64_t v = 0;
      while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) {
        const std::uint64_t d = static_cast<std::uint64_t>(text_[j] - '0');
        if (v > (std::numeric_limits<std::uint64_t>::max() - d) / 10) {
          pos_ = j;
          fail("integer that fits in 64 bits");
        }
        v = v * 10 + d;
        ++j;
      }
      if (j < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[j])) ||
                               text_[j] == '_')) {
        tok_.offset = j;
        fail("operator or delimiter after number");
      }
      tok_.kind = Tok::kInt;
      tok_.value = v;
      tok_.text = std::string(text_.substr(i, j - i));
      pos_ = j;
      return;
    }
    static constexpr std::array<std::string_view, 3> kTwoChar = {"<>", "<=", ">="};
    for (auto sym : kTwoChar) {
      if (text_.substr(i, 2) == sym) {
        tok_.kind = Tok::kSym;
        tok_.text = std::string(sym);
        pos_ = i + 2;
        return;
      }
    }
    if (std::string_view("(),*+=<>-").find(c) != std::string_view::npos) {
      tok_.kind = Tok::kSym;
      tok_.text = std::string(1, c);
      pos_ = i + 1;
      return;
    }
    fail("a keyword, identifier, number or operator");
  }

  bool at_keyword(std::string_view kw) const {
    return tok_.kind == Tok::kIdent && upper(tok_.text) == kw;
  }
  bool accept_keyword(std::string_view kw) {
    if (!at_keyword(kw)) return false;
    advance();
    return true;
  }
  void expect_keyword(std::string_view kw) {
    if (!accept_keyword(kw)) fail(std::string(kw));
  }
  bool at_sym(std::string_view s) const { return tok_.kind == Tok::kSym && tok_.text == s; }
  bool accept_sym(std::string_view s) {
    if (!at_sym(s)) return false;
    advance();
    return true;
  }
  void expect_sym(std::string_view s) {
    if (!accept_sym(s)) fail("'" + std::string(s) + "'");
  }

  std::string identifier(const std::string& what) {
    if (tok_.kind != Tok::kIdent || is_keyword(tok_.text)) fail(what);
    if (tok_.text.back() == '.' || tok_.text.find("..") != std::string::npos) fail(what);
    std::string name = tok_.text;
    advance();
    return name;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxDepth) p_.fail("less deeply nested expression");
      if (++p_.nodes_ > kMaxNodes) p_.fail("shorter query");
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  AggregateSpec aggregate() {
    AggregateSpec spec;
    if (accept_keyword("SUM")) {
      spec.kind = AggKind::kSum;
    } else if (accept_keyword("MIN")) {
      spec.kind = AggKind::kMin;
    } else if (accept_keyword("MAX")) {
      spec.kind = AggKind::kMax;
    } else if (accept_keyword("COUNT")) {
      spec.kind = AggKind::kCount;
    } else if (accept_keyword("AVG")) {
      spec.kind = AggKind::kAvg;
    } else {
      fail("aggregate (SUM, MIN, MAX, COUNT or AVG)");
    }
    expect_sym("(");
    if (spec.kind == AggKind::kCount && accept_sym("*")) {
      expect_sym(")");
      return spec;
    }
    spec.arg = arith();
    expect_sym(")");
    return spec;
  }

  ArithExpr arith() {
    DepthGuard guard(*this);
    ArithExpr e = term();
    while (accept_sym("+")) e = ArithExpr::add(std::move(e), term());
    return e;
  }

  ArithExpr term() {
    DepthGuard guard(*this);
    ArithExpr e = factor();
    while (accept_sym("*")) e = ArithExpr::mul(std::move(e), factor());
    return e;
  }

  ArithExpr factor() {
    if (accept_sym("(")) {
      ArithExpr e = arith();
      expect_sym(")");
      return e;
    }
    if (tok_.kind == Tok::kInt) {
      const std::uint64_t v = tok_.value;
      advance();
      return ArithExpr::immediate(v);
    }
    return ArithExpr::attribute(identifier("attribute, integer or '('"));
  }

  PredicateExpr disjunction() {
    DepthGuard guard(*this);
    PredicateExpr e = conjunction();
    while (accept_keyword("OR")) e = PredicateExpr::disj(std::move(e), conjunction());
    return e;
  }

  PredicateExpr conjunction() {
    PredicateExpr e = unary();
    while (accept_keyword("AND")) e = PredicateExpr::conj(std::move(e), unary());
    return e;
  }

  PredicateExpr unary() {
    DepthGuard guard(*this);
    if (accept_keyword("NOT")) return PredicateExpr::negate(unary());
    if (accept_keyword("TRUE")) return PredicateExpr::truth();
    if (accept_sym("(")) {
      PredicateExpr e = disjunction();
      expect_sym(")");
      return e;
    }
    return comparison();
  }

  std::int64_t signed_integer() {
    const bool neg = accept_sym("-");
    if (tok_.kind != Tok::kInt) fail("integer");
    const std::uint64_t v = tok_.value;
    const std::uint64_t limit =
        neg ? std::uint64_t{1} << 63 : static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
    if (v > limit) fail("integer within the signed 64-bit range");
    advance();
    if (neg) return v == (std::uint64_t{1} << 63) ? std::numeric_limits<std::int64_t>::min()
                                                   : -static_cast<std::int64_t>(v);
    return static_cast<std::int64_t>(v);
  }

  PredicateExpr comparison() {
    std::string attr = identifier("attribute, NOT or '('");
    if (accept_keyword("BETWEEN")) {
      const std::int64_t lo = signed_integer();
      expect_keyword("AND");
      const std::int64_t hi = signed_integer();
      return PredicateExpr::conj(PredicateExpr::compare(attr, CmpOp::kGe, lo),
                                 PredicateExpr::compare(attr, CmpOp::kLe, hi));
    }
    CmpOp op;
    if (accept_sym("=")) {
      op = CmpOp::kEq;
    } else if (accept_sym("<>")) {
      op = CmpOp::kNe;
    } else if (accept_sym("<=")) {
      op = CmpOp::kLe;
    } else if (accept_sym(">=")) {
      op = CmpOp::kGe;
    } else if (accept_sym("<")) {
      op = CmpOp::kLt;
    } else if (accept_sym(">")) {
      op = CmpOp::kGt;
    } else {
      fail("comparison operator (=, <>, <, <=, >, >=) or BETWEEN");
    }
    if (tok_.kind == Tok::kIdent) {
      return PredicateExpr::compare(std::move(attr), op, identifier("attribute or integer"));
    }
    return PredicateExpr::compare(std::move(attr), op, signed_integer());
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  Token tok_;
  std::size_t depth_ = 0;
  std::size_t nodes_ = 0;
};

}  // namespace

ParseError::ParseError(std::size_t offset, std::string expected, std::string excerpt)
    : Error("parse error at offset " + std::to_string(offset) + ": expected " + expected +
            (excerpt.empty() ? std::string() : "\n  " + excerpt)),
      offset_(offset),
      expected_(std::move(expected)),
      excerpt_(std::move(excerpt)) {}

QueryIR parse_query(std::string_view text) {
  Parser p(text);
  return p.query();
}

}  // namespace pimolap

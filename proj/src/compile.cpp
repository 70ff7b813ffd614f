#include <algorithm>
#include <bit>

#include "pimolap/error.hpp"
#include "pimolap/isa.hpp"

namespace pimolap {

namespace {

std::vector<Signal> column_signals(const ColumnRange& cols) {
  std::vector<Signal> out;
  for (std::uint32_t i = 0; i < cols.width; ++i) out.push_back(Signal::column(cols.begin + i));
  return out;
}

std::vector<Signal> constant_signals(std::uint64_t value, std::uint32_t width) {
  std::vector<Signal> out;
  for (std::uint32_t i = 0; i < width; ++i) out.push_back(Signal::constant((value >> i) & 1));
  return out;
}

std::vector<std::uint32_t> columns_of(const SlotCols& s) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < s.width(); ++i) out.push_back(s.col(i));
  return out;
}

std::uint32_t first_attribute_slot(const RelationLayout& layout, const PredicateExpr& e) {
  if (e.kind == PredicateExpr::Kind::kCmp) return layout.place(e.cmp.attr).slot;
  for (const auto& c : e.children) {
    std::set<std::string> attrs;
    c.collect_attributes(attrs);
    if (!attrs.empty()) return first_attribute_slot(layout, c);
  }
  return 0;
}

class PredicateCompiler {
 public:
  PredicateCompiler(ProgramBuilder& b) : b_(b), layout_(b.layout()) {}

  // Returns a builder temp holding the node's value.
  SlotCols node(const PredicateExpr& e, std::uint32_t pref) {
    switch (e.kind) {
      case PredicateExpr::Kind::kTrue: {
        SlotCols t = b_.temp(pref, 1);
        b_.emit(pref, ColOp::set(true, t.col(0)));
        return t;
      }
      case PredicateExpr::Kind::kCmp: return comparison(e.cmp);
      case PredicateExpr::Kind::kNot: {
        SlotCols c = node(e.children.at(0), pref);
        b_.emit(c.slot, ColOp::unary(OpKind::kNot, c.col(0), c.col(0)));
        return c;
      }
      case PredicateExpr::Kind::kAnd:
      case PredicateExpr::Kind::kOr: {
        SlotCols l = node(e.children.at(0), pref);
        SlotCols r = node(e.children.at(1), l.slot);
        SlotCols r2 = b_.bring(r, l.slot);
        const OpKind k = e.kind == PredicateExpr::Kind::kAnd ? OpKind::kAnd : OpKind::kOr;
        b_.emit(l.slot, ColOp::binary(k, l.col(0), r2.col(0), l.col(0)));
        b_.drop(r);
        if (!(r2 == r)) b_.drop(r2);
        return l;
      }
    }
    throw CompileError("malformed predicate");
  }

 private:
  SlotCols comparison(const Comparison& cmp) {
    const AttributeSpec& lspec = layout_.attribute(cmp.attr);
    const AttributePlacement& lp = layout_.place(cmp.attr);
    const std::uint32_t slot = lp.slot;
    const std::uint32_t w = lspec.width;
    SlotCols r = b_.temp(slot, 1);
    std::vector<SlotCols> scratch;

    std::vector<Signal> av = column_signals(lp.cols);
    std::vector<Signal> bv;
    if (!cmp.rhs_is_attr()) {
      const std::int64_t v = std::get<std::int64_t>(cmp.rhs);
      if (!fits(lspec, v)) {
        // The immediate lies outside the attribute's range, so the outcome
        // is the same for every record.
        const bool above = v > max_value(lspec);
        bool res = false;
        switch (cmp.op) {
          case CmpOp::kEq: res = false; break;
          case CmpOp::kNe: res = true; break;
          case CmpOp::kLt:
          case CmpOp::kLe: res = above; break;
          case CmpOp::kGt:
          case CmpOp::kGe: res = !above; break;
        }
        b_.emit(slot, ColOp::set(res, r.col(0)));
        return r;
      }
      std::uint64_t bits = encode(lspec, v);
      if (lspec.is_signed()) bits ^= std::uint64_t{1} << (w - 1);
      bv = constant_signals(bits, w);
    } else {
      const std::string& other = std::get<std::string>(cmp.rhs);
      const AttributeSpec& rspec = layout_.attribute(other);
      if (rspec.width != w || rspec.sign != lspec.sign) {
        throw CompileError("cannot compare '" + cmp.attr + "' (" + std::to_string(w) +
                           " bits) with '" + other + "' (" + std::to_string(rspec.width) +
                           " bits): widths and signedness must match");
      }
      const AttributePlacement& rp = layout_.place(other);
      SlotCols rc = b_.bring(SlotCols{rp.slot, rp.cols}, slot);
      if (rc.slot != rp.slot || !(rc.cols == rp.cols)) scratch.push_back(rc);
      bv = column_signals(rc.cols);
      if (lspec.is_signed()) {
        SlotCols t = b_.temp(slot, 1);
        scratch.push_back(t);
        bv[w - 1] = b_.gate(slot, OpKind::kNot, bv[w - 1], t.col(0));
      }
    }
    if (lspec.is_signed()) {
      // Bias the sign bit so unsigned order equals signed order.
      SlotCols t = b_.temp(slot, 1);
      scratch.push_back(t);
      av[w - 1] = b_.gate(slot, OpKind::kNot, av[w - 1], t.col(0));
    }
    const Signal res = emit_compare(b_, slot, av, bv, cmp.op, r.col(0));
    b_.materialize(slot, res, r.col(0));
    for (const auto& s : scratch) b_.drop(s);
    return r;
  }

  ProgramBuilder& b_;
  const RelationLayout& layout_;
};

class ArithCompiler {
 public:
  explicit ArithCompiler(ProgramBuilder& b) : b_(b), layout_(b.layout()) {}

  struct Value {
    std::vector<Signal> bits;
    std::optional<SlotCols> owned;
  };

  Value value(const ArithExpr& e, std::uint32_t slot) {
    const std::uint32_t width = infer_width(e, layout_.schema);
    switch (e.kind) {
      case ArithExpr::Kind::kAttr: {
        const AttributeSpec& spec = layout_.attribute(e.attr);
        if (spec.is_signed()) {
          throw CompileError("signed attribute '" + e.attr +
                             "' is only supported as a bare aggregate argument");
        }
        const AttributePlacement& p = layout_.place(e.attr);
        SlotCols src{p.slot, p.cols};
        SlotCols here = b_.bring(src, slot);
        Value v{column_signals(here.cols), std::nullopt};
        if (!(here == src)) v.owned = here;
        v.bits.resize(width, Signal::zero());
        return v;
      }
      case ArithExpr::Kind::kImm:
        return Value{constant_signals(e.imm, width), std::nullopt};
      case ArithExpr::Kind::kAdd:
      case ArithExpr::Kind::kMul: {
        SlotCols out = b_.temp(slot, width);
        compute_into(e, slot, columns_of(out));
        return Value{column_signals(out.cols), out};
      }
    }
    throw CompileError("malformed arithmetic expression");
  }

  void release(const Value& v) {
    if (v.owned) b_.drop(*v.owned);
  }

  void compute_into(const ArithExpr& e, std::uint32_t slot, const std::vector<std::uint32_t>& dest) {
    const std::size_t width = dest.size();
    auto fit = [width](std::vector<Signal> bits) {
      bits.resize(width, Signal::zero());
      return bits;
    };
    if (e.kind == ArithExpr::Kind::kAttr || e.kind == ArithExpr::Kind::kImm) {
      Value v = value(e, slot);
      const auto bits = fit(v.bits);
      for (std::size_t i = 0; i < width; ++i) b_.materialize(slot, bits[i], dest[i]);
      release(v);
      return;
    }
    Value a = value(e.children.at(0), slot);
    Value c = value(e.children.at(1), slot);
    std::vector<Signal> acc;
    if (e.kind == ArithExpr::Kind::kAdd) {
      acc = fit(a.bits);
      emit_add(b_, slot, acc, fit(c.bits), dest);
    } else {
      acc.assign(width, Signal::zero());
      const std::vector<Signal>& lhs = a.bits;
      const std::vector<Signal>& rhs = c.bits;
      for (std::size_t j = 0; j < rhs.size() && j < width; ++j) {
        const Signal bj = rhs[j];
        if (bj.is_const() && !bj.value()) continue;
        const std::size_t span = std::min(lhs.size(), width - j);
        std::vector<Signal> addend(j, Signal::zero());
        std::optional<SlotCols> pp;
        if (bj.is_const()) {
          addend.insert(addend.end(), lhs.begin(), lhs.begin() + span);
        } else {
          pp = b_.temp(slot, static_cast<std::uint32_t>(span));
          for (std::size_t i = 0; i < span; ++i) {
            addend.push_back(b_.gate(slot, OpKind::kAnd, lhs[i], bj, pp->col(i)));
          }
        }
        emit_add(b_, slot, acc, addend, dest, j);
        if (pp) b_.drop(*pp);
      }
    }
    for (std::size_t i = 0; i < width; ++i) b_.materialize(slot, acc[i], dest[i]);
    release(a);
    release(c);
  }

 private:
  ProgramBuilder& b_;
  const RelationLayout& layout_;
};

}  // namespace

std::uint32_t infer_width(const ArithExpr& expr, const Schema& schema) {
  if (expr.width > 64) {
    throw CompileError("declared width " + std::to_string(expr.width) + " exceeds 64 bits");
  }
  if (expr.width != 0) return expr.width;
  std::uint32_t w = 0;
  switch (expr.kind) {
    case ArithExpr::Kind::kAttr: w = schema[attribute_index(schema, expr.attr)].width; break;
    case ArithExpr::Kind::kImm: w = std::max<std::uint32_t>(1, std::bit_width(expr.imm)); break;
    case ArithExpr::Kind::kAdd:
      w = std::max(infer_width(expr.children.at(0), schema),
                   infer_width(expr.children.at(1), schema)) + 1;
      break;
    case ArithExpr::Kind::kMul:
      w = infer_width(expr.children.at(0), schema) + infer_width(expr.children.at(1), schema);
      break;
  }
  if (w > 64) {
    throw CompileError("expression " + expr.to_string() + " needs " + std::to_string(w) +
                       " bits; declare a width of at most 64");
  }
  return w;
}

std::uint32_t natural_slot(const RelationLayout& layout, const ArithExpr& expr) {
  std::set<std::string> attrs;
  expr.collect_attributes(attrs);
  std::uint64_t bits[2] = {0, 0};
  for (const auto& a : attrs) {
    const auto& p = layout.place(a);
    bits[p.slot] += p.cols.width;
  }
  return bits[1] > bits[0] ? 1 : 0;
}

PimProgram compile_predicate(PimMemory& memory, const PredicateExpr& pred,
                             std::optional<std::uint32_t> home_slot,
                             std::optional<SlotCols> base) {
  ProgramBuilder b(memory);
  const RelationLayout& layout = memory.layout();
  const std::uint32_t home =
      home_slot.value_or(base ? base->slot : first_attribute_slot(layout, pred));
  if (home >= layout.slot_count()) throw CompileError("no array slot " + std::to_string(home));

  PredicateCompiler pc(b);
  SlotCols res = pc.node(pred, home);
  SlotCols here = b.bring(res, home);
  SlotCols guard = base ? b.bring(*base, home) : SlotCols{home, {layout.validity_col(), 1}};
  SlotCols out = b.output(home, 1);
  b.emit(home, ColOp::binary(OpKind::kAnd, here.col(0), guard.col(0), out.col(0)));
  return b.finish(out);
}

PimProgram compile_arith(PimMemory& memory, const ArithExpr& expr,
                         std::optional<std::uint32_t> home_slot) {
  ProgramBuilder b(memory);
  const RelationLayout& layout = memory.layout();
  const std::uint32_t slot = home_slot.value_or(natural_slot(layout, expr));
  const std::uint32_t width = infer_width(expr, layout.schema);
  SlotCols out = b.output(slot, width);
  if (expr.kind == ArithExpr::Kind::kAttr) {
    // A bare attribute keeps its signedness; copy it verbatim.
    const AttributePlacement& p = layout.place(expr.attr);
    SlotCols here = b.bring(SlotCols{p.slot, p.cols}, slot);
    for (std::uint32_t i = 0; i < width; ++i) {
      const Signal s = i < here.width() ? Signal::column(here.col(i)) : Signal::zero();
      b.materialize(slot, s, out.col(i));
    }
  } else {
    ArithCompiler ac(b);
    ac.compute_into(expr, slot, columns_of(out));
  }
  return b.finish(out);
}

}  // namespace pimolap

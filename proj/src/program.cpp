#include <algorithm>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "pimolap/error.hpp"
#include "pimolap/isa.hpp"

namespace pimolap {

std::size_t PimProgram::op_count() const {
  return std::count_if(steps.begin(), steps.end(),
                       [](const Step& s) { return std::holds_alternative<ArrayOp>(s); });
}

std::size_t PimProgram::copy_count() const { return steps.size() - op_count(); }

std::uint64_t PimProgram::copy_bits_per_page(std::uint32_t rows) const {
  std::uint64_t bits = 0;
  for (const auto& s : steps) {
    if (const auto* c = std::get_if<CrossCopy>(&s)) bits += 2ull * rows * c->src.width;
  }
  return bits;
}

std::string PimProgram::to_assembly() const {
  std::ostringstream out;
  for (const auto& s : steps) {
    if (const auto* op = std::get_if<ArrayOp>(&s)) {
      if (op->slot != 0) out << "[x" << op->slot << "] ";
      out << op->op.to_string() << '\n';
    } else {
      const auto& c = std::get<CrossCopy>(s);
      out << "XCOPY x" << c.src_slot << ":c" << c.src.begin << " -> x" << c.dst_slot << ":c"
          << c.dst_begin << " w" << c.src.width << '\n';
    }
  }
  return out.str();
}

void validate_program(const PimProgram& program, const PimMemory& memory) {
  const RelationLayout& layout = memory.layout();
  auto allowed = [&](std::uint32_t slot, std::uint32_t col, bool is_dest) {
    if (slot >= layout.slot_count()) return false;
    if (col == layout.validity_col()) return !is_dest;
    if (memory.scratch(slot).is_allocated(col)) return true;
    for (const auto& p : layout.placement) {
      if (p.slot == slot && p.cols.contains(col)) return true;
    }
    return false;
  };
  auto fail = [](const std::string& what) {
    throw CompileError("invalid program step '" + what + "'");
  };
  for (const auto& s : program.steps) {
    if (const auto* op = std::get_if<ArrayOp>(&s)) {
      for (int i = 0; i < op_arity(op->op.kind); ++i) {
        if (!allowed(op->slot, op->op.srcs[i], false)) fail(op->op.to_string());
      }
      if (!allowed(op->slot, op->op.dest, true)) fail(op->op.to_string());
    } else {
      const auto& c = std::get<CrossCopy>(s);
      for (std::uint32_t i = 0; i < c.src.width; ++i) {
        if (!allowed(c.src_slot, c.src.begin + i, false) ||
            !allowed(c.dst_slot, c.dst_begin + i, true) || c.src_slot == c.dst_slot) {
          fail("XCOPY");
        }
      }
    }
  }
}

void inter_array_copy(PimMemory& memory, std::uint32_t src_slot, ColumnRange src,
                      std::uint32_t dst_slot, std::uint32_t dst_begin, std::size_t page) {
  if (memory.layout().split != Split::kTwoXb) {
    throw CompileError("inter-array copy requires a TWO_XB layout");
  }
  if (src_slot == dst_slot) throw CompileError("inter-array copy within one array");
  CellArray& from = memory.array(page, src_slot);
  CellArray& to = memory.array(page, dst_slot);
  for (std::uint32_t i = 0; i < src.width; ++i) {
    to.write_col(dst_begin + i, from.read_col(src.begin + i));
  }
  const std::uint64_t bits = std::uint64_t{from.rows()} * src.width;
  memory.charge(Channel::kInterArrayRead, bits);
  memory.charge(Channel::kInterArrayWrite, bits);
}

void exec_program(PimMemory& memory, const PimProgram& program,
                  std::optional<std::span<const std::size_t>> pages) {
  std::vector<std::size_t> selected;
  if (pages) {
    selected.assign(pages->begin(), pages->end());
  } else {
    selected.resize(memory.page_count());
    std::iota(selected.begin(), selected.end(), 0);
  }
  auto run_page = [&](std::size_t page) {
    for (const auto& s : program.steps) {
      if (const auto* op = std::get_if<ArrayOp>(&s)) {
        memory.array(page, op->slot).exec(op->op);
      } else {
        const auto& c = std::get<CrossCopy>(s);
        inter_array_copy(memory, c.src_slot, c.src, c.dst_slot, c.dst_begin, page);
      }
    }
  };

  const unsigned threads = std::min<std::size_t>(memory.parallelism(), selected.size());
  if (threads <= 1) {
    for (std::size_t p : selected) run_page(p);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < selected.size(); i += threads) run_page(selected[i]);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

void release(PimMemory& memory, PimProgram& program) {
  for (const auto& s : program.scratch_used) memory.scratch(s.slot).free(s.cols);
  program.scratch_used.clear();
}

void release_temps(PimMemory& memory, PimProgram& program) {
  std::vector<SlotCols> kept;
  for (const auto& s : program.scratch_used) {
    if (s == program.result) {
      kept.push_back(s);
    } else {
      memory.scratch(s.slot).free(s.cols);
    }
  }
  program.scratch_used = std::move(kept);
}

ProgramBuilder::ProgramBuilder(PimMemory& memory) : memory_(memory) {}

ProgramBuilder::~ProgramBuilder() {
  if (finished_) return;
  for (const auto& s : owned_) memory_.scratch(s.slot).free(s.cols);
  for (const auto& s : outputs_) memory_.scratch(s.slot).free(s.cols);
}

SlotCols ProgramBuilder::temp(std::uint32_t slot, std::uint32_t width) {
  for (auto it = free_.begin(); it != free_.end(); ++it) {
    if (it->slot == slot && it->cols.width == width) {
      SlotCols s = *it;
      free_.erase(it);
      return s;
    }
  }
  SlotCols s{slot, memory_.scratch(slot).alloc(width)};
  owned_.push_back(s);
  return s;
}

void ProgramBuilder::drop(const SlotCols& cols) {
  if (std::find(owned_.begin(), owned_.end(), cols) != owned_.end() &&
      std::find(free_.begin(), free_.end(), cols) == free_.end()) {
    free_.push_back(cols);
  }
}

SlotCols ProgramBuilder::output(std::uint32_t slot, std::uint32_t width) {
  SlotCols s{slot, memory_.scratch(slot).alloc(width)};
  outputs_.push_back(s);
  return s;
}

void ProgramBuilder::emit(std::uint32_t slot, const ColOp& op) {
  program_.steps.push_back(ArrayOp{slot, op});
}

Signal ProgramBuilder::gate(std::uint32_t slot, OpKind kind, Signal x, Signal y,
                            std::uint32_t dest) {
  auto not_of = [&](Signal s) -> Signal {
    if (s.is_const()) return Signal::constant(!s.value());
    emit(slot, ColOp::unary(OpKind::kNot, s.col, dest));
    return Signal::column(dest);
  };
  auto binary = [&](OpKind k) {
    emit(slot, ColOp::binary(k, x.col, y.col, dest));
    return Signal::column(dest);
  };
  switch (kind) {
    case OpKind::kNot: return not_of(x);
    case OpKind::kCopy: return x;
    case OpKind::kSet0: return Signal::zero();
    case OpKind::kSet1: return Signal::one();
    case OpKind::kAnd:
      if ((x.is_const() && !x.value()) || (y.is_const() && !y.value())) return Signal::zero();
      if (x.is_const()) return y;
      if (y.is_const()) return x;
      if (x == y) return x;
      return binary(OpKind::kAnd);
    case OpKind::kOr:
      if ((x.is_const() && x.value()) || (y.is_const() && y.value())) return Signal::one();
      if (x.is_const()) return y;
      if (y.is_const()) return x;
      if (x == y) return x;
      return binary(OpKind::kOr);
    case OpKind::kXor:
      if (x.is_const() && y.is_const()) return Signal::constant(x.value() != y.value());
      if (x.is_const()) return x.value() ? not_of(y) : y;
      if (y.is_const()) return y.value() ? not_of(x) : x;
      if (x == y) return Signal::zero();
      return binary(OpKind::kXor);
    case OpKind::kNor:
      if ((x.is_const() && x.value()) || (y.is_const() && y.value())) return Signal::zero();
      if (x.is_const()) return not_of(y);
      if (y.is_const()) return not_of(x);
      if (x == y) return not_of(x);
      return binary(OpKind::kNor);
  }
  return Signal::zero();
}

Signal ProgramBuilder::settle(std::uint32_t slot, Signal s, std::uint32_t dest) {
  if (s.is_const() || s.col == dest) return s;
  emit(slot, ColOp::unary(OpKind::kCopy, s.col, dest));
  return Signal::column(dest);
}

void ProgramBuilder::materialize(std::uint32_t slot, Signal s, std::uint32_t dest) {
  if (s.is_const()) {
    emit(slot, ColOp::set(s.value(), dest));
  } else if (s.col != dest) {
    emit(slot, ColOp::unary(OpKind::kCopy, s.col, dest));
  }
}

SlotCols ProgramBuilder::bring(const SlotCols& value, std::uint32_t slot) {
  if (value.slot == slot) return value;
  SlotCols copy = temp(slot, value.width());
  program_.steps.push_back(CrossCopy{value.slot, value.cols, slot, copy.cols.begin});
  return copy;
}

PimProgram ProgramBuilder::finish(const SlotCols& result) {
  finished_ = true;
  program_.result = result;
  program_.scratch_used = owned_;
  program_.scratch_used.insert(program_.scratch_used.end(), outputs_.begin(), outputs_.end());
  return std::move(program_);
}

void emit_add(ProgramBuilder& b, std::uint32_t slot, std::vector<Signal>& acc,
              const std::vector<Signal>& addend, const std::vector<std::uint32_t>& dest,
              std::size_t from) {
  const std::size_t width = dest.size();
  const SlotCols t = b.temp(slot, 1);
  const SlotCols g = b.temp(slot, 1);
  const SlotCols tc = b.temp(slot, 1);
  const SlotCols carry[2] = {b.temp(slot, 1), b.temp(slot, 1)};
  int cur = 0;
  Signal c = Signal::zero();
  for (std::size_t i = from; i < width; ++i) {
    const Signal a = acc[i];
    const Signal x = i < addend.size() ? addend[i] : Signal::zero();
    if (x.is_const() && !x.value() && c.is_const() && !c.value()) {
      // Nothing left to add into the remaining bits.
      if (i >= addend.size()) break;
      continue;
    }
    const Signal tt = b.gate(slot, OpKind::kXor, a, x, t.col(0));
    Signal nc = Signal::zero();
    if (i + 1 < width) {
      const Signal gg = b.gate(slot, OpKind::kAnd, a, x, g.col(0));
      const Signal tcc = b.gate(slot, OpKind::kAnd, tt, c, tc.col(0));
      nc = b.gate(slot, OpKind::kOr, gg, tcc, carry[1 - cur].col(0));
      nc = b.settle(slot, nc, carry[1 - cur].col(0));
    }
    const Signal s = b.gate(slot, OpKind::kXor, tt, c, dest[i]);
    acc[i] = b.settle(slot, s, dest[i]);
    c = nc;
    cur = 1 - cur;
  }
  b.drop(t);
  b.drop(g);
  b.drop(tc);
  b.drop(carry[0]);
  b.drop(carry[1]);
}

Signal emit_compare(ProgramBuilder& b, std::uint32_t slot, const std::vector<Signal>& av,
                    const std::vector<Signal>& bv, CmpOp op, std::uint32_t dest) {
  const bool need_lt = op != CmpOp::kEq && op != CmpOp::kNe;
  const bool eq_final = op == CmpOp::kEq || op == CmpOp::kNe || op == CmpOp::kLe ||
                        op == CmpOp::kGt;
  const SlotCols eq_col = b.temp(slot, 1);
  const SlotCols lt_col = b.temp(slot, 1);
  const SlotCols t = b.temp(slot, 1);
  const SlotCols u = b.temp(slot, 1);
  Signal eq = Signal::one();
  Signal lt = Signal::zero();
  for (std::size_t k = av.size(); k-- > 0;) {
    const Signal a = av[k];
    const Signal bb = bv[k];
    if (need_lt) {
      // lt |= eq & b & !a
      Signal x = b.gate(slot, OpKind::kAnd, bb, eq, t.col(0));
      if (!(x.is_const() && !x.value())) {
        const Signal na = b.gate(slot, OpKind::kNot, a, u.col(0));
        x = b.gate(slot, OpKind::kAnd, x, na, t.col(0));
        lt = b.settle(slot, b.gate(slot, OpKind::kOr, lt, x, lt_col.col(0)), lt_col.col(0));
      }
    }
    if (k > 0 || eq_final) {
      // eq &= !(a ^ b)
      Signal same;
      if (bb.is_const()) {
        same = bb.value() ? a : b.gate(slot, OpKind::kNot, a, t.col(0));
      } else if (a.is_const()) {
        same = a.value() ? bb : b.gate(slot, OpKind::kNot, bb, t.col(0));
      } else {
        same = b.gate(slot, OpKind::kXor, a, bb, t.col(0));
        same = b.gate(slot, OpKind::kNot, same, t.col(0));
      }
      eq = b.settle(slot, b.gate(slot, OpKind::kAnd, eq, same, eq_col.col(0)), eq_col.col(0));
    }
  }
  Signal r;
  switch (op) {
    case CmpOp::kEq: r = eq; break;
    case CmpOp::kNe: r = b.gate(slot, OpKind::kNot, eq, dest); break;
    case CmpOp::kLt: r = lt; break;
    case CmpOp::kLe: r = b.gate(slot, OpKind::kOr, lt, eq, dest); break;
    case CmpOp::kGt: r = b.gate(slot, OpKind::kNor, lt, eq, dest); break;
    case CmpOp::kGe: r = b.gate(slot, OpKind::kNot, lt, dest); break;
  }
  r = b.settle(slot, r, dest);
  b.drop(eq_col);
  b.drop(lt_col);
  b.drop(t);
  b.drop(u);
  return r;
}

}  // namespace pimolap

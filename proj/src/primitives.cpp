#include <algorithm>
#include <bit>
#include <exception>
#include <mutex>
#include <thread>

#include "pimolap/error.hpp"
#include "pimolap/isa.hpp"

namespace pimolap {

namespace {

template <typename Fn>
void for_each_page(PimMemory& memory, Fn&& fn) {
  const std::size_t pages = memory.page_count();
  const unsigned threads = std::min<std::size_t>(memory.parallelism(), pages);
  if (threads <= 1) {
    for (std::size_t p = 0; p < pages; ++p) fn(p);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t p = t; p < pages; p += threads) fn(p);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

void run_steps(PimMemory& memory, std::span<const Step> steps, std::size_t page) {
  for (const auto& s : steps) {
    if (const auto* op = std::get_if<ArrayOp>(&s)) {
      memory.array(page, op->slot).exec(op->op);
    } else {
      const auto& c = std::get<CrossCopy>(s);
      inter_array_copy(memory, c.src_slot, c.src, c.dst_slot, c.dst_begin, page);
    }
  }
}

std::uint32_t ceil_log2(std::uint64_t n) {
  return n <= 1 ? 0 : static_cast<std::uint32_t>(std::bit_width(n - 1));
}

std::uint64_t identity(AggKind kind, std::uint32_t width) {
  return kind == AggKind::kMin ? low_mask(width) : 0;
}

std::int64_t sign_extend(std::uint64_t v, std::uint32_t width) {
  if (width >= 64) return static_cast<std::int64_t>(v);
  const std::uint64_t m = std::uint64_t{1} << (width - 1);
  return static_cast<std::int64_t>((v ^ m) - m);
}

// The reduction tree for PURE_PIM: `init` widens the masked value into the
// accumulator, `step` combines accumulator rows with partner rows moved
// into `partner`.
struct TreePrograms {
  PimProgram init;
  PimProgram step;
  SlotCols acc;
  SlotCols partner;
  std::vector<SlotCols> scratch;
};

TreePrograms build_tree(PimMemory& memory, const SlotCols& source, AggKind kind, bool sign_fill,
                        std::uint32_t width) {
  ProgramBuilder b(memory);
  const std::uint32_t slot = source.slot;
  const SlotCols acc = b.output(slot, width);
  const SlotCols partner = b.output(slot, width);

  for (std::uint32_t i = 0; i < width; ++i) {
    if (i < source.width()) {
      b.emit(slot, ColOp::unary(OpKind::kCopy, source.col(i), acc.col(i)));
    } else if (sign_fill) {
      b.emit(slot, ColOp::unary(OpKind::kCopy, source.col(source.width() - 1), acc.col(i)));
    } else {
      b.emit(slot, ColOp::set(false, acc.col(i)));
    }
  }
  // The init part is exactly one op per accumulator bit.
  const std::size_t split = width;
  PimProgram whole;

  std::vector<Signal> accs;
  std::vector<Signal> parts;
  std::vector<std::uint32_t> dest;
  for (std::uint32_t i = 0; i < width; ++i) {
    accs.push_back(Signal::column(acc.col(i)));
    parts.push_back(Signal::column(partner.col(i)));
    dest.push_back(acc.col(i));
  }
  if (kind == AggKind::kSum || kind == AggKind::kCount) {
    emit_add(b, slot, accs, parts, dest);
    for (std::uint32_t i = 0; i < width; ++i) b.materialize(slot, accs[i], dest[i]);
  } else {
    // take = partner beats acc; acc = take ? partner : acc.
    const SlotCols take = b.temp(slot, 1);
    const CmpOp op = kind == AggKind::kMin ? CmpOp::kLt : CmpOp::kGt;
    const Signal t = emit_compare(b, slot, parts, accs, op, take.col(0));
    b.materialize(slot, t, take.col(0));
    const SlotCols keep = b.temp(slot, 1);
    const SlotCols x = b.temp(slot, 1);
    b.emit(slot, ColOp::unary(OpKind::kNot, take.col(0), keep.col(0)));
    for (std::uint32_t i = 0; i < width; ++i) {
      b.emit(slot, ColOp::binary(OpKind::kAnd, take.col(0), partner.col(i), x.col(0)));
      b.emit(slot, ColOp::binary(OpKind::kAnd, keep.col(0), acc.col(i), acc.col(i)));
      b.emit(slot, ColOp::binary(OpKind::kOr, x.col(0), acc.col(i), acc.col(i)));
    }
  }
  whole = b.finish(acc);

  TreePrograms t;
  t.acc = acc;
  t.partner = partner;
  t.scratch = whole.scratch_used;
  t.init.steps.assign(whole.steps.begin(), whole.steps.begin() + split);
  t.step.steps.assign(whole.steps.begin() + split, whole.steps.end());
  t.init.result = acc;
  t.step.result = acc;
  return t;
}

void free_all(PimMemory& memory, const std::vector<SlotCols>& ranges) {
  for (const auto& s : ranges) memory.scratch(s.slot).free(s.cols);
}

// Runs the row-halving tree on one page; the result lands in acc row 0.
void reduce_page(PimMemory& memory, const TreePrograms& tree, std::size_t page, AggKind kind,
                 std::uint32_t width) {
  run_steps(memory, tree.init.steps, page);
  CellArray& array = memory.array(page, tree.acc.slot);
  std::size_t n = array.rows();
  while (n > 1) {
    const std::size_t h = (n + 1) / 2;
    array.copy_rows(h, 0, n - h, tree.acc.cols.begin, tree.partner.cols.begin, width);
    array.fill_rows(n - h, h - (n - h), tree.partner.cols.begin, width, identity(kind, width));
    run_steps(memory, tree.step.steps, page);
    n = h;
  }
}

std::uint64_t tree_row_ops(std::size_t rows) {
  std::uint64_t ops = 0;
  std::size_t n = rows;
  while (n > 1) {
    const std::size_t h = (n + 1) / 2;
    ops += (n - h) + (2 * h - n);
    n = h;
  }
  return ops;
}

std::size_t tree_levels(std::size_t rows) {
  std::size_t levels = 0;
  for (std::size_t n = rows; n > 1; n = (n + 1) / 2) ++levels;
  return levels;
}

}  // namespace

std::vector<bool> read_filter_bits(PimMemory& memory, const SlotCols& result) {
  std::vector<bool> bits;
  bits.reserve(memory.record_count());
  for (std::size_t p = 0; p < memory.page_count(); ++p) {
    const auto col = memory.read_column(p, result.slot, result.col(0), Channel::kMask);
    bits.insert(bits.end(), col.begin(), col.end());
  }
  return bits;
}

MaskedValue mask_attribute(PimMemory& memory, const SlotCols& source, const SlotCols& mask,
                           AggKind kind, bool is_signed) {
  if (kind == AggKind::kAvg) throw CompileError("AVG is composed from SUM and COUNT");
  if (mask.width() != 1) throw CompileError("mask must be one column wide");
  const bool biased = is_signed && (kind == AggKind::kMin || kind == AggKind::kMax);
  ProgramBuilder b(memory);
  const std::uint32_t slot = source.slot;
  const SlotCols m = b.bring(mask, slot);
  const SlotCols out = b.output(slot, source.width());
  std::uint32_t sel = m.col(0);
  OpKind k = OpKind::kAnd;
  if (kind == AggKind::kMin) {
    const SlotCols nm = b.temp(slot, 1);
    b.emit(slot, ColOp::unary(OpKind::kNot, m.col(0), nm.col(0)));
    sel = nm.col(0);
    k = OpKind::kOr;
  }
  for (std::uint32_t i = 0; i < source.width(); ++i) {
    std::uint32_t src = source.col(i);
    if (biased && i + 1 == source.width()) {
      b.emit(slot, ColOp::unary(OpKind::kNot, src, out.col(i)));
      src = out.col(i);
    }
    b.emit(slot, ColOp::binary(k, src, sel, out.col(i)));
  }
  PimProgram prog = b.finish(out);
  exec_program(memory, prog);
  release_temps(memory, prog);
  return MaskedValue{out, is_signed, biased};
}

void release(PimMemory& memory, const MaskedValue& masked) {
  memory.scratch(masked.cols.slot).free(masked.cols.cols);
}

std::string_view circuit_name(Circuit c) {
  return c == Circuit::kPurePim ? "pure" : "peripheral";
}

Circuit parse_circuit(std::string_view text) {
  if (text == "pure" || text == "pure_pim") return Circuit::kPurePim;
  if (text == "peripheral") return Circuit::kPeripheral;
  throw PlanError("unknown circuit '" + std::string(text) + "' (expected pure or peripheral)");
}

std::uint32_t partial_width(AggKind kind, std::uint32_t width, std::uint32_t rows) {
  switch (kind) {
    case AggKind::kSum:
    case AggKind::kCount: return std::min<std::uint32_t>(64, width + ceil_log2(rows));
    case AggKind::kMin:
    case AggKind::kMax: return width;
    case AggKind::kAvg: break;
  }
  throw CompileError("AVG has no partial of its own");
}

Partials pim_aggregate(PimMemory& memory, const MaskedValue& masked, AggKind kind,
                       Circuit circuit) {
  if (kind == AggKind::kAvg) throw CompileError("AVG is composed from SUM and COUNT");
  if (kind == AggKind::kCount && masked.cols.width() != 1) {
    throw CompileError("COUNT expects a one-bit mask input");
  }
  const RelationLayout& layout = memory.layout();
  const std::uint32_t w = masked.cols.width();
  const std::uint32_t pw = partial_width(kind, w, layout.rows_per_array);
  const bool sign_fill = kind == AggKind::kSum && masked.is_signed;

  Partials out{kind, pw, masked.is_signed, masked.biased,
               std::vector<std::uint64_t>(memory.page_count(), 0)};
  const std::uint32_t slot = masked.cols.slot;

  if (circuit == Circuit::kPurePim) {
    TreePrograms tree = build_tree(memory, masked.cols, kind, sign_fill, pw);
    try {
      for_each_page(memory, [&](std::size_t page) {
        reduce_page(memory, tree, page, kind, pw);
        out.values[page] = memory.array(page, slot).read_bits(0, tree.acc.cols.begin, pw);
      });
    } catch (...) {
      free_all(memory, tree.scratch);
      throw;
    }
    free_all(memory, tree.scratch);
    return out;
  }

  const ColumnRange acc = memory.scratch(slot).alloc(pw);
  try {
    for_each_page(memory, [&](std::size_t page) {
      CellArray& array = memory.array(page, slot);
      const std::uint64_t mask = low_mask(pw);
      std::uint64_t v = identity(kind, pw);
      for (std::size_t r = 0; r < array.rows(); ++r) {
        std::uint64_t x = array.read_bits(r, masked.cols.cols.begin, w);
        switch (kind) {
          case AggKind::kSum:
          case AggKind::kCount:
            if (sign_fill) x = static_cast<std::uint64_t>(sign_extend(x, w));
            v = (v + x) & mask;
            break;
          case AggKind::kMin: v = std::min(v, x); break;
          case AggKind::kMax: v = std::max(v, x); break;
          case AggKind::kAvg: break;
        }
      }
      memory.charge(Channel::kPeripheralRows, array.rows());
      array.write_bits(0, acc.begin, pw, v);
      out.values[page] = array.read_bits(0, acc.begin, pw);
    });
  } catch (...) {
    memory.scratch(slot).free(acc);
    throw;
  }
  memory.scratch(slot).free(acc);
  return out;
}

AggregateCost aggregate_cost(PimMemory& memory, AggKind kind, std::uint32_t width, bool is_signed,
                             Circuit circuit) {
  const std::uint32_t rows = memory.layout().rows_per_array;
  AggregateCost cost;
  cost.partial_width = partial_width(kind, width, rows);
  if (circuit == Circuit::kPeripheral) {
    cost.peripheral_rows_per_page = rows;
    return cost;
  }
  // Only the op counts matter here, so the tree is built over a dummy source.
  const SlotCols dummy{0, ColumnRange{0, width}};
  TreePrograms tree = build_tree(memory, dummy, kind, kind == AggKind::kSum && is_signed,
                                 cost.partial_width);
  free_all(memory, tree.scratch);
  cost.ops_per_page = tree.init.op_count() + tree_row_ops(rows) +
                      tree_levels(rows) * tree.step.op_count();
  return cost;
}

std::optional<__int128> host_fold(PimMemory& memory, const Partials& partials) {
  memory.charge(Channel::kPartial, std::uint64_t{partials.width} * partials.values.size());
  const std::uint32_t w = partials.width;
  auto decode_partial = [&](std::uint64_t v) -> __int128 {
    if (partials.biased) v ^= std::uint64_t{1} << (w - 1);
    if (partials.is_signed) return sign_extend(v, w);
    return v;
  };
  if (partials.kind == AggKind::kSum || partials.kind == AggKind::kCount) {
    __int128 total = 0;
    for (auto v : partials.values) total += decode_partial(v);
    return total;
  }
  if (partials.values.empty()) return std::nullopt;
  __int128 best = decode_partial(partials.values.front());
  for (auto v : partials.values) {
    const __int128 x = decode_partial(v);
    best = partials.kind == AggKind::kMin ? std::min(best, x) : std::max(best, x);
  }
  return best;
}

std::optional<Average> compose_avg(__int128 sum, std::uint64_t count) {
  if (count == 0) return std::nullopt;
  return Average{sum, count, static_cast<double>(sum) / static_cast<double>(count)};
}

void mux_update(PimMemory& memory, std::string_view attr, const SlotCols& mask,
                std::int64_t value) {
  const RelationLayout& layout = memory.layout();
  const AttributeSpec& spec = layout.attribute(attr);
  if (!fits(spec, value)) {
    throw CompileError("value " + std::to_string(value) + " does not fit " +
                       std::to_string(spec.width) + "-bit attribute '" + spec.name + "'");
  }
  const std::uint64_t bits = encode(spec, value);
  const AttributePlacement& p = layout.place(attr);
  ProgramBuilder b(memory);
  const SlotCols m = b.bring(mask, p.slot);
  const SlotCols nm = b.temp(p.slot, 1);
  b.emit(p.slot, ColOp::unary(OpKind::kNot, m.col(0), nm.col(0)));
  for (std::uint32_t i = 0; i < spec.width; ++i) {
    const std::uint32_t c = p.cols.begin + i;
    if ((bits >> i) & 1) {
      b.emit(p.slot, ColOp::binary(OpKind::kOr, c, m.col(0), c));
    } else {
      b.emit(p.slot, ColOp::binary(OpKind::kAnd, c, nm.col(0), c));
    }
  }
  PimProgram prog = b.finish(nm);
  exec_program(memory, prog);
  release(memory, prog);
}

}  // namespace pimolap

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pimolap/expr.hpp"
#include "pimolap/memory.hpp"

namespace pimolap {

// A column range inside one array slot of every page.
struct SlotCols {
  std::uint32_t slot = 0;
  ColumnRange cols;

  std::uint32_t width() const { return cols.width; }
  std::uint32_t col(std::uint32_t i) const { return cols.begin + i; }
  friend bool operator==(const SlotCols&, const SlotCols&) = default;
};

struct ArrayOp {
  std::uint32_t slot = 0;
  ColOp op;
  friend bool operator==(const ArrayOp&, const ArrayOp&) = default;
};

// Host-mediated copy between the two arrays of a page (TWO_XB only).
struct CrossCopy {
  std::uint32_t src_slot = 0;
  ColumnRange src;
  std::uint32_t dst_slot = 1;
  std::uint32_t dst_begin = 0;
  friend bool operator==(const CrossCopy&, const CrossCopy&) = default;
};

using Step = std::variant<ArrayOp, CrossCopy>;

// Per-page template of column ops. Replaying it on any page computes the
// same function of that page's rows. `scratch_used` lists every scratch
// range the program holds (temporaries and result); the program may only
// be replayed while they are held.
struct PimProgram {
  std::vector<Step> steps;
  std::vector<SlotCols> scratch_used;
  SlotCols result;

  std::size_t op_count() const;
  std::size_t copy_count() const;
  // Bits crossing the host boundary per page for the cross copies, both ways.
  std::uint64_t copy_bits_per_page(std::uint32_t rows) const;
  // One step per line, e.g. "AND c12 c40 -> c77"; slot 1 ops are prefixed "[x1] ".
  std::string to_assembly() const;
};

// Every ArrayOp must touch only attribute columns of its own slot, scratch
// currently allocated in that slot, or the validity column.
void validate_program(const PimProgram& program, const PimMemory& memory);

// Replays the program on each selected page (all pages when `pages` is empty).
void exec_program(PimMemory& memory, const PimProgram& program,
                  std::optional<std::span<const std::size_t>> pages = std::nullopt);

// Frees every scratch range the program holds.
void release(PimMemory& memory, PimProgram& program);
// Frees everything except the result.
void release_temps(PimMemory& memory, PimProgram& program);

// Read out `src` of page `page` and write it back into the other array.
// Charges rows*width bits each way.
void inter_array_copy(PimMemory& memory, std::uint32_t src_slot, ColumnRange src,
                      std::uint32_t dst_slot, std::uint32_t dst_begin, std::size_t page);

// A bit value during compilation: a known constant or a column of the
// builder's current slot.
struct Signal {
  enum class Kind : std::uint8_t { kZero, kOne, kCol };
  Kind kind = Kind::kZero;
  std::uint32_t col = 0;

  static Signal zero() { return {Kind::kZero, 0}; }
  static Signal one() { return {Kind::kOne, 0}; }
  static Signal constant(bool v) { return v ? one() : zero(); }
  static Signal column(std::uint32_t c) { return {Kind::kCol, c}; }
  bool is_const() const { return kind != Kind::kCol; }
  bool value() const { return kind == Kind::kOne; }
  friend bool operator==(const Signal&, const Signal&) = default;
};

// Incrementally emits a PimProgram, owning its scratch until finish().
// Temporaries dropped during compilation are reused within the program.
// If destroyed before finish(), every allocation is returned.
class ProgramBuilder {
 public:
  explicit ProgramBuilder(PimMemory& memory);
  ~ProgramBuilder();
  ProgramBuilder(const ProgramBuilder&) = delete;
  ProgramBuilder& operator=(const ProgramBuilder&) = delete;

  PimMemory& memory() { return memory_; }
  const RelationLayout& layout() const { return memory_.layout(); }

  SlotCols temp(std::uint32_t slot, std::uint32_t width);
  void drop(const SlotCols& cols);
  // Allocates a range that survives release_temps().
  SlotCols output(std::uint32_t slot, std::uint32_t width);

  void emit(std::uint32_t slot, const ColOp& op);
  // Constant-folding gate. The result is a constant, one of the inputs
  // (when the gate reduces to a wire), or Signal::column(dest).
  Signal gate(std::uint32_t slot, OpKind kind, Signal x, Signal y, std::uint32_t dest);
  Signal gate(std::uint32_t slot, OpKind kind, Signal x, std::uint32_t dest) {
    return gate(slot, kind, x, Signal::zero(), dest);
  }
  // Ensures the value lives in `dest` unless it is a constant.
  Signal settle(std::uint32_t slot, Signal s, std::uint32_t dest);
  // Writes the value into `dest`, constants included.
  void materialize(std::uint32_t slot, Signal s, std::uint32_t dest);
  // Returns `value` itself when already in `slot`, otherwise a temp copy.
  SlotCols bring(const SlotCols& value, std::uint32_t slot);

  PimProgram finish(const SlotCols& result);

 private:
  PimMemory& memory_;
  PimProgram program_;
  std::vector<SlotCols> owned_;
  std::vector<SlotCols> free_;
  std::vector<SlotCols> outputs_;
  bool finished_ = false;
};

// Emits a ripple-carry add: acc := acc + addend over dest.size() bits,
// wrapping at that width. `acc` holds the current signals of each bit and
// is updated to the new ones. `from` skips low bits known to be unchanged.
void emit_add(ProgramBuilder& b, std::uint32_t slot, std::vector<Signal>& acc,
              const std::vector<Signal>& addend, const std::vector<std::uint32_t>& dest,
              std::size_t from = 0);
// Unsigned MSB-first comparison of equal-length operands into `dest`.
Signal emit_compare(ProgramBuilder& b, std::uint32_t slot, const std::vector<Signal>& a,
                    const std::vector<Signal>& bv, CmpOp op, std::uint32_t dest);

// Result width of an arithmetic expression: declared width if set, else
// attr width, bit length of an immediate, max+1 for add, sum for multiply;
// capped at 64.
std::uint32_t infer_width(const ArithExpr& expr, const Schema& schema);

// One result bit per record: predicate AND validity (or AND `base` when
// given). The result lands in `home_slot`, defaulting to the slot of the
// first compared attribute (or of `base`).
PimProgram compile_predicate(PimMemory& memory, const PredicateExpr& pred,
                             std::optional<std::uint32_t> home_slot = std::nullopt,
                             std::optional<SlotCols> base = std::nullopt);

// Result columns hold the expression per record, wrapping at the inferred
// (or declared) width. Signed attributes are only accepted as a bare
// attribute expression.
PimProgram compile_arith(PimMemory& memory, const ArithExpr& expr,
                         std::optional<std::uint32_t> home_slot = std::nullopt);

// The slot where most of the expression's attribute bits live.
std::uint32_t natural_slot(const RelationLayout& layout, const ArithExpr& expr);

// Concatenated per-page result bits truncated to record_count; charges
// record_count bits.
std::vector<bool> read_filter_bits(PimMemory& memory, const SlotCols& result);

// Masked copy of an attribute (or expression result) in scratch.
struct MaskedValue {
  SlotCols cols;
  bool is_signed = false;
  bool biased = false;  // sign bit inverted so unsigned order matches signed order
};

// SUM/COUNT/MAX zero the unselected rows; MIN sets them to all ones. For
// signed MIN/MAX the copy is sign-biased. The source is left untouched.
MaskedValue mask_attribute(PimMemory& memory, const SlotCols& source, const SlotCols& mask,
                           AggKind kind, bool is_signed = false);
void release(PimMemory& memory, const MaskedValue& masked);

enum class Circuit : std::uint8_t { kPurePim, kPeripheral };
std::string_view circuit_name(Circuit c);
Circuit parse_circuit(std::string_view text);

struct Partials {
  AggKind kind = AggKind::kSum;
  std::uint32_t width = 0;
  bool is_signed = false;
  bool biased = false;
  std::vector<std::uint64_t> values;  // one per array
};

// Width of the per-array partial for a `width`-bit masked input.
std::uint32_t partial_width(AggKind kind, std::uint32_t width, std::uint32_t rows);

// One partial per array. PURE_PIM runs an in-array reduction tree of
// compiled adders/comparators; PERIPHERAL models a sequential accumulator
// beside the array that writes back only the final value.
Partials pim_aggregate(PimMemory& memory, const MaskedValue& masked, AggKind kind,
                       Circuit circuit);

struct AggregateCost {
  std::uint64_t ops_per_page = 0;
  std::uint64_t peripheral_rows_per_page = 0;
  std::uint32_t partial_width = 0;
};
AggregateCost aggregate_cost(PimMemory& memory, AggKind kind, std::uint32_t width, bool is_signed,
                             Circuit circuit);

// Host side of an aggregation: reads every partial (charged) and folds
// them with wide arithmetic. MIN/MAX over zero partials is empty.
std::optional<__int128> host_fold(PimMemory& memory, const Partials& partials);

struct Average {
  __int128 sum = 0;
  std::uint64_t count = 0;
  double value = 0;
  friend bool operator==(const Average&, const Average&) = default;
};
// Empty-group signal when count is zero.
std::optional<Average> compose_avg(__int128 sum, std::uint64_t count);

// attr := mask ? value : attr, in place, with column ops only.
void mux_update(PimMemory& memory, std::string_view attr, const SlotCols& mask,
                std::int64_t value);

}  // namespace pimolap

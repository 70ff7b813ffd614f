#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "pimolap/crossbar.hpp"
#include "pimolap/layout.hpp"

namespace pimolap {

// Snapshot of the data-movement and PIM-work counters. All counts in bits
// except pim_col_ops, cell_writes and peripheral_row_reads.
struct TransferStats {
  std::uint64_t pim_to_host_bits = 0;
  std::uint64_t host_to_pim_bits = 0;
  std::uint64_t pim_col_ops = 0;
  std::uint64_t cell_writes = 0;
  std::uint64_t host_baseline_bits = 0;

  // Breakdown of pim_to_host_bits.
  std::uint64_t mask_bits = 0;
  std::uint64_t attribute_bits = 0;
  std::uint64_t partial_bits = 0;
  std::uint64_t sample_bits = 0;
  // Host-mediated array-to-array copies, both directions.
  std::uint64_t inter_array_bits = 0;
  std::uint64_t peripheral_row_reads = 0;

  std::uint64_t total_bits() const { return pim_to_host_bits + host_to_pim_bits; }
  TransferStats operator-(const TransferStats& before) const;
  TransferStats operator+(const TransferStats& other) const;
  nlohmann::json to_json() const;
  friend bool operator==(const TransferStats&, const TransferStats&) = default;
};

enum class Channel : std::uint8_t {
  kMask,            // filter result bits, PIM -> host
  kAttribute,       // attribute fields, PIM -> host
  kPartial,         // per-array aggregation partials, PIM -> host
  kSample,          // sampled rows for group-size estimation, PIM -> host
  kInterArrayRead,  // first half of an array-to-array copy
  kInterArrayWrite,
  kStore,           // host -> PIM record stores
  kPeripheralRows,  // rows scanned in place by the peripheral aggregation circuit
  kCount
};

// First-fit allocator over the scratch columns of one slot. Allocation is
// uniform across pages so one program template serves every page.
class ScratchAllocator {
 public:
  ScratchAllocator() = default;
  explicit ScratchAllocator(ColumnRange scratch);

  ColumnRange alloc(std::uint32_t n_bits);
  void free(ColumnRange range);
  std::uint32_t available() const;
  std::uint32_t largest_free() const;
  bool is_allocated(std::uint32_t col) const;
  const ColumnRange& range() const { return scratch_; }

 private:
  ColumnRange scratch_;
  std::vector<bool> used_;
};

// The relation resident in PIM memory: owned arrays plus the accounted
// host access path. Engine code reaches array contents only through the
// read_* members here, each of which charges the transfer counters.
class PimMemory {
 public:
  explicit PimMemory(RelationLayout layout);

  PimMemory(const PimMemory&) = delete;
  PimMemory& operator=(const PimMemory&) = delete;
  PimMemory(PimMemory&&) noexcept;
  PimMemory& operator=(PimMemory&&) noexcept;

  const RelationLayout& layout() const { return layout_; }
  std::size_t page_count() const { return layout_.page_count(); }
  std::size_t record_count() const { return layout_.record_count; }

  CellArray& array(std::size_t page, std::uint32_t slot);
  const CellArray& array(std::size_t page, std::uint32_t slot) const;

  ScratchAllocator& scratch(std::uint32_t slot = 0) { return scratch_.at(slot); }
  const ScratchAllocator& scratch(std::uint32_t slot = 0) const { return scratch_.at(slot); }

  // Accounted reads.
  std::uint64_t read_field(std::size_t record, std::size_t attr, Channel channel = Channel::kAttribute);
  std::int64_t read_value(std::size_t record, std::size_t attr, Channel channel = Channel::kAttribute);
  // Column of one page truncated to its live rows; charged live rows bits.
  std::vector<bool> read_column(std::size_t page, std::uint32_t slot, std::uint32_t col,
                                Channel channel = Channel::kMask);

  // Accounted host store of one attribute value.
  void write_value(std::size_t record, std::size_t attr, std::int64_t value);

  // Unaccounted inspection for tests and debugging; engine code never calls it.
  std::int64_t debug_value(std::size_t record, std::size_t attr) const;

  void charge(Channel channel, std::uint64_t amount);
  TransferStats stats() const;

  void set_parallelism(unsigned threads) { parallelism_ = threads == 0 ? 1 : threads; }
  unsigned parallelism() const { return parallelism_; }

 private:
  RelationLayout layout_;
  std::vector<CellArray> arrays_;  // page-major, slot-minor
  std::vector<ScratchAllocator> scratch_;
  std::array<std::atomic<std::uint64_t>, static_cast<std::size_t>(Channel::kCount)> counters_{};
  unsigned parallelism_ = 1;
};

// Fills pages in record order; sets the validity bit of every live row.
// Each value must fit its attribute.
PimMemory store_records(RelationLayout layout, const Table& records);

// Convenience for scratch bookkeeping on slot 0.
ColumnRange scratch_alloc(PimMemory& memory, std::uint32_t n_bits, std::uint32_t slot = 0);
void scratch_free(PimMemory& memory, ColumnRange range, std::uint32_t slot = 0);

}  // namespace pimolap

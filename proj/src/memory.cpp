#include "pimolap/memory.hpp"

#include <algorithm>

#include "pimolap/error.hpp"

namespace pimolap {

namespace {

std::size_t idx(Channel c) { return static_cast<std::size_t>(c); }

}  // namespace

TransferStats TransferStats::operator-(const TransferStats& b) const {
  TransferStats d;
  d.pim_to_host_bits = pim_to_host_bits - b.pim_to_host_bits;
  d.host_to_pim_bits = host_to_pim_bits - b.host_to_pim_bits;
  d.pim_col_ops = pim_col_ops - b.pim_col_ops;
  d.cell_writes = cell_writes - b.cell_writes;
  d.host_baseline_bits = host_baseline_bits - b.host_baseline_bits;
  d.mask_bits = mask_bits - b.mask_bits;
  d.attribute_bits = attribute_bits - b.attribute_bits;
  d.partial_bits = partial_bits - b.partial_bits;
  d.sample_bits = sample_bits - b.sample_bits;
  d.inter_array_bits = inter_array_bits - b.inter_array_bits;
  d.peripheral_row_reads = peripheral_row_reads - b.peripheral_row_reads;
  return d;
}

TransferStats TransferStats::operator+(const TransferStats& b) const {
  TransferStats d;
  d.pim_to_host_bits = pim_to_host_bits + b.pim_to_host_bits;
  d.host_to_pim_bits = host_to_pim_bits + b.host_to_pim_bits;
  d.pim_col_ops = pim_col_ops + b.pim_col_ops;
  d.cell_writes = cell_writes + b.cell_writes;
  d.host_baseline_bits = host_baseline_bits + b.host_baseline_bits;
  d.mask_bits = mask_bits + b.mask_bits;
  d.attribute_bits = attribute_bits + b.attribute_bits;
  d.partial_bits = partial_bits + b.partial_bits;
  d.sample_bits = sample_bits + b.sample_bits;
  d.inter_array_bits = inter_array_bits + b.inter_array_bits;
  d.peripheral_row_reads = peripheral_row_reads + b.peripheral_row_reads;
  return d;
}

nlohmann::json TransferStats::to_json() const {
  return {{"pim_to_host_bits", pim_to_host_bits},
          {"host_to_pim_bits", host_to_pim_bits},
          {"pim_col_ops", pim_col_ops},
          {"cell_writes", cell_writes},
          {"host_baseline_bits", host_baseline_bits},
          {"mask_bits", mask_bits},
          {"attribute_bits", attribute_bits},
          {"partial_bits", partial_bits},
          {"sample_bits", sample_bits},
          {"inter_array_bits", inter_array_bits},
          {"peripheral_row_reads", peripheral_row_reads}};
}

ScratchAllocator::ScratchAllocator(ColumnRange scratch)
    : scratch_(scratch), used_(scratch.width, false) {}

ColumnRange ScratchAllocator::alloc(std::uint32_t n_bits) {
  if (n_bits == 0) throw LayoutError("scratch allocation of zero columns");
  std::uint32_t run = 0;
  for (std::uint32_t i = 0; i < used_.size(); ++i) {
    run = used_[i] ? 0 : run + 1;
    if (run == n_bits) {
      const std::uint32_t first = i + 1 - n_bits;
      for (std::uint32_t j = first; j <= i; ++j) used_[j] = true;
      return ColumnRange{scratch_.begin + first, n_bits};
    }
  }
  throw ScratchExhausted(n_bits, largest_free());
}

void ScratchAllocator::free(ColumnRange range) {
  if (range.width == 0) return;
  if (range.begin < scratch_.begin || range.end() > scratch_.end()) {
    throw LayoutError("scratch_free of columns outside the scratch range");
  }
  for (std::uint32_t c = range.begin; c < range.end(); ++c) {
    if (!used_[c - scratch_.begin]) {
      throw LayoutError("scratch_free of unallocated column " + std::to_string(c));
    }
    used_[c - scratch_.begin] = false;
  }
}

std::uint32_t ScratchAllocator::available() const {
  return static_cast<std::uint32_t>(std::count(used_.begin(), used_.end(), false));
}

std::uint32_t ScratchAllocator::largest_free() const {
  std::uint32_t best = 0, run = 0;
  for (bool u : used_) {
    run = u ? 0 : run + 1;
    best = std::max(best, run);
  }
  return best;
}

bool ScratchAllocator::is_allocated(std::uint32_t col) const {
  return scratch_.contains(col) && used_[col - scratch_.begin];
}

PimMemory::PimMemory(RelationLayout layout) : layout_(std::move(layout)) {
  const std::size_t pages = layout_.page_count();
  const std::uint32_t slots = layout_.slot_count();
  arrays_.reserve(pages * slots);
  for (std::size_t i = 0; i < pages * slots; ++i) {
    arrays_.emplace_back(layout_.rows_per_array, layout_.cols_per_array);
  }
  for (std::uint32_t s = 0; s < slots; ++s) {
    scratch_.emplace_back(layout_.scratch);
    // Validity bit is permanently reserved.
    scratch_.back().alloc(1);
  }
  for (auto& c : counters_) c.store(0);
}

PimMemory::PimMemory(PimMemory&& other) noexcept
    : layout_(std::move(other.layout_)),
      arrays_(std::move(other.arrays_)),
      scratch_(std::move(other.scratch_)),
      parallelism_(other.parallelism_) {
  for (std::size_t i = 0; i < counters_.size(); ++i) counters_[i].store(other.counters_[i].load());
}

PimMemory& PimMemory::operator=(PimMemory&& other) noexcept {
  layout_ = std::move(other.layout_);
  arrays_ = std::move(other.arrays_);
  scratch_ = std::move(other.scratch_);
  parallelism_ = other.parallelism_;
  for (std::size_t i = 0; i < counters_.size(); ++i) counters_[i].store(other.counters_[i].load());
  return *this;
}

CellArray& PimMemory::array(std::size_t page, std::uint32_t slot) {
  if (page >= page_count() || slot >= layout_.slot_count()) {
    throw CrossbarError("no array at page " + std::to_string(page) + " slot " +
                        std::to_string(slot));
  }
  return arrays_[page * layout_.slot_count() + slot];
}

const CellArray& PimMemory::array(std::size_t page, std::uint32_t slot) const {
  return const_cast<PimMemory*>(this)->array(page, slot);
}

std::uint64_t PimMemory::read_field(std::size_t record, std::size_t attr, Channel channel) {
  const Location loc = layout_.locate(record, layout_.schema.at(attr).name);
  const std::uint64_t bits = array(loc.page, loc.slot).read_bits(loc.row, loc.cols.begin, loc.cols.width);
  charge(channel, loc.cols.width);
  return bits;
}

std::int64_t PimMemory::read_value(std::size_t record, std::size_t attr, Channel channel) {
  return decode(layout_.schema.at(attr), read_field(record, attr, channel));
}

std::vector<bool> PimMemory::read_column(std::size_t page, std::uint32_t slot, std::uint32_t col,
                                         Channel channel) {
  auto bits = array(page, slot).read_col(col);
  bits.resize(layout_.live_rows(page));
  charge(channel, bits.size());
  return bits;
}

void PimMemory::write_value(std::size_t record, std::size_t attr, std::int64_t value) {
  const AttributeSpec& spec = layout_.schema.at(attr);
  const Location loc = layout_.locate(record, spec.name);
  array(loc.page, loc.slot).write_bits(loc.row, loc.cols.begin, loc.cols.width, encode(spec, value));
  charge(Channel::kStore, loc.cols.width);
}

std::int64_t PimMemory::debug_value(std::size_t record, std::size_t attr) const {
  const AttributeSpec& spec = layout_.schema.at(attr);
  const Location loc = layout_.locate(record, spec.name);
  return decode(spec, array(loc.page, loc.slot).read_bits(loc.row, loc.cols.begin, loc.cols.width));
}

void PimMemory::charge(Channel channel, std::uint64_t amount) {
  counters_[idx(channel)].fetch_add(amount, std::memory_order_relaxed);
}

TransferStats PimMemory::stats() const {
  auto get = [this](Channel c) { return counters_[idx(c)].load(std::memory_order_relaxed); };
  TransferStats s;
  s.mask_bits = get(Channel::kMask);
  s.attribute_bits = get(Channel::kAttribute);
  s.partial_bits = get(Channel::kPartial);
  s.sample_bits = get(Channel::kSample);
  s.inter_array_bits = get(Channel::kInterArrayRead) + get(Channel::kInterArrayWrite);
  s.peripheral_row_reads = get(Channel::kPeripheralRows);
  s.pim_to_host_bits = s.mask_bits + s.attribute_bits + s.partial_bits + s.sample_bits +
                       get(Channel::kInterArrayRead);
  s.host_to_pim_bits = get(Channel::kStore) + get(Channel::kInterArrayWrite);
  for (const auto& a : arrays_) {
    s.pim_col_ops += a.op_count();
    s.cell_writes += a.write_count();
  }
  return s;
}

PimMemory store_records(RelationLayout layout, const Table& records) {
  if (records.schema.size() != layout.schema.size()) {
    throw LayoutError("store_records: table has " + std::to_string(records.schema.size()) +
                      " attributes, layout has " + std::to_string(layout.schema.size()));
  }
  for (std::size_t a = 0; a < layout.schema.size(); ++a) {
    if (records.schema[a].name != layout.schema[a].name) {
      throw LayoutError("store_records: attribute " + std::to_string(a) + " is '" +
                        records.schema[a].name + "', layout expects '" + layout.schema[a].name +
                        "'");
    }
  }
  const std::size_t n = records.row_count();
  // Validate before touching memory so a bad value leaves nothing half-built.
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t a = 0; a < layout.schema.size(); ++a) {
      if (!fits(layout.schema[a], records.at(r, a))) {
        throw LayoutError("record " + std::to_string(r) + ": value " +
                          std::to_string(records.at(r, a)) + " does not fit " +
                          std::to_string(layout.schema[a].width) + "-bit attribute '" +
                          layout.schema[a].name + "'");
      }
    }
  }
  layout.record_count = n;
  PimMemory memory(std::move(layout));
  const RelationLayout& l = memory.layout();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t a = 0; a < l.schema.size(); ++a) memory.write_value(r, a, records.at(r, a));
    const std::size_t page = r / l.rows_per_array;
    const std::size_t row = r % l.rows_per_array;
    for (std::uint32_t s = 0; s < l.slot_count(); ++s) {
      memory.array(page, s).write_bits(row, l.validity_col(), 1, 1);
      memory.charge(Channel::kStore, 1);
    }
  }
  return memory;
}

ColumnRange scratch_alloc(PimMemory& memory, std::uint32_t n_bits, std::uint32_t slot) {
  return memory.scratch(slot).alloc(n_bits);
}

void scratch_free(PimMemory& memory, ColumnRange range, std::uint32_t slot) {
  memory.scratch(slot).free(range);
}

}  // namespace pimolap

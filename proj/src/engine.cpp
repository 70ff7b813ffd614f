#include "pimolap/engine.hpp"

#include <algorithm>
#include <deque>
#include <random>
#include <set>

#include "pimolap/error.hpp"

namespace pimolap {

std::string_view engine_name(EngineMode mode) {
  switch (mode) {
    case EngineMode::kPim: return "pim";
    case EngineMode::kHybrid: return "hybrid-groupby";
    case EngineMode::kHost: return "host";
    case EngineMode::kFilter: return "filter";
  }
  return "?";
}

EngineMode parse_engine(std::string_view text) {
  if (text == "pim") return EngineMode::kPim;
  if (text == "hybrid-groupby" || text == "hybrid") return EngineMode::kHybrid;
  if (text == "host") return EngineMode::kHost;
  if (text == "filter") return EngineMode::kFilter;
  throw PlanError("unknown engine '" + std::string(text) +
                  "' (expected pim, hybrid-groupby, host or filter)");
}

nlohmann::json CostParams::to_json() const {
  return nlohmann::json{{"c_pim_op", c_pim_op},
                        {"c_bit_xfer", c_bit_xfer},
                        {"c_host_rec", c_host_rec},
                        {"c_periph_row", c_periph_row}};
}

CostParams CostParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw PlanError("cost parameters must be a JSON object");
  CostParams p;
  auto field = [&](const char* name, double& dst) {
    if (!j.contains(name)) return;
    if (!j[name].is_number()) throw PlanError(std::string("cost parameter ") + name + " must be a number");
    dst = j[name].get<double>();
    if (dst < 0) throw PlanError(std::string("cost parameter ") + name + " must be >= 0");
  };
  field("c_pim_op", p.c_pim_op);
  field("c_bit_xfer", p.c_bit_xfer);
  field("c_host_rec", p.c_host_rec);
  field("c_periph_row", p.c_periph_row);
  return p;
}

namespace {

nlohmann::json key_json(const GroupKey& key) {
  nlohmann::json out = nlohmann::json::array();
  for (auto v : key) out.push_back(v);
  return out;
}

}  // namespace

nlohmann::json GroupEstimates::to_json() const {
  nlohmann::json g = nlohmann::json::array();
  for (const auto& [key, est] : groups) g.push_back({{"key", key_json(key)}, {"estimate", est}});
  return nlohmann::json{{"sample_fraction", sample_fraction},
                        {"sampled_records", sampled_records},
                        {"unseen_mass_flag", unseen_mass_flag},
                        {"groups", g}};
}

GroupEstimates estimate_groups(PimMemory& memory, const std::vector<std::string>& group_attrs,
                               double sample_fraction, std::uint64_t seed,
                               const PredicateExpr& predicate) {
  if (!(sample_fraction > 0 && sample_fraction <= 1)) {
    throw PlanError("sample fraction must be in (0, 1], got " + std::to_string(sample_fraction));
  }
  const RelationLayout& layout = memory.layout();
  std::set<std::string> pred_names;
  predicate.collect_attributes(pred_names);

  // One-row scratch table so the predicate can be evaluated on what was read.
  Table row;
  std::vector<std::size_t> pred_cols;
  for (const auto& name : pred_names) {
    row.schema.push_back(layout.attribute(name));
    pred_cols.push_back(attribute_index(layout.schema, name));
  }
  row.values.assign(row.schema.size(), 0);
  std::vector<std::size_t> group_cols;
  for (const auto& name : group_attrs) group_cols.push_back(attribute_index(layout.schema, name));

  GroupEstimates est;
  est.sample_fraction = sample_fraction;
  est.unseen_mass_flag = sample_fraction < 1;
  std::mt19937_64 rng(seed);
  std::map<GroupKey, std::uint64_t> counts;
  for (std::size_t r = 0; r < memory.record_count(); ++r) {
    if (sample_fraction < 1) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u >= sample_fraction) continue;
    }
    ++est.sampled_records;
    for (std::size_t i = 0; i < pred_cols.size(); ++i) {
      row.values[i] = memory.read_value(r, pred_cols[i], Channel::kSample);
    }
    if (!eval_predicate(predicate, row, 0)) continue;
    GroupKey key;
    for (auto c : group_cols) key.push_back(memory.read_value(r, c, Channel::kSample));
    ++counts[key];
  }
  for (const auto& [key, n] : counts) est.groups[key] = static_cast<double>(n) / sample_fraction;
  return est;
}

double CostModel::pim_cost(const GroupKey& key) const {
  auto it = pim_group_cost.find(key);
  return it == pim_group_cost.end() ? pim_default : it->second;
}

double cost_of(const std::vector<GroupKey>& pim, const GroupEstimates& estimates,
               const CostModel& model) {
  const std::set<GroupKey> chosen(pim.begin(), pim.end());
  double cost = 0;
  for (const auto& [key, n] : estimates.groups) {
    cost += chosen.contains(key) ? model.pim_cost(key) : model.host_per_record * n;
  }
  return cost;
}

GroupSplit split_groups(const GroupEstimates& estimates, const CostModel& model) {
  std::vector<std::pair<GroupKey, double>> order(estimates.groups.begin(), estimates.groups.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  GroupSplit split;
  std::vector<GroupKey> all;
  for (const auto& [key, n] : order) {
    all.push_back(key);
    if (model.pim_cost(key) < model.host_per_record * n) {
      split.pim_groups.push_back(key);
    } else {
      split.host_groups.push_back(key);
    }
  }
  split.cost = cost_of(split.pim_groups, estimates, model);
  split.pure_pim = cost_of(all, estimates, model);
  split.pure_host = cost_of({}, estimates, model);
  return split;
}

namespace {

// Frees every scratch range handed to it when the query finishes or fails.
class ScratchScope {
 public:
  explicit ScratchScope(PimMemory& memory) : memory_(memory) {}
  ~ScratchScope() {
    for (auto& p : programs_) release(memory_, p);
  }
  ScratchScope(const ScratchScope&) = delete;
  ScratchScope& operator=(const ScratchScope&) = delete;

  const PimProgram& hold(PimProgram p) {
    programs_.push_back(std::move(p));
    return programs_.back();
  }

 private:
  PimMemory& memory_;
  std::deque<PimProgram> programs_;
};

struct ValueSource {
  SlotCols cols;
  bool is_signed = false;
};

PredicateExpr group_predicate(const std::vector<std::string>& attrs, const GroupKey& key) {
  PredicateExpr p = PredicateExpr::compare(attrs.at(0), CmpOp::kEq, key.at(0));
  for (std::size_t i = 1; i < attrs.size(); ++i) {
    p = PredicateExpr::conj(std::move(p), PredicateExpr::compare(attrs[i], CmpOp::kEq, key[i]));
  }
  return p;
}

AggKind pim_kind(AggKind k) { return k == AggKind::kAvg ? AggKind::kSum : k; }

bool needs_value(const AggregateSpec& spec) {
  return spec.kind != AggKind::kCount && spec.arg.has_value();
}

// Program that computes `expr`, or an empty program for a bare attribute
// (the attribute columns are used in place).
std::optional<PimProgram> value_program(PimMemory& memory, const ArithExpr& expr) {
  if (expr.is_attr()) return std::nullopt;
  return compile_arith(memory, expr);
}

ValueSource value_source(const RelationLayout& layout, const ArithExpr& expr,
                         const std::optional<PimProgram>& prog) {
  if (prog) return ValueSource{prog->result, false};
  const AttributePlacement& p = layout.place(expr.attr);
  return ValueSource{SlotCols{p.slot, p.cols}, layout.attribute(expr.attr).is_signed()};
}

// Per-page cost of masking and reducing every aggregate for one mask in
// `mask_slot`, plus the bits that leave PIM per page.
struct AggWork {
  double ops = 0;
  double periph_rows = 0;
  double bits = 0;
};

AggWork aggregation_work(PimMemory& memory, const QueryIR& ir, std::uint32_t mask_slot,
                         Circuit circuit) {
  const RelationLayout& layout = memory.layout();
  AggWork w;
  auto add = [&](AggKind kind, std::uint32_t width, bool is_signed, std::uint32_t slot) {
    const AggregateCost c = aggregate_cost(memory, kind, width, is_signed, circuit);
    w.ops += static_cast<double>(c.ops_per_page) + width + (kind == AggKind::kMin ? 1 : 0) +
             (is_signed && (kind == AggKind::kMin || kind == AggKind::kMax) ? 1 : 0);
    w.periph_rows += static_cast<double>(c.peripheral_rows_per_page);
    w.bits += c.partial_width;
    if (slot != mask_slot) w.bits += 2.0 * layout.rows_per_array;
  };
  add(AggKind::kCount, 1, false, mask_slot);
  for (const auto& spec : ir.aggregates) {
    if (!needs_value(spec)) continue;
    const ArithExpr& e = *spec.arg;
    const std::uint32_t width = infer_width(e, layout.schema);
    const bool is_signed = e.is_attr() && layout.attribute(e.attr).is_signed();
    const std::uint32_t slot = e.is_attr() ? layout.place(e.attr).slot : natural_slot(layout, e);
    add(pim_kind(spec.kind), width, is_signed, slot);
  }
  return w;
}

double host_record_cost(const RelationLayout& layout, const QueryIR& ir, const CostParams& p) {
  std::set<std::string> attrs = ir.aggregate_attributes();
  attrs.insert(ir.group_by.begin(), ir.group_by.end());
  double bits = 1;
  for (const auto& a : attrs) bits += layout.attribute(a).width;
  return p.c_bit_xfer * bits + p.c_host_rec;
}

double pim_route_cost(const RelationLayout& layout, const CostParams& p, double filter_ops,
                      double filter_copy_bits, const AggWork& agg) {
  const double pages = static_cast<double>(layout.page_count());
  return pages * (p.c_pim_op * (filter_ops + agg.ops) + p.c_periph_row * agg.periph_rows) +
         p.c_bit_xfer * pages * (agg.bits + filter_copy_bits);
}

}  // namespace

nlohmann::json QueryPlan::to_json() const {
  nlohmann::json j{{"query", ir.to_string()},
                   {"engine", engine_name(options.mode)},
                   {"circuit", circuit_name(options.circuit)},
                   {"sample_fraction", options.sample_fraction},
                   {"seed", options.seed},
                   {"cost_params", options.params.to_json()},
                   {"filter_ops", filter_ops},
                   {"routes", routes},
                   {"host_pass", host_pass}};
  j["estimates"] = estimates ? estimates->to_json() : nlohmann::json(nullptr);
  nlohmann::json pim = nlohmann::json::array();
  for (const auto& k : split.pim_groups) pim.push_back(key_json(k));
  nlohmann::json host = nlohmann::json::array();
  for (const auto& k : split.host_groups) host.push_back(key_json(k));
  j["pim_groups"] = pim;
  j["host_groups"] = host;
  j["modeled_cost"] = {{"chosen", split.cost},
                       {"pure_pim", split.pure_pim},
                       {"pure_host", split.pure_host}};
  return j;
}

QueryPlan plan_query(const QueryIR& ir, PimMemory& memory, const EngineOptions& options) {
  const RelationLayout& layout = memory.layout();
  check_attributes(ir, layout.schema);
  if (!(options.sample_fraction > 0 && options.sample_fraction <= 1)) {
    throw PlanError("sample fraction must be in (0, 1], got " +
                    std::to_string(options.sample_fraction));
  }
  QueryPlan plan;
  plan.ir = ir;
  plan.options = options;
  const TransferStats before = memory.stats();

  if (options.mode == EngineMode::kHost) {
    plan.routes.assign(ir.aggregates.size(), "host");
    return plan;
  }

  std::uint32_t filter_slot = 0;
  double filter_copy_bits = 0;
  try {
    PimProgram f = compile_predicate(memory, ir.predicate);
    plan.filter_ops = f.op_count();
    plan.filter_assembly = f.to_assembly();
    filter_slot = f.result.slot;
    filter_copy_bits = static_cast<double>(f.copy_bits_per_page(layout.rows_per_array));
    release(memory, f);
    // Arithmetic arguments must compile as well; fail at plan time if not.
    for (const auto& spec : ir.aggregates) {
      if (!needs_value(spec)) continue;
      auto prog = value_program(memory, *spec.arg);
      if (prog) release(memory, *prog);
    }
  } catch (const LayoutError& e) {
    throw PlanError(e.what());
  }

  for (const auto& spec : ir.aggregates) {
    if (options.mode == EngineMode::kFilter) {
      plan.routes.push_back("host");
    } else if (ir.grouped()) {
      plan.routes.push_back(options.mode == EngineMode::kHybrid ? "hybrid" : "pim");
    } else {
      plan.routes.push_back(spec.kind == AggKind::kAvg ? "pim:sum+count" : "pim");
    }
  }

  const CostParams& p = options.params;
  plan.model.host_per_record = host_record_cost(layout, ir, p);
  const AggWork agg = aggregation_work(memory, ir, filter_slot, options.circuit);
  plan.model.pim_default =
      pim_route_cost(layout, p, static_cast<double>(plan.filter_ops), filter_copy_bits, agg);

  if (options.mode == EngineMode::kFilter) {
    plan.host_pass = true;
  } else if (ir.grouped()) {
    plan.estimates = estimate_groups(memory, ir.group_by, options.sample_fraction, options.seed,
                                     ir.predicate);
    for (const auto& [key, n] : plan.estimates->groups) {
      PimProgram g = compile_predicate(memory, group_predicate(ir.group_by, key), filter_slot);
      const double ops = static_cast<double>(g.op_count()) + 1;  // +1 claims the group
      const double copies = static_cast<double>(g.copy_bits_per_page(layout.rows_per_array));
      release(memory, g);
      plan.model.pim_group_cost[key] = pim_route_cost(layout, p, ops, copies, agg);
    }
    if (options.mode == EngineMode::kHybrid) {
      plan.split = split_groups(*plan.estimates, plan.model);
    } else {
      plan.split = split_groups(*plan.estimates, CostModel{{}, 0, 1});
      std::vector<GroupKey> all = plan.split.pim_groups;
      all.insert(all.end(), plan.split.host_groups.begin(), plan.split.host_groups.end());
      plan.split.pim_groups = all;
      plan.split.host_groups.clear();
      plan.split.cost = cost_of(all, *plan.estimates, plan.model);
      plan.split.pure_pim = plan.split.cost;
      plan.split.pure_host = cost_of({}, *plan.estimates, plan.model);
    }
    plan.host_pass = !plan.split.host_groups.empty() || plan.estimates->unseen_mass_flag;
  } else {
    plan.split.cost = plan.split.pure_pim = plan.model.pim_default;
    plan.split.pure_host =
        plan.model.host_per_record * static_cast<double>(memory.record_count());
  }
  plan.planning = memory.stats() - before;
  return plan;
}

namespace {

struct PimAggregator {
  PimMemory& memory;
  const QueryIR& ir;
  Circuit circuit;
  const std::vector<std::optional<ValueSource>>& sources;

  // Aggregates of the records selected by `mask`. Returns nullopt when the
  // mask selects nothing and the query is grouped.
  std::optional<std::vector<AggValue>> run(const SlotCols& mask) {
    const MaskedValue ones = mask_attribute(memory, mask, mask, AggKind::kCount);
    Partials cp;
    try {
      cp = pim_aggregate(memory, ones, AggKind::kCount, circuit);
    } catch (...) {
      release(memory, ones);
      throw;
    }
    release(memory, ones);
    const std::uint64_t count = static_cast<std::uint64_t>(*host_fold(memory, cp));
    if (count == 0 && ir.grouped()) return std::nullopt;

    std::vector<AggValue> values;
    for (std::size_t a = 0; a < ir.aggregates.size(); ++a) {
      const AggregateSpec& spec = ir.aggregates[a];
      if (spec.kind == AggKind::kCount) {
        values.push_back(AggValue::of(static_cast<__int128>(count)));
        continue;
      }
      if (count == 0) {
        values.push_back(AggValue::null());
        continue;
      }
      const ValueSource& src = *sources[a];
      const AggKind kind = pim_kind(spec.kind);
      const MaskedValue mv = mask_attribute(memory, src.cols, mask, kind, src.is_signed);
      Partials parts;
      try {
        parts = pim_aggregate(memory, mv, kind, circuit);
      } catch (...) {
        release(memory, mv);
        throw;
      }
      release(memory, mv);
      const std::optional<__int128> v = host_fold(memory, parts);
      if (spec.kind == AggKind::kAvg) {
        values.push_back(AggValue::of(*compose_avg(*v, count)));
      } else {
        values.push_back(v ? AggValue::of(*v) : AggValue::null());
      }
    }
    return values;
  }
};

// Reads the mask, then the group-by and aggregate-source attributes of each
// selected record, and aggregates them on the host.
ResultTable host_aggregate(PimMemory& memory, const QueryIR& ir, const SlotCols& mask) {
  const RelationLayout& layout = memory.layout();
  const std::vector<bool> bits = read_filter_bits(memory, mask);
  std::set<std::string> names = ir.aggregate_attributes();
  names.insert(ir.group_by.begin(), ir.group_by.end());
  Table selected;
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    selected.schema.push_back(layout.attribute(n));
    cols.push_back(attribute_index(layout.schema, n));
  }
  std::vector<std::int64_t> row(cols.size());
  for (std::size_t r = 0; r < bits.size(); ++r) {
    if (!bits[r]) continue;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      row[i] = memory.read_value(r, cols[i], Channel::kAttribute);
    }
    selected.values.insert(selected.values.end(), row.begin(), row.end());
  }
  QueryIR rest = ir;
  rest.predicate = PredicateExpr::truth();
  if (selected.schema.empty()) {
    // COUNT(*)-only query: a placeholder column gives the table its rows.
    selected.schema.push_back(AttributeSpec{"", 1, Signedness::kUnsigned});
    selected.values.assign(std::count(bits.begin(), bits.end(), true), 0);
  }
  return execute_host(rest, selected).table;
}

}  // namespace

Execution execute_plan(const QueryPlan& plan, PimMemory& memory, const Table* host_table) {
  const QueryIR& ir = plan.ir;
  const RelationLayout& layout = memory.layout();
  Execution out;
  out.table.group_columns = ir.group_by;
  out.table.agg_columns = result_columns(ir);

  if (plan.options.mode == EngineMode::kHost) {
    if (!host_table) throw PlanError("the host engine needs the relation's table");
    HostResult hr = execute_host(ir, *host_table);
    out.table = std::move(hr.table);
    out.stats = plan.planning;
    out.stats.attribute_bits += hr.baseline_bits;
    out.stats.pim_to_host_bits += hr.baseline_bits;
    out.stats.host_baseline_bits = hr.baseline_bits;
    return out;
  }

  const TransferStats before = memory.stats();
  {
    ScratchScope scope(memory);
    const PimProgram& filter = scope.hold(compile_predicate(memory, ir.predicate));
    exec_program(memory, filter);

    if (plan.options.mode == EngineMode::kFilter) {
      out.table = host_aggregate(memory, ir, filter.result);
    } else {
      std::vector<std::optional<ValueSource>> sources(ir.aggregates.size());
      for (std::size_t a = 0; a < ir.aggregates.size(); ++a) {
        if (!needs_value(ir.aggregates[a])) continue;
        auto prog = value_program(memory, *ir.aggregates[a].arg);
        if (prog) {
          const PimProgram& held = scope.hold(std::move(*prog));
          exec_program(memory, held);
          sources[a] = value_source(layout, *ir.aggregates[a].arg, held);
        } else {
          sources[a] = value_source(layout, *ir.aggregates[a].arg, std::nullopt);
        }
      }
      PimAggregator agg{memory, ir, plan.options.circuit, sources};

      if (!ir.grouped()) {
        out.table.rows.push_back(ResultRow{{}, *agg.run(filter.result)});
      } else {
        const std::uint32_t slot = filter.result.slot;
        ProgramBuilder cb(memory);
        const SlotCols claimed_cols = cb.output(slot, 1);
        cb.emit(slot, ColOp::set(false, claimed_cols.col(0)));
        const PimProgram& claimed = scope.hold(cb.finish(claimed_cols));
        exec_program(memory, claimed);

        for (const auto& key : plan.split.pim_groups) {
          PimProgram g = compile_predicate(memory, group_predicate(ir.group_by, key), slot,
                                           filter.result);
          try {
            exec_program(memory, g);
            if (auto values = agg.run(g.result)) {
              out.table.rows.push_back(ResultRow{key, std::move(*values)});
              ProgramBuilder ob(memory);
              const SlotCols m = ob.bring(g.result, slot);
              ob.emit(slot, ColOp::binary(OpKind::kOr, claimed.result.col(0), m.col(0),
                                          claimed.result.col(0)));
              PimProgram claim = ob.finish(claimed.result);
              exec_program(memory, claim);
              release_temps(memory, claim);
            }
          } catch (...) {
            release(memory, g);
            throw;
          }
          release(memory, g);
        }

        if (plan.host_pass) {
          ProgramBuilder hb(memory);
          const SlotCols rest = hb.output(slot, 1);
          const SlotCols nc = hb.temp(slot, 1);
          hb.emit(slot, ColOp::unary(OpKind::kNot, claimed.result.col(0), nc.col(0)));
          hb.emit(slot, ColOp::binary(OpKind::kAnd, filter.result.col(0), nc.col(0), rest.col(0)));
          const PimProgram& host_mask = scope.hold(hb.finish(rest));
          exec_program(memory, host_mask);
          ResultTable host_rows = host_aggregate(memory, ir, host_mask.result);
          for (auto& r : host_rows.rows) out.table.rows.push_back(std::move(r));
        }
        sort_rows(out.table);
      }
    }
  }
  out.stats = (memory.stats() - before) + plan.planning;
  out.stats.host_baseline_bits = host_baseline_bits(ir, layout.schema, memory.record_count());
  return out;
}

QueryRun run_query(const QueryIR& ir, PimMemory& memory, const EngineOptions& options,
                   const Table* host_table) {
  QueryRun run;
  run.plan = plan_query(ir, memory, options);
  run.execution = execute_plan(run.plan, memory, host_table);
  return run;
}

}  // namespace pimolap

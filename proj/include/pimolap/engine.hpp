#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pimolap/expr.hpp"
#include "pimolap/isa.hpp"
#include "pimolap/memory.hpp"
#include "pimolap/oracle.hpp"

namespace pimolap {

// pim: every aggregation in PIM. hybrid: GROUP-BY split between PIM and host
// by the cost model. host: the row-store reference scan. filter: PIM filter,
// host aggregation of the selected records.
enum class EngineMode : std::uint8_t { kPim, kHybrid, kHost, kFilter };
std::string_view engine_name(EngineMode mode);
EngineMode parse_engine(std::string_view text);

struct CostParams {
  double c_pim_op = 1;      // per column op per page
  double c_bit_xfer = 4;    // per bit crossing the PIM/host boundary
  double c_host_rec = 16;   // per record aggregated on the host
  double c_periph_row = 1;  // per row scanned by the peripheral circuit per array

  nlohmann::json to_json() const;
  // Missing fields keep their defaults; negative values are rejected.
  static CostParams from_json(const nlohmann::json& j);
  friend bool operator==(const CostParams&, const CostParams&) = default;
};

struct GroupEstimates {
  double sample_fraction = 1;
  std::map<GroupKey, double> groups;  // sample count / sample_fraction
  bool unseen_mass_flag = false;      // sampling may have missed groups
  std::uint64_t sampled_records = 0;

  nlohmann::json to_json() const;
};

// Bernoulli sample of records; reads the sampled records' group attributes
// (and the predicate's attributes, to count only selected records) through
// the accounted facade on the sample channel.
GroupEstimates estimate_groups(PimMemory& memory, const std::vector<std::string>& group_attrs,
                               double sample_fraction, std::uint64_t seed,
                               const PredicateExpr& predicate = PredicateExpr::truth());

// Per-group PIM cost is independent of the group's size; host cost is per
// selected record and independent of the number of groups.
struct CostModel {
  std::map<GroupKey, double> pim_group_cost;  // falls back to pim_default
  double pim_default = 0;
  double host_per_record = 0;

  double pim_cost(const GroupKey& key) const;
};

// Modeled cost of routing `pim` groups to PIM and every other estimated
// group to the host.
double cost_of(const std::vector<GroupKey>& pim, const GroupEstimates& estimates,
               const CostModel& model);

struct GroupSplit {
  std::vector<GroupKey> pim_groups;  // size-descending order
  std::vector<GroupKey> host_groups;
  double cost = 0;
  double pure_pim = 0;
  double pure_host = 0;
};

// Groups are visited largest first; each goes to PIM only when its PIM cost
// is strictly below its host cost, so ties stay on the host.
GroupSplit split_groups(const GroupEstimates& estimates, const CostModel& model);

struct EngineOptions {
  EngineMode mode = EngineMode::kHybrid;
  Circuit circuit = Circuit::kPurePim;
  CostParams params;
  double sample_fraction = 0.01;
  std::uint64_t seed = 42;
};

struct QueryPlan {
  QueryIR ir;
  EngineOptions options;
  std::size_t filter_ops = 0;
  std::string filter_assembly;
  std::vector<std::string> routes;  // one per aggregate
  std::optional<GroupEstimates> estimates;
  CostModel model;
  GroupSplit split;
  bool host_pass = false;  // grouped: whether unclaimed records are aggregated on the host
  TransferStats planning;  // sampling traffic

  nlohmann::json to_json() const;
};

// Checks the query against the layout, samples group sizes (grouped
// queries) and fixes the routes. Throws PlanError.
QueryPlan plan_query(const QueryIR& ir, PimMemory& memory, const EngineOptions& options);

struct Execution {
  ResultTable table;
  TransferStats stats;  // this query only, planning included
};

// Runs a plan against PIM memory. The host engine needs the plain table.
Execution execute_plan(const QueryPlan& plan, PimMemory& memory, const Table* host_table = nullptr);

struct QueryRun {
  QueryPlan plan;
  Execution execution;
};

// plan_query + execute_plan with stats covering both.
QueryRun run_query(const QueryIR& ir, PimMemory& memory, const EngineOptions& options,
                   const Table* host_table = nullptr);

}  // namespace pimolap

#include <random>
#include <set>

#include "doctest.h"
#include "pimolap/engine.hpp"
#include "pimolap/error.hpp"
#include "pimolap/query.hpp"
#include "support.hpp"

using namespace pimolap;

namespace {

EngineOptions options(EngineMode mode, Circuit circuit = Circuit::kPurePim) {
  EngineOptions o;
  o.mode = mode;
  o.circuit = circuit;
  return o;
}

std::uint64_t selected_count(const PredicateExpr& p, const Table& t) {
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < t.row_count(); ++r) n += eval_predicate(p, t, r) ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("random queries match the oracle under every engine configuration") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 30; ++i) {
    const Table t = testkit::random_table(rng, static_cast<std::size_t>(testkit::uniform(rng, 1, 900)));
    const QueryIR q = testkit::random_query(rng, t);
    const ResultTable expect = execute_host(q, t).table;
    for (const auto& cfg : testkit::engine_matrix()) {
      CAPTURE(q.to_string());
      CAPTURE(cfg.label());
      PimMemory m = testkit::memory_of(t, cfg.split, 256);
      const std::uint32_t free0 = m.scratch(0).available();
      EngineOptions o = options(cfg.mode, cfg.circuit);
      o.seed = rng();
      const QueryRun run = run_query(q, m, o);
      const auto diff = compare_results(expect, run.execution.table);
      CHECK_MESSAGE(!diff, (diff ? *diff : ""));
      CHECK(m.scratch(0).available() == free0);
    }
  }
}

TEST_CASE("host and filter engines match the oracle too") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 20; ++i) {
    const Table t = testkit::random_table(rng, 400);
    const QueryIR q = testkit::random_query(rng, t);
    const ResultTable expect = execute_host(q, t).table;
    for (EngineMode mode : {EngineMode::kHost, EngineMode::kFilter}) {
      PimMemory m = testkit::memory_of(t, Split::kTwoXb, 128);
      const QueryRun run = run_query(q, m, options(mode), &t);
      CHECK_FALSE(compare_results(expect, run.execution.table).has_value());
    }
  }
}

TEST_CASE("host engine charges exactly the row-store baseline") {
  const Table t = testkit::ssb_table(3);
  const QueryIR q = parse_query("SELECT SUM(revenue) FROM lineorder WHERE quantity < 10");
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  const QueryRun run = run_query(q, m, options(EngineMode::kHost), &t);
  CHECK(run.execution.stats.pim_to_host_bits == 6000 * (17 + 6));
  CHECK(run.execution.stats.host_baseline_bits == run.execution.stats.pim_to_host_bits);
  PimMemory m2 = testkit::memory_of(t, Split::kOneXb);
  CHECK_THROWS_AS(run_query(q, m2, options(EngineMode::kHost)), PlanError);
}

TEST_CASE("filter engine: one mask bit per record plus selected attribute reads") {
  std::mt19937_64 rng(5);
  const Table t = testkit::ssb_table(5);
  for (int i = 0; i < 10; ++i) {
    QueryIR q = parse_query("SELECT SUM(extendedprice), MAX(tax) FROM lineorder");
    q.predicate = testkit::random_predicate(rng, t.schema);
    PimMemory m = testkit::memory_of(t, Split::kOneXb);
    const TransferStats s = run_query(q, m, options(EngineMode::kFilter), &t).execution.stats;
    const std::uint64_t sel = selected_count(q.predicate, t);
    CHECK(s.mask_bits == 6000);
    CHECK(s.attribute_bits == sel * (17 + 4));
    CHECK(s.pim_to_host_bits == 6000 + sel * (17 + 4));
  }
}

TEST_CASE("non-grouped PIM aggregation reads only partials") {
  const Table t = testkit::ssb_table(2);
  const QueryIR q = parse_query("SELECT SUM(revenue), COUNT(*) FROM lineorder WHERE discount < 4");
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  const TransferStats s = run_query(q, m, options(EngineMode::kPim)).execution.stats;
  CHECK(s.mask_bits == 0);
  CHECK(s.attribute_bits == 0);
  CHECK(s.pim_to_host_bits == s.partial_bits);
  CHECK(s.pim_to_host_bits < 6000);
}

TEST_CASE("page-parallel execution gives identical results and stats") {
  const Table t = testkit::ssb_table(4);
  const QueryIR q = parse_query(
      "SELECT SUM(revenue), MIN(supplycost) FROM lineorder WHERE part.size < 20 GROUP BY supplier.region");
  PimMemory a = testkit::memory_of(t, Split::kTwoXb, 512);
  PimMemory b = testkit::memory_of(t, Split::kTwoXb, 512);
  b.set_parallelism(4);
  const QueryRun ra = run_query(q, a, options(EngineMode::kHybrid));
  const QueryRun rb = run_query(q, b, options(EngineMode::kHybrid));
  CHECK(ra.execution.table == rb.execution.table);
  CHECK(ra.execution.stats == rb.execution.stats);
}

TEST_CASE("two_xb cross-partition predicates charge inter-array copies") {
  const Table t = testkit::ssb_table(1);
  const QueryIR q = parse_query("SELECT SUM(revenue) FROM lineorder WHERE part.size < 20 AND quantity > 5");
  PimMemory one = testkit::memory_of(t, Split::kOneXb);
  PimMemory two = testkit::memory_of(t, Split::kTwoXb);
  const TransferStats s1 = run_query(q, one, options(EngineMode::kPim)).execution.stats;
  const TransferStats s2 = run_query(q, two, options(EngineMode::kPim)).execution.stats;
  CHECK(s1.inter_array_bits == 0);
  CHECK(s2.inter_array_bits > 0);
  CHECK(s2.total_bits() > s1.total_bits());
}

TEST_CASE("sampling estimates are deterministic and charged to the sample channel") {
  const Table t = testkit::ssb_table(6);
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  const TransferStats before = m.stats();
  const GroupEstimates a = estimate_groups(m, {"customer.region"}, 0.05, 9);
  const TransferStats d = m.stats() - before;
  CHECK(d.sample_bits == a.sampled_records * 3);
  CHECK(d.pim_to_host_bits == d.sample_bits);
  const GroupEstimates b = estimate_groups(m, {"customer.region"}, 0.05, 9);
  CHECK(a.groups == b.groups);
  CHECK(a.unseen_mass_flag);
  double total = 0;
  for (const auto& [k, n] : a.groups) total += n;
  CHECK(total == doctest::Approx(a.sampled_records / 0.05));

  const GroupEstimates full = estimate_groups(m, {"customer.region"}, 1.0, 0);
  CHECK_FALSE(full.unseen_mass_flag);
  CHECK(full.sampled_records == 6000);
  CHECK_THROWS_AS(estimate_groups(m, {"customer.region"}, 0, 0), PlanError);
  CHECK_THROWS_AS(estimate_groups(m, {"customer.region"}, 1.5, 0), PlanError);
}

TEST_CASE("sampling counts only records that pass the predicate") {
  const Table t = testkit::ssb_table(6);
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  const GroupEstimates e =
      estimate_groups(m, {"tax"}, 1.0, 0, PredicateExpr::compare("tax", CmpOp::kLt, 3));
  for (const auto& [k, n] : e.groups) CHECK(k[0] < 3);
}

TEST_CASE("split rule: PIM only when strictly cheaper, ties to host") {
  GroupEstimates e;
  e.groups = {{{1}, 100}, {{2}, 10}, {{3}, 50}};
  CostModel model;
  model.pim_default = 500;
  model.host_per_record = 10;  // host costs 1000, 100, 500
  const GroupSplit s = split_groups(e, model);
  CHECK(s.pim_groups == std::vector<GroupKey>{{1}});
  CHECK(s.host_groups == std::vector<GroupKey>{{3}, {2}});
  CHECK(s.cost == 500 + 500 + 100);
  CHECK(s.pure_pim == 1500);
  CHECK(s.pure_host == 1600);
  CHECK(cost_of({{2}}, e, model) == 1000 + 500 + 500);
}

TEST_CASE("hybrid recovers groups that sampling missed") {
  std::mt19937_64 rng(3);
  Table t;
  t.schema = {{"g", 5, Signedness::kUnsigned}, {"v", 10, Signedness::kUnsigned}};
  for (int i = 0; i < 3000; ++i) t.append_row({testkit::uniform(rng, 0, 1), testkit::uniform(rng, 0, 1023)});
  for (int g = 10; g < 20; ++g) t.append_row({g, 7});
  const QueryIR q = parse_query("SELECT SUM(v), COUNT(*) FROM r GROUP BY g");
  const ResultTable expect = execute_host(q, t).table;
  for (EngineMode mode : {EngineMode::kHybrid, EngineMode::kPim}) {
    PimMemory m = testkit::memory_of(t, Split::kOneXb);
    EngineOptions o = options(mode);
    o.sample_fraction = 0.01;
    const QueryRun run = run_query(q, m, o);
    CHECK(run.plan.host_pass);
    CHECK_FALSE(compare_results(expect, run.execution.table).has_value());
  }
}

TEST_CASE("plan errors") {
  const Table t = testkit::ssb_table(1);
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  CHECK_THROWS_AS(plan_query(parse_query("SELECT SUM(nope) FROM lineorder"), m, options(EngineMode::kPim)),
                  PlanError);
  EngineOptions o = options(EngineMode::kHybrid);
  o.sample_fraction = 0;
  CHECK_THROWS_AS(plan_query(parse_query("SELECT COUNT(*) FROM lineorder GROUP BY tax"), m, o), PlanError);
  CHECK_THROWS_AS(parse_engine("gpu"), PlanError);
  CHECK(parse_engine("hybrid") == EngineMode::kHybrid);
  CHECK(engine_name(EngineMode::kHybrid) == "hybrid-groupby");
}

TEST_CASE("plan JSON lists routes, estimates and all three modeled costs") {
  const Table t = testkit::ssb_table(1);
  PimMemory m = testkit::memory_of(t, Split::kOneXb);
  const QueryPlan p = plan_query(
      parse_query("SELECT AVG(quantity) FROM lineorder GROUP BY customer.region"), m,
      options(EngineMode::kHybrid));
  const nlohmann::json j = p.to_json();
  CHECK(j["routes"] == nlohmann::json{"hybrid"});
  CHECK(j["estimates"]["groups"].is_array());
  CHECK(j["modeled_cost"].contains("chosen"));
  CHECK(j["modeled_cost"].contains("pure_pim"));
  CHECK(j["modeled_cost"].contains("pure_host"));
  CHECK(j["modeled_cost"]["chosen"].get<double>() <= j["modeled_cost"]["pure_pim"].get<double>());
  CHECK(j["modeled_cost"]["chosen"].get<double>() <= j["modeled_cost"]["pure_host"].get<double>());
}

TEST_CASE("cost params JSON") {
  const CostParams p = CostParams::from_json({{"c_pim_op", 2.5}});
  CHECK(p.c_pim_op == 2.5);
  CHECK(p.c_bit_xfer == 4);
  CHECK(CostParams::from_json(p.to_json()) == p);
  CHECK_THROWS_AS(CostParams::from_json({{"c_host_rec", -1}}), PlanError);
  CHECK_THROWS_AS(CostParams::from_json({{"c_host_rec", "x"}}), PlanError);
  CHECK_THROWS_AS(CostParams::from_json(nlohmann::json::array()), PlanError);
}

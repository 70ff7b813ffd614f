#include "pimolap/report.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "pimolap/error.hpp"
#include "pimolap/query.hpp"
#include "pimolap/schema.hpp"

namespace pimolap {

nlohmann::json Geometry::to_json() const {
  return nlohmann::json{{"rows", rows}, {"cols", cols}, {"scratch_bits", scratch_bits}};
}

nlohmann::json RunConfig::to_json() const {
  return nlohmann::json{{"engine", engine_name(engine.mode)},
                        {"layout", split_name(split)},
                        {"circuit", circuit_name(engine.circuit)},
                        {"seed", engine.seed},
                        {"sample_fraction", engine.sample_fraction},
                        {"cost_params", engine.params.to_json()},
                        {"geometry", geometry.to_json()},
                        {"data", data}};
}

RelationLayout layout_for(const Schema& schema, Split split, const Geometry& geometry) {
  return plan_layout(schema, geometry.rows, geometry.cols, geometry.scratch_bits, split,
                     split == Split::kTwoXb ? dimension_attributes(schema)
                                            : std::vector<std::string>{});
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json j{{"query", query},
                   {"engine", engine_name(config.engine.mode)},
                   {"layout", split_name(config.split)},
                   {"circuit", circuit_name(config.engine.circuit)},
                   {"wall_time_ms", wall_time_ms},
                   {"config", config.to_json()}};
  if (!name.empty()) j["name"] = name;
  if (error) {
    j["error"] = *error;
    return j;
  }
  j["result"] = result.to_json();
  j["stats"] = stats.to_json();
  j["modeled_cost"] = modeled_cost;
  if (reduction_ratio) j["reduction_ratio"] = *reduction_ratio;
  return j;
}

RunReport run_report(const std::string& name, const std::string& query, const Table& relation,
                     const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.name = name;
  rep.query = query;
  rep.config = config;
  const QueryIR ir = parse_query(query);
  PimMemory memory = store_records(layout_for(relation.schema, config.split, config.geometry),
                                   relation);
  memory.set_parallelism(config.threads);
  QueryRun run = run_query(ir, memory, config.engine, &relation);
  rep.result = std::move(run.execution.table);
  rep.stats = run.execution.stats;
  if (rep.stats.host_baseline_bits > 0 && rep.stats.pim_to_host_bits > 0) {
    rep.reduction_ratio = static_cast<double>(rep.stats.host_baseline_bits) /
                          static_cast<double>(rep.stats.pim_to_host_bits);
  }
  rep.modeled_cost = {{"chosen", run.plan.split.cost},
                      {"pure_pim", run.plan.split.pure_pim},
                      {"pure_host", run.plan.split.pure_host}};
  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

nlohmann::json explain_query(const std::string& query, const Table& relation,
                             const RunConfig& config) {
  const QueryIR ir = parse_query(query);
  PimMemory memory = store_records(layout_for(relation.schema, config.split, config.geometry),
                                   relation);
  QueryPlan plan = plan_query(ir, memory, config.engine);
  nlohmann::json j = plan.to_json();
  j["layout"] = split_name(config.split);
  j["sampling_stats"] = plan.planning.to_json();
  return j;
}

double geo_mean(const std::vector<double>& values) {
  if (values.empty()) return 0;
  double log_sum = 0;
  for (double v : values) log_sum += std::log(v);
  return std::exp(log_sum / static_cast<double>(values.size()));
}

std::vector<SuiteEntry> parse_suite(const nlohmann::json& j) {
  if (!j.is_array()) throw SchemaError("suite must be a JSON array of {name, query}");
  std::vector<SuiteEntry> out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("name") || !e.contains("query") || !e["name"].is_string() ||
        !e["query"].is_string()) {
      throw SchemaError("suite entry needs string fields name and query");
    }
    out.push_back({e["name"].get<std::string>(), e["query"].get<std::string>()});
  }
  return out;
}

BenchOutcome run_bench(const std::vector<SuiteEntry>& suite, const Table& relation,
                       const std::vector<RunConfig>& configs, unsigned jobs) {
  const std::size_t cells = suite.size() * configs.size();
  std::vector<RunReport> reports(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells; i = next++) {
      const RunConfig& cfg = configs[i / suite.size()];
      const SuiteEntry& entry = suite[i % suite.size()];
      try {
        reports[i] = run_report(entry.name, entry.query, relation, cfg);
      } catch (const std::exception& e) {
        RunReport r;
        r.name = entry.name;
        r.query = entry.query;
        r.config = cfg;
        r.error = e.what();
        reports[i] = std::move(r);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
    worker();
  }

  BenchOutcome out;
  nlohmann::json report_list = nlohmann::json::array();
  nlohmann::json summary = nlohmann::json::array();
  for (std::size_t c = 0; c < configs.size(); ++c) {
    std::vector<double> ratios;
    std::size_t failures = 0;
    for (std::size_t q = 0; q < suite.size(); ++q) {
      const RunReport& r = reports[c * suite.size() + q];
      report_list.push_back(r.to_json());
      if (r.error) {
        ++failures;
        out.failed = true;
      } else if (r.reduction_ratio) {
        ratios.push_back(*r.reduction_ratio);
      }
    }
    nlohmann::json s{{"engine", engine_name(configs[c].engine.mode)},
                     {"layout", split_name(configs[c].split)},
                     {"circuit", circuit_name(configs[c].engine.circuit)},
                     {"queries", suite.size()},
                     {"failed", failures},
                     {"ratios_counted", ratios.size()}};
    s["geo_mean_reduction_ratio"] = ratios.empty() ? nlohmann::json(nullptr)
                                                   : nlohmann::json(geo_mean(ratios));
    summary.push_back(std::move(s));
  }
  out.json = nlohmann::json{{"reports", report_list}, {"summary", summary}, {"failed", out.failed}};
  return out;
}

nlohmann::json without_wall_time(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("wall_time_ms");
    for (auto& [k, v] : j.items()) v = without_wall_time(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_wall_time(v);
  }
  return j;
}

Table load_dataset(const std::filesystem::path& dir) {
  const auto descriptor = dir / "schema.json";
  if (!std::filesystem::exists(descriptor)) {
    throw SchemaError("no schema.json in " + dir.string());
  }
  return prejoin(load_csv(descriptor));
}

}  // namespace pimolap

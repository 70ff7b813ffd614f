#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pimolap/engine.hpp"
#include "pimolap/layout.hpp"

namespace pimolap {

struct Geometry {
  std::uint32_t rows = kDefaultArrayRows;
  std::uint32_t cols = kDefaultArrayCols;
  std::uint32_t scratch_bits = 512;

  nlohmann::json to_json() const;
};

struct RunConfig {
  EngineOptions engine;
  Split split = Split::kOneXb;
  Geometry geometry;
  unsigned threads = 1;       // page-parallel PIM execution inside one query
  nlohmann::json data;        // where the relation came from, echoed in reports

  nlohmann::json to_json() const;
};

// Layout used by the command-line tools: TWO_XB moves the prejoined
// dimension attributes to the second array.
RelationLayout layout_for(const Schema& schema, Split split, const Geometry& geometry);

struct RunReport {
  std::string name;
  std::string query;
  RunConfig config;
  ResultTable result;
  TransferStats stats;
  std::optional<double> reduction_ratio;  // host_baseline_bits / pim_to_host_bits
  nlohmann::json modeled_cost;
  double wall_time_ms = 0;
  std::optional<std::string> error;

  nlohmann::json to_json() const;
};

// Parses and runs one query on a fresh PimMemory holding `relation`.
// Throws ParseError and engine errors.
RunReport run_report(const std::string& name, const std::string& query, const Table& relation,
                     const RunConfig& config);

// Plan of one query, without executing it.
nlohmann::json explain_query(const std::string& query, const Table& relation,
                             const RunConfig& config);

double geo_mean(const std::vector<double>& values);

struct SuiteEntry {
  std::string name;
  std::string query;
};
std::vector<SuiteEntry> parse_suite(const nlohmann::json& j);

struct BenchOutcome {
  nlohmann::json json;  // {reports, summary}
  bool failed = false;
};

// One report per (query, config), configs outermost. Failing cells carry
// an error field and mark the outcome failed; the rest still run.
BenchOutcome run_bench(const std::vector<SuiteEntry>& suite, const Table& relation,
                       const std::vector<RunConfig>& configs, unsigned jobs);

// Copy of a report or bench document without wall-clock fields.
nlohmann::json without_wall_time(nlohmann::json j);

// The prejoined relation of a dataset directory written by `gen` (or any
// directory with a schema.json descriptor).
Table load_dataset(const std::filesystem::path& dir);

}  // namespace pimolap

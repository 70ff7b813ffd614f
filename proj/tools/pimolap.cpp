#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pimolap/error.hpp"
#include "pimolap/query.hpp"
#include "pimolap/report.hpp"
#include "pimolap/schema.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pimolap;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitParse = 2;
constexpr int kExitFailure = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::uint32_t scale = 1;
  std::uint64_t seed = 42;
  std::string engine = "hybrid-groupby";
  std::string layout = "one_xb";
  std::string circuit = "pure";
  double sample_fraction = 0.01;
  std::string cost_params_file;
  CostParams cost_params;
  bool explain = false;
  std::string out;
  unsigned jobs = 1;
  bool pretty = false;
  bool force = false;
  std::string data;
  Geometry geometry;
  std::string query_string;
  std::string input;  // query file or suite file
};

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Defaults from the file named by PIMOLAP_CONFIG; flags given on the
// command line override them.
void apply_config_file(Options& o) {
  const char* path = std::getenv("PIMOLAP_CONFIG");
  if (path == nullptr || *path == '\0') return;
  const json j = read_json_file(path);
  if (!j.is_object()) throw UsageError(std::string(path) + ": expected a JSON object");
  try {
    if (j.contains("scale")) o.scale = j["scale"].get<std::uint32_t>();
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("engine")) o.engine = j["engine"].get<std::string>();
    if (j.contains("layout")) o.layout = j["layout"].get<std::string>();
    if (j.contains("circuit")) o.circuit = j["circuit"].get<std::string>();
    if (j.contains("sample_fraction")) o.sample_fraction = j["sample_fraction"].get<double>();
    if (j.contains("cost_params")) o.cost_params = CostParams::from_json(j["cost_params"]);
    if (j.contains("jobs")) o.jobs = j["jobs"].get<unsigned>();
    if (j.contains("data")) o.data = j["data"].get<std::string>();
    if (j.contains("rows")) o.geometry.rows = j["rows"].get<std::uint32_t>();
    if (j.contains("cols")) o.geometry.cols = j["cols"].get<std::uint32_t>();
    if (j.contains("scratch_bits")) o.geometry.scratch_bits = j["scratch_bits"].get<std::uint32_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string(path) + ": " + e.what());
  } catch (const Error& e) {
    throw UsageError(std::string(path) + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("empty list: '" + text + "'");
  return out;
}

template <typename F>
auto parse_flag(const std::string& flag, const std::string& value, F parse) {
  try {
    return parse(value);
  } catch (const Error&) {
    throw UsageError("invalid " + flag + " value '" + value + "'");
  }
}

void check_common(const Options& o) {
  if (o.scale == 0) throw UsageError("--scale must be at least 1");
  if (!(o.sample_fraction > 0 && o.sample_fraction <= 1)) {
    throw UsageError("--sample-fraction must be in (0, 1]");
  }
  if (o.jobs == 0) throw UsageError("--jobs must be at least 1");
}

std::vector<RunConfig> configs_for(const Options& o) {
  CostParams params = o.cost_params;
  if (!o.cost_params_file.empty()) {
    try {
      params = CostParams::from_json(read_json_file(o.cost_params_file));
    } catch (const Error& e) {
      throw UsageError(o.cost_params_file + ": " + e.what());
    } catch (const json::exception& e) {
      throw UsageError(o.cost_params_file + ": " + e.what());
    }
  }
  json data = o.data.empty() ? json{{"generated", {{"scale", o.scale}, {"seed", o.seed}}}}
                             : json{{"dir", o.data}};
  std::vector<RunConfig> configs;
  for (const auto& e : split_list(o.engine)) {
    const EngineMode mode = parse_flag("--engine", e, parse_engine);
    for (const auto& l : split_list(o.layout)) {
      const Split split = parse_flag("--layout", l, parse_split);
      for (const auto& c : split_list(o.circuit)) {
        RunConfig cfg;
        cfg.engine.mode = mode;
        cfg.engine.circuit = parse_flag("--circuit", c, parse_circuit);
        cfg.engine.params = params;
        cfg.engine.sample_fraction = o.sample_fraction;
        cfg.engine.seed = o.seed;
        cfg.split = split;
        cfg.geometry = o.geometry;
        cfg.threads = o.jobs;
        cfg.data = data;
        configs.push_back(cfg);
      }
    }
  }
  return configs;
}

Table relation_for(const Options& o) {
  if (o.data.empty()) return prejoin(gen_ssb_lite(o.scale, o.seed));
  return load_dataset(o.data);
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw UsageError("cannot write " + o.out);
  f << text;
}

int cmd_gen(const Options& o) {
  check_common(o);
  if (o.out.empty()) throw UsageError("gen needs --out <dir>");
  const fs::path dir = o.out;
  if (fs::exists(dir / "schema.json") && !o.force) {
    throw UsageError(dir.string() + " already holds a dataset; use --force to overwrite");
  }
  write_star(gen_ssb_lite(o.scale, o.seed), dir);
  std::cerr << "wrote " << dir.string() << "\n";
  return 0;
}

int cmd_load(const Options& o) {
  check_common(o);
  if (o.data.empty()) throw UsageError("load needs --data <dir>");
  const StarSchema star = load_csv(fs::path(o.data) / "schema.json");
  check_integrity(star);
  const Table wide = prejoin(star);
  json relations = json::array();
  relations.push_back({{"name", star.fact.name()}, {"rows", star.fact.table.row_count()}});
  for (const auto& d : star.dimensions) {
    relations.push_back({{"name", d.name()}, {"rows", d.table.row_count()}});
  }
  json layouts = json::object();
  for (const auto& cfg : configs_for(o)) {
    layouts[std::string(split_name(cfg.split))] =
        layout_for(wide.schema, cfg.split, cfg.geometry).to_json();
  }
  json j{{"relations", relations},
         {"prejoined", {{"rows", wide.row_count()}, {"attributes", wide.schema.size()}}},
         {"layouts", layouts}};
  emit(o, j.dump(2) + "\n");
  return 0;
}

std::string pretty_report(const RunReport& r) {
  std::ostringstream out;
  out << r.result.to_text();
  out << "engine " << engine_name(r.config.engine.mode) << ", layout "
      << split_name(r.config.split) << ", circuit " << circuit_name(r.config.engine.circuit)
      << "\n";
  out << "pim_to_host_bits " << r.stats.pim_to_host_bits << ", host_baseline_bits "
      << r.stats.host_baseline_bits;
  if (r.reduction_ratio) out << ", reduction " << *r.reduction_ratio;
  out << "\n";
  return out.str();
}

int cmd_run(const Options& o) {
  check_common(o);
  if (o.query_string.empty() == o.input.empty()) {
    throw UsageError("run needs exactly one of a query file or --query-string");
  }
  const std::vector<RunConfig> configs = configs_for(o);
  if (configs.size() != 1) throw UsageError("run takes a single engine, layout and circuit");
  const std::string query = o.input.empty() ? o.query_string : read_text_file(o.input);
  parse_query(query);  // parse errors before touching the data
  const Table relation = relation_for(o);
  if (o.explain) {
    emit(o, explain_query(query, relation, configs[0]).dump(2) + "\n");
    return 0;
  }
  const RunReport report = run_report("", query, relation, configs[0]);
  emit(o, o.pretty ? pretty_report(report) : report.to_json().dump(2) + "\n");
  return 0;
}

int cmd_bench(const Options& o) {
  check_common(o);
  if (o.input.empty()) throw UsageError("bench needs a suite file");
  std::vector<SuiteEntry> suite;
  try {
    suite = parse_suite(read_json_file(o.input));
  } catch (const SchemaError& e) {
    throw UsageError(o.input + ": " + e.what());
  }
  std::vector<RunConfig> configs = configs_for(o);
  for (auto& c : configs) c.threads = 1;  // parallelism is across cells
  const Table relation = relation_for(o);
  const BenchOutcome outcome = run_bench(suite, relation, configs, o.jobs);
  if (o.pretty) {
    std::ostringstream out;
    for (const auto& s : outcome.json["summary"]) {
      out << s["engine"].get<std::string>() << " " << s["layout"].get<std::string>() << " "
          << s["circuit"].get<std::string>() << ": geo-mean reduction "
          << s["geo_mean_reduction_ratio"].dump() << ", failed " << s["failed"].dump() << "\n";
    }
    emit(o, out.str());
  } else {
    emit(o, outcome.json.dump(2) + "\n");
  }
  if (outcome.failed) {
    for (const auto& r : outcome.json["reports"]) {
      if (r.contains("error")) {
        std::cerr << "query " << r["name"].get<std::string>() << ": "
                  << r["error"].get<std::string>() << "\n";
      }
    }
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  try {
    apply_config_file(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"Bulk-bitwise processing-in-memory OLAP simulator"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scale", o.scale, "SSB-lite scale factor")->capture_default_str();
    sub->add_option("--seed", o.seed, "seed for generation and sampling")->capture_default_str();
    sub->add_option("--out", o.out, "output file (gen: directory)");
  };
  auto add_engine = [&](CLI::App* sub, bool lists) {
    const std::string suffix = lists ? " (comma list)" : "";
    sub->add_option("--engine", o.engine, "pim | hybrid-groupby | host | filter" + suffix)
        ->capture_default_str();
    sub->add_option("--layout", o.layout, "one_xb | two_xb" + suffix)->capture_default_str();
    sub->add_option("--circuit", o.circuit, "pure | peripheral" + suffix)->capture_default_str();
    sub->add_option("--sample-fraction", o.sample_fraction, "GROUP-BY sampling fraction")
        ->capture_default_str();
    sub->add_option("--cost-params", o.cost_params_file, "cost parameter JSON file");
    sub->add_option("--data", o.data, "dataset directory (default: generate from --scale/--seed)");
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str();
    sub->add_option("--rows", o.geometry.rows, "rows per cell array")->capture_default_str();
    sub->add_option("--cols", o.geometry.cols, "columns per cell array")->capture_default_str();
    sub->add_option("--scratch-bits", o.geometry.scratch_bits, "scratch columns per array")
        ->capture_default_str();
    sub->add_flag("--pretty", o.pretty, "human-readable output");
  };

  CLI::App* gen = app.add_subcommand("gen", "write an SSB-lite dataset");
  add_common(gen);
  gen->add_flag("--force", o.force, "overwrite an existing dataset");

  CLI::App* load = app.add_subcommand("load", "load a dataset and print its layouts");
  add_common(load);
  add_engine(load, true);

  CLI::App* run = app.add_subcommand("run", "run one query");
  add_common(run);
  add_engine(run, false);
  run->add_option("query", o.input, "query file");
  run->add_option("--query-string", o.query_string, "query text");
  run->add_flag("--explain", o.explain, "print the plan without executing");

  CLI::App* bench = app.add_subcommand("bench", "run a query suite over a configuration matrix");
  add_common(bench);
  add_engine(bench, true);
  bench->add_option("suite", o.input, "suite file: JSON array of {name, query}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(o);
    if (load->parsed()) return cmd_load(o);
    if (run->parsed()) return cmd_run(o);
    return cmd_bench(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pimolap::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

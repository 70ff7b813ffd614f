// Black-box tests of the command-line tool: exit codes, files and JSON.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args) {
  const std::string cmd = std::string(PIMOLAP_BIN) + " " + args + " 2>/dev/null";
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) o.out.append(buf, n);
  const int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pimolap_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string suite_path() { return std::string(PIMOLAP_SOURCE_DIR) + "/queries/ssb_lite.json"; }

}  // namespace

TEST_CASE("gen: deterministic files, creates the directory, refuses to overwrite") {
  const fs::path a = scratch_dir("gen_a") / "nested";
  const fs::path b = scratch_dir("gen_b");
  CHECK(run_cli("gen --scale 1 --seed 42 --out " + a.string()).code == 0);
  CHECK(run_cli("gen --scale 1 --seed 42 --out " + b.string()).code == 0);
  for (const char* f : {"lineorder.csv", "date.csv", "customer.csv", "part.csv", "supplier.csv",
                        "schema.json", "dictionaries.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(run_cli("gen --scale 1 --seed 42 --out " + a.string()).code == 1);
  CHECK(run_cli("gen --scale 1 --seed 42 --force --out " + a.string()).code == 0);
  CHECK(run_cli("gen --scale 0 --out " + scratch_dir("gen_c").string()).code == 1);
  fs::remove_all(a.parent_path());
  fs::remove_all(b);
}

TEST_CASE("run: exit codes") {
  CHECK(run_cli("run --query-string 'SELECT COUNT(*) FROM lineorder WHERE tax < 3'").code == 0);
  CHECK(run_cli("run --query-string 'SELECT COUNT(* FROM lineorder'").code == 2);
  CHECK(run_cli("run --query-string 'SELECT SUM(nope) FROM lineorder'").code == 3);
  CHECK(run_cli("run --engine gpu --query-string 'SELECT COUNT(*) FROM lineorder'").code == 1);
  CHECK(run_cli("run --layout three_xb --query-string 'SELECT COUNT(*) FROM lineorder'").code == 1);
  CHECK(run_cli("run --circuit analog --query-string 'SELECT COUNT(*) FROM lineorder'").code == 1);
  CHECK(run_cli("run").code == 1);
  CHECK(run_cli("frobnicate").code == 1);
  CHECK(run_cli("run --data /nonexistent/dir --query-string 'SELECT COUNT(*) FROM lineorder'").code == 3);
}

TEST_CASE("run: pim and host report identical rows") {
  const std::string q = "'SELECT SUM(revenue), AVG(quantity) FROM lineorder WHERE part.size < 25 GROUP BY customer.region'";
  const Outcome p = run_cli("run --engine pim --query-string " + q);
  const Outcome h = run_cli("run --engine host --query-string " + q);
  REQUIRE(p.code == 0);
  REQUIRE(h.code == 0);
  CHECK(json::parse(p.out)["result"] == json::parse(h.out)["result"]);
}

TEST_CASE("run: two_xb with a cross-partition predicate reports inter-array bits") {
  const Outcome o = run_cli(
      "run --layout two_xb --engine pim --query-string "
      "'SELECT SUM(revenue) FROM lineorder WHERE part.size < 20 AND quantity > 5'");
  REQUIRE(o.code == 0);
  CHECK(json::parse(o.out)["stats"]["inter_array_bits"].get<std::uint64_t>() > 0);
}

TEST_CASE("run: data directory, query file, --out, --explain and --pretty") {
  const fs::path d = scratch_dir("run_data");
  REQUIRE(run_cli("gen --seed 7 --out " + d.string()).code == 0);
  {
    std::ofstream(d / "q.sql") << "SELECT MIN(supplycost) FROM lineorder WHERE discount = 3\n";
  }
  const fs::path out = d / "report.json";
  REQUIRE(run_cli("run --data " + d.string() + " " + (d / "q.sql").string() + " --out " + out.string()).code == 0);
  const json r = json::parse(slurp(out));
  CHECK(r["config"]["data"]["dir"] == d.string());
  const Outcome gen = run_cli("run --seed 7 " + (d / "q.sql").string());
  CHECK(json::parse(gen.out)["result"] == r["result"]);

  const Outcome ex = run_cli("run --explain --query-string 'SELECT COUNT(*) FROM lineorder GROUP BY tax'");
  REQUIRE(ex.code == 0);
  const json plan = json::parse(ex.out);
  CHECK(plan.contains("routes"));
  CHECK(plan.contains("modeled_cost"));
  CHECK_FALSE(plan.contains("result"));

  const Outcome pretty = run_cli("run --pretty --query-string 'SELECT COUNT(*) FROM lineorder'");
  CHECK(pretty.out.find("COUNT(*)") != std::string::npos);
  CHECK_FALSE(json::accept(pretty.out));
  fs::remove_all(d);
}

TEST_CASE("load prints relation sizes and layouts") {
  const fs::path d = scratch_dir("load");
  REQUIRE(run_cli("gen --out " + d.string()).code == 0);
  const Outcome o = run_cli("load --data " + d.string() + " --layout one_xb,two_xb");
  REQUIRE(o.code == 0);
  const json j = json::parse(o.out);
  CHECK(j["prejoined"]["rows"] == 6000);
  CHECK(j["layouts"].contains("two_xb"));
  CHECK(run_cli("load").code == 1);
  fs::remove_all(d);
}

TEST_CASE("PIMOLAP_CONFIG supplies defaults that flags override") {
  const fs::path d = scratch_dir("config");
  fs::create_directories(d);
  std::ofstream(d / "cfg.json") << R"({"engine": "host", "seed": 5, "cost_params": {"c_pim_op": 3}})";
  const std::string env = "PIMOLAP_CONFIG=" + (d / "cfg.json").string() + " ";
  const std::string cmd = std::string(PIMOLAP_BIN);
  auto run_env = [&](const std::string& args) {
    const std::string full = env + cmd + " " + args + " 2>/dev/null";
    FILE* p = popen(full.c_str(), "r");
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    pclose(p);
    return json::parse(out);
  };
  const json a = run_env("run --query-string 'SELECT COUNT(*) FROM lineorder'");
  CHECK(a["engine"] == "host");
  CHECK(a["config"]["seed"] == 5);
  CHECK(a["config"]["cost_params"]["c_pim_op"] == 3.0);
  const json b = run_env("run --engine pim --seed 9 --query-string 'SELECT COUNT(*) FROM lineorder'");
  CHECK(b["engine"] == "pim");
  CHECK(b["config"]["seed"] == 9);
  std::ofstream(d / "bad.json") << "[1, 2";
  const std::string bad = "PIMOLAP_CONFIG=" + (d / "bad.json").string() + " " + cmd + " run --query-string x 2>/dev/null";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  fs::remove_all(d);
}

TEST_CASE("cost params file") {
  const fs::path d = scratch_dir("costs");
  fs::create_directories(d);
  std::ofstream(d / "c.json") << R"({"c_host_rec": 100})";
  std::ofstream(d / "neg.json") << R"({"c_host_rec": -1})";
  const Outcome o = run_cli("run --cost-params " + (d / "c.json").string() +
                            " --query-string 'SELECT COUNT(*) FROM lineorder'");
  REQUIRE(o.code == 0);
  CHECK(json::parse(o.out)["config"]["cost_params"]["c_host_rec"] == 100.0);
  CHECK(run_cli("run --cost-params " + (d / "neg.json").string() +
                " --query-string 'SELECT COUNT(*) FROM lineorder'").code == 1);
  fs::remove_all(d);
}

TEST_CASE("bench: matrix, summary, determinism and failure exit") {
  const fs::path d = scratch_dir("bench");
  fs::create_directories(d);
  const Outcome a = run_cli("bench " + suite_path() + " --engine pim,hybrid-groupby --layout one_xb,two_xb --jobs 2");
  const Outcome b = run_cli("bench " + suite_path() + " --engine pim,hybrid-groupby --layout one_xb,two_xb");
  REQUIRE(a.code == 0);
  const json ja = json::parse(a.out);
  const json suite = json::parse(slurp(suite_path()));
  CHECK(ja["reports"].size() == suite.size() * 4);
  CHECK(ja["summary"].size() == 4);
  auto strip = [](json j) {
    for (auto& r : j["reports"]) r.erase("wall_time_ms");
    return j;
  };
  CHECK(strip(ja).dump() == strip(json::parse(b.out)).dump());

  std::ofstream(d / "bad.json") << R"([{"name": "ok", "query": "SELECT COUNT(*) FROM lineorder"},
                                        {"name": "broken", "query": "SELECT SUM(nope) FROM lineorder"}])";
  const Outcome f = run_cli("bench " + (d / "bad.json").string());
  CHECK(f.code == 3);
  const json jf = json::parse(f.out);
  CHECK(jf["failed"] == true);
  CHECK(jf["reports"][0].contains("result"));
  CHECK(run_cli("bench").code == 1);
  std::ofstream(d / "notsuite.json") << R"({"name": "x"})";
  CHECK(run_cli("bench " + (d / "notsuite.json").string()).code == 1);
  fs::remove_all(d);
}

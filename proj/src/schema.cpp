#include "pimolap/schema.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "pimolap/csv.hpp"
#include "pimolap/error.hpp"
#include "pimolap/isa.hpp"

namespace pimolap {

std::int64_t Dictionary::encode(const std::string& value) {
  auto [it, inserted] = codes.emplace(value, static_cast<std::int64_t>(values.size()));
  if (inserted) values.push_back(value);
  return it->second;
}

const Relation& StarSchema::dimension(std::string_view name) const {
  for (const auto& d : dimensions) {
    if (d.name() == name) return d;
  }
  throw SchemaError("unknown dimension '" + std::string(name) + "'");
}

Relation& StarSchema::dimension(std::string_view name) {
  for (auto& d : dimensions) {
    if (d.name() == name) return d;
  }
  throw SchemaError("unknown dimension '" + std::string(name) + "'");
}

namespace {

std::unordered_map<std::int64_t, std::size_t> key_index(const Relation& dim) {
  if (!dim.key) throw SchemaError("dimension '" + dim.name() + "' has no key");
  const std::size_t k = attribute_index(dim.table.schema, *dim.key);
  std::unordered_map<std::int64_t, std::size_t> index;
  for (std::size_t r = 0; r < dim.table.row_count(); ++r) {
    if (!index.emplace(dim.table.at(r, k), r).second) {
      throw SchemaError("dimension '" + dim.name() + "' row " + std::to_string(r + 1) +
                        ": duplicate key " + std::to_string(dim.table.at(r, k)));
    }
  }
  return index;
}

AttributeSpec unsigned_attr(std::string name, std::int64_t domain_max) {
  return AttributeSpec{std::move(name), bits_for_range(0, domain_max, Signedness::kUnsigned),
                       Signedness::kUnsigned};
}

}  // namespace

void check_integrity(const StarSchema& star) {
  for (const auto& fk : star.fact.foreign_keys) {
    const Relation& dim = star.dimension(fk.references);
    const auto index = key_index(dim);
    const std::size_t col = attribute_index(star.fact.table.schema, fk.attribute);
    for (std::size_t r = 0; r < star.fact.table.row_count(); ++r) {
      const std::int64_t v = star.fact.table.at(r, col);
      if (!index.contains(v)) {
        throw SchemaError("relation '" + star.fact.name() + "' row " + std::to_string(r + 1) +
                          ": " + fk.attribute + " = " + std::to_string(v) +
                          " has no match in '" + dim.name() + "'");
      }
    }
  }
  for (const auto& dim : star.dimensions) key_index(dim);
}

StarSchema gen_ssb_lite(std::uint32_t scale, std::uint64_t seed) {
  if (scale == 0) throw SchemaError("scale must be positive");
  std::mt19937_64 rng(seed);
  // Modulo keeps the stream identical across standard libraries.
  auto uni = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  const std::int64_t n_part = 200 * std::int64_t{scale};
  const std::int64_t n_supp = 20 * std::int64_t{scale};
  const std::int64_t n_cust = 300 * std::int64_t{scale};
  const std::int64_t n_fact = 6000 * std::int64_t{scale};
  constexpr int kDates = 365;

  StarSchema star;

  Relation date;
  date.table.name = "date";
  date.key = "datekey";
  date.table.schema = {unsigned_attr("datekey", 19991231), unsigned_attr("year", 1999),
                       unsigned_attr("month", 12), unsigned_attr("yearmonthnum", 199912),
                       unsigned_attr("weeknuminyear", 53), unsigned_attr("daynuminweek", 7)};
  std::vector<std::int64_t> datekeys;
  {
    using namespace std::chrono;
    sys_days day = sys_days{year{1992} / January / 1};
    for (int i = 0; i < kDates; ++i, day += days{7}) {
      const year_month_day ymd{day};
      const int y = static_cast<int>(ymd.year());
      const int m = static_cast<int>(static_cast<unsigned>(ymd.month()));
      const int d = static_cast<int>(static_cast<unsigned>(ymd.day()));
      const auto doy = (day - sys_days{ymd.year() / January / 1}).count();
      const std::int64_t key = y * 10000 + m * 100 + d;
      datekeys.push_back(key);
      date.table.append_row({key, y, m, y * 100 + m, doy / 7 + 1,
                             static_cast<std::int64_t>(weekday{day}.iso_encoding())});
    }
  }

  Relation customer;
  customer.table.name = "customer";
  customer.key = "custkey";
  customer.table.schema = {unsigned_attr("custkey", n_cust), unsigned_attr("city", 249),
                           unsigned_attr("nation", 24), unsigned_attr("region", 4),
                           unsigned_attr("mktsegment", 4)};
  for (std::int64_t k = 1; k <= n_cust; ++k) {
    const std::int64_t nation = uni(0, 24);
    customer.table.append_row({k, nation * 10 + uni(0, 9), nation, nation / 5, uni(0, 4)});
  }

  Relation part;
  part.table.name = "part";
  part.key = "partkey";
  part.table.schema = {unsigned_attr("partkey", n_part), unsigned_attr("mfgr", 5),
                       unsigned_attr("category", 55), unsigned_attr("brand", 5540),
                       unsigned_attr("size", 50)};
  for (std::int64_t k = 1; k <= n_part; ++k) {
    const std::int64_t mfgr = uni(1, 5);
    const std::int64_t category = mfgr * 10 + uni(1, 5);
    part.table.append_row({k, mfgr, category, category * 100 + uni(1, 40), uni(1, 50)});
  }

  Relation supplier;
  supplier.table.name = "supplier";
  supplier.key = "suppkey";
  supplier.table.schema = {unsigned_attr("suppkey", n_supp), unsigned_attr("city", 249),
                           unsigned_attr("nation", 24), unsigned_attr("region", 4)};
  for (std::int64_t k = 1; k <= n_supp; ++k) {
    const std::int64_t nation = uni(0, 24);
    supplier.table.append_row({k, nation * 10 + uni(0, 9), nation, nation / 5});
  }

  Relation& fact = star.fact;
  fact.table.name = "lineorder";
  fact.table.schema = {unsigned_attr("orderdate", 19991231), unsigned_attr("custkey", n_cust),
                       unsigned_attr("partkey", n_part),     unsigned_attr("suppkey", n_supp),
                       unsigned_attr("quantity", 50),        unsigned_attr("extendedprice", 100000),
                       unsigned_attr("discount", 10),        unsigned_attr("revenue", 100000),
                       unsigned_attr("supplycost", 1200),    unsigned_attr("tax", 8)};
  fact.foreign_keys = {{"orderdate", "date"},
                       {"custkey", "customer"},
                       {"partkey", "part"},
                       {"suppkey", "supplier"}};
  fact.table.values.reserve(static_cast<std::size_t>(n_fact) * fact.table.schema.size());
  for (std::int64_t i = 0; i < n_fact; ++i) {
    const std::int64_t orderdate = datekeys[static_cast<std::size_t>(uni(0, kDates - 1))];
    const std::int64_t custkey = uni(1, n_cust);
    const std::int64_t partkey = uni(1, n_part);
    const std::int64_t suppkey = uni(1, n_supp);
    const std::int64_t quantity = uni(1, 50);
    const std::int64_t price = uni(90, 2000);
    const std::int64_t extended = quantity * price;
    const std::int64_t discount = uni(0, 10);
    const std::int64_t revenue = extended * (100 - discount) / 100;
    const std::int64_t supplycost = uni(60, 1200);
    const std::int64_t tax = uni(0, 8);
    fact.table.append_row({orderdate, custkey, partkey, suppkey, quantity, extended, discount,
                           revenue, supplycost, tax});
  }

  star.dimensions = {std::move(date), std::move(customer), std::move(part), std::move(supplier)};
  star.fact.dictionary_encoded.assign(star.fact.table.schema.size(), false);
  for (auto& d : star.dimensions) d.dictionary_encoded.assign(d.table.schema.size(), false);
  return star;
}

Table prejoin(const StarSchema& star) {
  check_integrity(star);
  const Table& fact = star.fact.table;
  Table wide;
  wide.name = fact.name;
  wide.schema = fact.schema;

  struct Join {
    std::size_t fk_col;
    const Table* dim;
    std::unordered_map<std::int64_t, std::size_t> index;
    std::vector<std::size_t> cols;
  };
  std::vector<Join> joins;
  for (const auto& fk : star.fact.foreign_keys) {
    const Relation& dim = star.dimension(fk.references);
    Join j{attribute_index(fact.schema, fk.attribute), &dim.table, key_index(dim), {}};
    for (std::size_t c = 0; c < dim.table.schema.size(); ++c) {
      const AttributeSpec& a = dim.table.schema[c];
      if (a.name == *dim.key) continue;
      j.cols.push_back(c);
      wide.schema.push_back(AttributeSpec{dim.name() + "." + a.name, a.width, a.sign});
    }
    joins.push_back(std::move(j));
  }
  validate_schema(wide.schema);

  const std::size_t n = fact.row_count();
  wide.values.reserve(n * wide.schema.size());
  std::vector<std::int64_t> row;
  for (std::size_t r = 0; r < n; ++r) {
    row.assign(fact.values.begin() + static_cast<std::ptrdiff_t>(r * fact.schema.size()),
               fact.values.begin() + static_cast<std::ptrdiff_t>((r + 1) * fact.schema.size()));
    for (const auto& j : joins) {
      const std::size_t dr = j.index.at(fact.at(r, j.fk_col));
      for (auto c : j.cols) row.push_back(j.dim->at(dr, c));
    }
    wide.append_row(row);
  }
  return wide;
}

std::vector<std::string> dimension_attributes(const Schema& schema) {
  std::vector<std::string> out;
  for (const auto& a : schema) {
    if (a.name.find('.') != std::string::npos) out.push_back(a.name);
  }
  return out;
}

nlohmann::json descriptor_json(const StarSchema& star) {
  nlohmann::json rels = nlohmann::json::array();
  auto describe = [&](const Relation& rel) {
    nlohmann::json attrs = nlohmann::json::array();
    for (std::size_t c = 0; c < rel.table.schema.size(); ++c) {
      const auto& a = rel.table.schema[c];
      const bool text = c < rel.dictionary_encoded.size() && rel.dictionary_encoded[c];
      attrs.push_back({{"name", a.name},
                       {"type", text ? "string" : "int"},
                       {"signed", a.is_signed()},
                       {"width", a.width}});
    }
    nlohmann::json fks = nlohmann::json::array();
    for (const auto& fk : rel.foreign_keys) {
      fks.push_back({{"attribute", fk.attribute}, {"references", fk.references}});
    }
    nlohmann::json r{{"name", rel.name()},
                     {"file", rel.name() + ".csv"},
                     {"attributes", attrs},
                     {"foreign_keys", fks}};
    r["key"] = rel.key ? nlohmann::json(*rel.key) : nlohmann::json(nullptr);
    rels.push_back(std::move(r));
  };
  describe(star.fact);
  for (const auto& d : star.dimensions) describe(d);
  return nlohmann::json{{"fact", star.fact.name()}, {"relations", rels}};
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << content;
  if (!out) throw SchemaError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_star(const StarSchema& star, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_relation = [&](const Relation& rel) {
    std::ostringstream out;
    CsvRow header;
    for (const auto& a : rel.table.schema) header.push_back(a.name);
    write_csv_row(out, header);
    CsvRow row(rel.table.schema.size());
    for (std::size_t r = 0; r < rel.table.row_count(); ++r) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        const std::int64_t v = rel.table.at(r, c);
        const bool text = c < rel.dictionary_encoded.size() && rel.dictionary_encoded[c];
        if (text) {
          const auto& dict = star.dictionaries.at(rel.name() + "." + rel.table.schema[c].name);
          row[c] = dict.values.at(static_cast<std::size_t>(v));
        } else {
          row[c] = std::to_string(v);
        }
      }
      write_csv_row(out, row);
    }
    write_file(dir / (rel.name() + ".csv"), out.str());
  };
  write_relation(star.fact);
  for (const auto& d : star.dimensions) write_relation(d);
  write_file(dir / "schema.json", descriptor_json(star).dump(2) + "\n");
  nlohmann::json dicts = nlohmann::json::object();
  for (const auto& [name, dict] : star.dictionaries) dicts[name] = dict.to_json();
  write_file(dir / "dictionaries.json", dicts.dump(2) + "\n");
}

namespace {

std::string json_string(const nlohmann::json& j, const char* field, const std::string& where) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw SchemaError(where + ": missing string field '" + field + "'");
  }
  return j[field].get<std::string>();
}

Relation load_relation(const nlohmann::json& desc, const std::filesystem::path& base,
                       std::map<std::string, Dictionary>& dictionaries) {
  const std::string name = json_string(desc, "name", "descriptor relation");
  const std::string file = json_string(desc, "file", "relation '" + name + "'");
  if (!desc.contains("attributes") || !desc["attributes"].is_array()) {
    throw SchemaError("relation '" + name + "': missing attribute list");
  }
  const std::filesystem::path path = base / file;
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw SchemaError(path.string() + ": missing header row");
  const CsvRow& header = rows.front();

  struct Column {
    std::string name;
    bool text = false;
    std::optional<bool> is_signed;
    std::optional<std::uint32_t> width;
    std::size_t csv_col = 0;
  };
  std::vector<Column> cols;
  for (const auto& a : desc["attributes"]) {
    Column c;
    c.name = json_string(a, "name", "relation '" + name + "' attribute");
    const std::string type = a.value("type", std::string("int"));
    if (type != "int" && type != "string") {
      throw SchemaError("attribute '" + c.name + "': unknown type '" + type + "'");
    }
    c.text = type == "string";
    if (a.contains("signed") && !a["signed"].is_null()) c.is_signed = a["signed"].get<bool>();
    if (a.contains("width") && !a["width"].is_null()) c.width = a["width"].get<std::uint32_t>();
    auto it = std::find(header.begin(), header.end(), c.name);
    if (it == header.end()) {
      throw SchemaError(path.string() + ": missing column '" + c.name + "'");
    }
    c.csv_col = static_cast<std::size_t>(it - header.begin());
    cols.push_back(std::move(c));
  }

  Relation rel;
  rel.table.name = name;
  std::vector<std::int64_t> lo(cols.size(), 0), hi(cols.size(), 0);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    std::vector<std::int64_t> values;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string where = path.string() + " row " + std::to_string(r + 1) + " col " +
                                std::to_string(cols[c].csv_col + 1);
      if (cols[c].csv_col >= row.size()) throw SchemaError(where + ": missing value");
      const std::string& cell = row[cols[c].csv_col];
      std::int64_t v = 0;
      if (cols[c].text) {
        v = dictionaries[name + "." + cols[c].name].encode(cell);
      } else {
        const char* first = cell.data();
        const char* last = first + cell.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || cell.empty()) {
          throw SchemaError(where + ": cannot parse '" + cell + "' as an integer");
        }
      }
      lo[c] = std::min(lo[c], v);
      hi[c] = std::max(hi[c], v);
      values.push_back(v);
    }
    rel.table.values.insert(rel.table.values.end(), values.begin(), values.end());
  }
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const bool sign = cols[c].is_signed.value_or(lo[c] < 0);
    const Signedness s = sign ? Signedness::kSigned : Signedness::kUnsigned;
    AttributeSpec spec{cols[c].name, cols[c].width.value_or(bits_for_range(lo[c], hi[c], s)), s};
    if (spec.width < 1 || spec.width > 64) {
      throw SchemaError("attribute '" + spec.name + "': width must be 1..64");
    }
    if (!fits(spec, lo[c]) || !fits(spec, hi[c])) {
      throw SchemaError("relation '" + name + "' attribute '" + spec.name +
                        "': values do not fit " + std::to_string(spec.width) + " bits");
    }
    rel.table.schema.push_back(spec);
    rel.dictionary_encoded.push_back(cols[c].text);
  }
  validate_schema(rel.table.schema);

  if (desc.contains("key") && desc["key"].is_string()) {
    rel.key = desc["key"].get<std::string>();
    attribute_index(rel.table.schema, *rel.key);
  }
  if (desc.contains("foreign_keys")) {
    for (const auto& fk : desc["foreign_keys"]) {
      ForeignKey k{json_string(fk, "attribute", "foreign key"),
                   json_string(fk, "references", "foreign key")};
      attribute_index(rel.table.schema, k.attribute);
      rel.foreign_keys.push_back(std::move(k));
    }
  }
  return rel;
}

}  // namespace

StarSchema load_csv(const std::filesystem::path& descriptor) {
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(read_file(descriptor));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(descriptor.string() + ": " + e.what());
  }
  const std::string fact_name = json_string(desc, "fact", descriptor.string());
  if (!desc.contains("relations") || !desc["relations"].is_array()) {
    throw SchemaError(descriptor.string() + ": missing relations list");
  }
  StarSchema star;
  bool found_fact = false;
  const auto base = descriptor.parent_path();
  try {
    for (const auto& r : desc["relations"]) {
      Relation rel = load_relation(r, base, star.dictionaries);
      if (rel.name() == fact_name) {
        star.fact = std::move(rel);
        found_fact = true;
      } else {
        if (!rel.key) throw SchemaError("dimension '" + rel.name() + "' declares no key");
        star.dimensions.push_back(std::move(rel));
      }
    }
  } catch (const LayoutError& e) {
    throw SchemaError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(descriptor.string() + ": " + e.what());
  }
  if (!found_fact) throw SchemaError("fact relation '" + fact_name + "' not in descriptor");
  check_integrity(star);
  return star;
}

void update_dimension(StarSchema& star, std::string_view dim, std::int64_t key,
                      std::string_view attr, std::int64_t value) {
  Relation& d = star.dimension(dim);
  const std::size_t k = attribute_index(d.table.schema, *d.key);
  const std::size_t a = attribute_index(d.table.schema, attr);
  if (!fits(d.table.schema[a], value)) {
    throw SchemaError("value " + std::to_string(value) + " does not fit '" + std::string(attr) + "'");
  }
  for (std::size_t r = 0; r < d.table.row_count(); ++r) {
    if (d.table.at(r, k) == key) {
      d.table.at(r, a) = value;
      return;
    }
  }
  throw SchemaError("dimension '" + std::string(dim) + "' has no key " + std::to_string(key));
}

void apply_dimension_update(PimMemory& memory, std::string_view dim_attr,
                            const PredicateExpr& key_predicate, std::int64_t new_value) {
  const AttributePlacement& p = memory.layout().place(dim_attr);
  PimProgram filter = compile_predicate(memory, key_predicate, p.slot);
  try {
    exec_program(memory, filter);
    mux_update(memory, dim_attr, filter.result, new_value);
  } catch (...) {
    release(memory, filter);
    throw;
  }
  release(memory, filter);
}

}  // namespace pimolap

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pimolap/expr.hpp"
#include "pimolap/memory.hpp"
#include "pimolap/relation.hpp"

namespace pimolap {

// Dense codes for the distinct strings of one column, in first-appearance order.
struct Dictionary {
  std::vector<std::string> values;
  std::map<std::string, std::int64_t> codes;

  std::int64_t encode(const std::string& value);
  nlohmann::json to_json() const { return values; }
  friend bool operator==(const Dictionary&, const Dictionary&) = default;
};

struct ForeignKey {
  std::string attribute;   // fact attribute
  std::string references;  // dimension relation name
  friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct Relation {
  Table table;
  std::optional<std::string> key;  // dimensions only
  std::vector<ForeignKey> foreign_keys;
  // Source column types for the descriptor: true where the CSV held strings.
  std::vector<bool> dictionary_encoded;

  const std::string& name() const { return table.name; }
  friend bool operator==(const Relation&, const Relation&) = default;
};

struct StarSchema {
  Relation fact;
  std::vector<Relation> dimensions;
  // Keyed "<relation>.<attribute>".
  std::map<std::string, Dictionary> dictionaries;

  const Relation& dimension(std::string_view name) const;
  Relation& dimension(std::string_view name);
  friend bool operator==(const StarSchema&, const StarSchema&) = default;
};

// Unique dimension keys, resolvable foreign keys. Throws SchemaError naming
// the offending relation and row.
void check_integrity(const StarSchema& star);

// Deterministic small star with SSB-like shapes: 6000*scale lineorder rows,
// part 200*scale, supplier 20*scale, customer 300*scale, 365 dates.
StarSchema gen_ssb_lite(std::uint32_t scale, std::uint64_t seed);

// Fact equi-joined with every dimension on its key, in fact row order.
// Dimension attributes other than the key appear as "<dim>.<attr>".
Table prejoin(const StarSchema& star);

// The attributes a prejoined relation took from dimensions; TWO_XB puts
// them in the second array.
std::vector<std::string> dimension_attributes(const Schema& schema);

// Descriptor JSON: {fact, relations: [{name, file, key, attributes:
// [{name, type, signed, width}], foreign_keys: [{attribute, references}]}]}.
nlohmann::json descriptor_json(const StarSchema& star);
// Writes one CSV per relation plus schema.json and dictionaries.json.
void write_star(const StarSchema& star, const std::filesystem::path& dir);
// Loads the relations named by a descriptor file; CSV paths are relative
// to the descriptor's directory.
StarSchema load_csv(const std::filesystem::path& descriptor);

// Sets `attr` of the dimension record with `key` (star side of an update).
void update_dimension(StarSchema& star, std::string_view dim, std::int64_t key,
                      std::string_view attr, std::int64_t value);

// In-place update of a prejoined dimension attribute on every record the
// key predicate selects, using a PIM filter and MUX; reads no attribute
// values back to the host.
void apply_dimension_update(PimMemory& memory, std::string_view dim_attr,
                            const PredicateExpr& key_predicate, std::int64_t new_value);

}  // namespace pimolap

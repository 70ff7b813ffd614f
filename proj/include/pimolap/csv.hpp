#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pimolap {

using CsvRow = std::vector<std::string>;

// RFC-4180 records: comma separated, optional double quotes with "" as an
// escaped quote, CRLF or LF line ends. Throws SchemaError on an
// unterminated quote, naming the line where the field started.
std::vector<CsvRow> parse_csv(std::string_view text);

// Quotes a field only when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);
void write_csv_row(std::ostream& out, const CsvRow& row);

}  // namespace pimolap

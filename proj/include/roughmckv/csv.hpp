#pragma once

#include <string>
#include <vector>

namespace rmkv {

// One tabular artifact: a header row plus data rows of the same arity.
// Cells hold the exact text that lands in the file, so equal tables
// serialize to equal bytes.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// Decimal text for a double at 17 significant digits, enough for strtod to
// reproduce the value exactly. The C locale keeps the '.' separator.
std::string csv_number(double v);

// Writes the table with RFC 4180 quoting and LF line endings, header first,
// every line newline-terminated. Throws when arities disagree or the file
// cannot be written; the message names the path.
void write_csv(const std::string& path, const CsvTable& table);

// Parses a file written by write_csv (quoted fields, doubled quotes,
// embedded separators and newlines). The first record becomes the header.
// Throws on unreadable files, unterminated quotes, or ragged rows.
CsvTable read_csv(const std::string& path);

}  // namespace rmkv

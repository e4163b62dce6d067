#include "roughmckv/csv.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace rmkv {

namespace {

std::string escape_field(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out;
    out.reserve(field.size() + 2);
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void append_record(std::string& out, const std::vector<std::string>& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i > 0) out += ',';
        out += escape_field(record[i]);
    }
    out += '\n';
}

}  // namespace

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
    if (table.header.empty()) throw std::invalid_argument("csv table needs a header row");
    for (const std::vector<std::string>& row : table.rows)
        if (row.size() != table.header.size())
            throw std::invalid_argument("csv row arity must match the header");

    std::string out;
    append_record(out, table.header);
    for (const std::vector<std::string>& row : table.rows) append_record(out, row);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write csv file: " + path);
    file.write(out.data(), std::streamsize(out.size()));
    file.flush();
    if (!file) throw std::runtime_error("cannot write csv file: " + path);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open csv file: " + path);
    const std::string text((std::istreambuf_iterator<char>(file)),
                           std::istreambuf_iterator<char>());

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool in_quotes = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && field.empty() && !quoted) {
            in_quotes = true;
            quoted = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            quoted = false;
        } else if (c == '\n') {
            record.push_back(std::move(field));
            field.clear();
            quoted = false;
            records.push_back(std::move(record));
            record.clear();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            // tolerate CRLF from hand-edited inputs
        } else {
            field += c;
        }
    }
    if (in_quotes) throw std::runtime_error("unterminated quote in csv file: " + path);
    if (!field.empty() || !record.empty() || quoted) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    if (records.empty()) throw std::runtime_error("csv file has no header: " + path);

    CsvTable table;
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size())
            throw std::runtime_error("csv row " + std::to_string(r) + " has " +
                                     std::to_string(records[r].size()) + " fields, expected " +
                                     std::to_string(table.header.size()) + ": " + path);
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

}  // namespace rmkv

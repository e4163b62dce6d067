#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "roughmckv/csv.hpp"

using namespace rmkv;

namespace {

std::string temp_csv_path(const char* tag) {
    return std::string("/tmp/roughmckv_csv_") + tag + "_" + std::to_string(std::rand()) +
           ".csv";
}

std::string slurp(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    REQUIRE(bool(file));
    return std::string((std::istreambuf_iterator<char>(file)),
                       std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("empty table writes a header-only file") {
    const std::string path = temp_csv_path("header");
    CsvTable table;
    table.header = {"t", "x"};
    write_csv(path, table);
    CHECK(slurp(path) == "t,x\n");
    const CsvTable back = read_csv(path);
    CHECK(back.header == table.header);
    CHECK(back.rows.empty());
    std::remove(path.c_str());
}

TEST_CASE("one data row makes a two-line file") {
    const std::string path = temp_csv_path("oneline");
    CsvTable table;
    table.header = {"a", "b"};
    table.rows = {{"1", "2"}};
    write_csv(path, table);
    const std::string text = slurp(path);
    CHECK(text == "a,b\n1,2\n");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    std::remove(path.c_str());
}

TEST_CASE("quoting survives separators, quotes, and newlines") {
    const std::string path = temp_csv_path("quote");
    CsvTable table;
    table.header = {"id", "note"};
    table.rows = {
        {"1", "plain"},
        {"2", "comma, inside"},
        {"3", "a \"quoted\" word"},
        {"4", "two\nlines"},
        {"5", ""},
        {"6", "trailing space "},
    };
    write_csv(path, table);
    const CsvTable back = read_csv(path);
    REQUIRE(back.rows.size() == table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        CHECK(back.rows[r][0] == table.rows[r][0]);
        CHECK(back.rows[r][1] == table.rows[r][1]);
    }
    // The quoted newline stays inside its field, so the parser sees six rows
    // even though the file has one extra physical line.
    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 8);
    std::remove(path.c_str());
}

TEST_CASE("numbers round-trip exactly through text") {
    const std::vector<double> values = {
        0.0,
        -0.0,
        1.0 / 3.0,
        std::acos(-1.0),
        6.02214076e23,
        -1.6e-300,
        5e-324,
        1.7976931348623157e308,
        123456789.123456789,
        -0.1,
    };
    const std::string path = temp_csv_path("numbers");
    CsvTable table;
    table.header = {"v"};
    for (double v : values) table.rows.push_back({csv_number(v)});
    write_csv(path, table);
    const CsvTable back = read_csv(path);
    REQUIRE(back.rows.size() == values.size());
    for (std::size_t r = 0; r < values.size(); ++r) {
        const double parsed = std::strtod(back.rows[r][0].c_str(), nullptr);
        CHECK(parsed == values[r]);
        CHECK(std::signbit(parsed) == std::signbit(values[r]));
        CHECK(back.rows[r][0].find(',') == std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("identical tables serialize to identical bytes") {
    CsvTable table;
    table.header = {"s", "t", "defect"};
    for (int i = 0; i < 40; ++i)
        table.rows.push_back({csv_number(0.25 * i), csv_number(0.25 * i + 0.25),
                              csv_number(std::sin(0.37 * i) * 1e-4)});
    const std::string first = temp_csv_path("bytes1");
    const std::string second = temp_csv_path("bytes2");
    write_csv(first, table);
    write_csv(second, table);
    CHECK(slurp(first) == slurp(second));
    std::remove(first.c_str());
    std::remove(second.c_str());
}

TEST_CASE("malformed tables and paths are refused") {
    CsvTable no_header;
    CHECK_THROWS_AS(write_csv("/tmp/never.csv", no_header), std::invalid_argument);

    CsvTable ragged;
    ragged.header = {"a", "b"};
    ragged.rows = {{"1"}};
    CHECK_THROWS_AS(write_csv("/tmp/never.csv", ragged), std::invalid_argument);

    CsvTable table;
    table.header = {"a"};
    CHECK_THROWS_WITH(write_csv("/no-such-dir/out.csv", table),
                      "cannot write csv file: /no-such-dir/out.csv");
    CHECK_THROWS_WITH(read_csv("/no-such-dir/in.csv"),
                      "cannot open csv file: /no-such-dir/in.csv");

    const std::string path = temp_csv_path("bad");
    {
        std::ofstream file(path, std::ios::binary);
        file << "a,b\n\"open quote\n";
    }
    CHECK_THROWS_AS(read_csv(path), std::runtime_error);
    {
        std::ofstream file(path, std::ios::binary);
        file << "a,b\n1,2,3\n";
    }
    CHECK_THROWS_AS(read_csv(path), std::runtime_error);
    std::remove(path.c_str());
}

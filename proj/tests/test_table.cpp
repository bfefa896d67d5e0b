#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "tadre/table.hpp"
#include "tadre/table_io.hpp"

using namespace tadre;

TEST_SUITE_BEGIN("table");

TEST_CASE("csv load: basic parse") {
    auto path = testutil::write_temp("basic.csv", "a,b\n1,2\n3,4\n");
    auto t = load_table(path, TableFormat::csv);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == Row{"1", "2"});
    CHECK(t.rows[1] == Row{"3", "4"});
    CHECK(t.load_warnings.empty());
}

TEST_CASE("csv load: quoted fields, embedded delimiters and newlines") {
    auto path = testutil::write_temp("quoted.csv",
                                     "name,notes\n\"Smith, John\",\"line1\nline2\"\n\"a\"\"b\",c\n");
    auto t = load_table(path, TableFormat::csv);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "Smith, John");
    CHECK(t.rows[0][1] == "line1\nline2");
    CHECK(t.rows[1][0] == "a\"b");
}

TEST_CASE("csv load: ragged rows pad with a warning, strict mode rejects") {
    auto path = testutil::write_temp("ragged.csv", "a,b\n1,2,3\n4\n");
    auto t = load_table(path, TableFormat::csv);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0] == Row{"1", "2"});
    CHECK(t.rows[1] == Row{"4", ""});
    CHECK(t.load_warnings.size() == 2);
    LoadOptions strict;
    strict.strict = true;
    CHECK_THROWS_AS(load_table(path, TableFormat::csv, strict), Error);
}

TEST_CASE("csv load: empty file is a zero-column table error") {
    auto path = testutil::write_temp("empty.csv", "");
    CHECK_THROWS_WITH_AS(load_table(path, TableFormat::csv), "zero-column table", Error);
}

TEST_CASE("csv load: missing file") {
    CHECK_THROWS_AS(load_table("/nonexistent/nope.csv", TableFormat::csv), Error);
}

TEST_CASE("tsv load") {
    auto path = testutil::write_temp("basic.tsv", "x\ty\n1\t2\n");
    auto t = load_table(path, TableFormat::tsv);
    CHECK(t.header == std::vector<std::string>{"x", "y"});
    CHECK(t.rows[0] == Row{"1", "2"});
}

TEST_CASE("jsonl load and round trip") {
    auto path = testutil::write_temp(
        "t.jsonl", R"({"id":"t1","header":["a","b"],"rows":[["1","2"],["3","4"]]})" "\n");
    auto t = load_table(path, TableFormat::jsonl);
    CHECK(t.source_id == "t1");
    CHECK(t.rows.size() == 2);
    auto out = testutil::write_temp("t_out.jsonl", "");
    save_table_jsonl(t, out);
    auto t2 = load_table(out, TableFormat::jsonl);
    CHECK(t2.header == t.header);
    CHECK(t2.rows == t.rows);
    CHECK(t2.source_id == t.source_id);
}

TEST_CASE("duplicate headers get ordinal suffixes") {
    auto path = testutil::write_temp("dup.csv", "team,Team,team\nx,y,z\n");
    auto t = load_table(path, TableFormat::csv);
    CHECK(t.header == std::vector<std::string>{"team", "Team_2", "team_3"});
    CHECK(t.load_warnings.size() == 2);
}

TEST_CASE("linearize: single row") {
    auto t = testutil::make_table({"a", "b"}, {{"1", "2"}});
    CHECK(linearize(t) == "a | b\n1 | 2");
}

TEST_CASE("linearize: header only for empty rows") {
    auto t = testutil::make_table({"a", "b"}, {});
    CHECK(linearize(t) == "a | b");
}

TEST_CASE("linearize: pipe and newline cells are escaped and round trip") {
    auto t = testutil::make_table({"a", "b"}, {{"x|y", "p\nq"}});
    auto s = linearize(t);
    CHECK(s == "a | b\nx\\|y | p\\nq");
    auto back = delinearize(s);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
}

TEST_CASE("delinearize: zero-column input") {
    CHECK_THROWS_AS(delinearize("   \n  "), Error);
}

TEST_CASE("delinearize: crlf line endings are tolerated") {
    auto t = delinearize("a | b\r\n1 | 2\r\n3 | 4\r\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows == std::vector<Row>{{"1", "2"}, {"3", "4"}});
}

TEST_CASE("delinearize: escaped carriage returns still round trip") {
    auto t = testutil::make_table({"a"}, {{"x\ry"}});
    auto back = delinearize(linearize(t));
    CHECK(back.rows == t.rows);
}

TEST_CASE("property: linearize round trips random tables") {
    std::mt19937 rng(7001);
    for (int i = 0; i < 300; ++i) {
        auto t = testutil::random_table(rng);
        if (t.rows.empty()) continue;
        // random cells may include pipes/backslashes; escaping must cover them
        auto back = delinearize(linearize(t));
        CHECK(back.header == t.header);
        CHECK(back.rows == t.rows);
    }
}

TEST_CASE("property: load -> linearize -> reparse is identity for plain csv") {
    std::mt19937 rng(7002);
    for (int i = 0; i < 50; ++i) {
        auto t = testutil::random_table(rng);
        std::string csv;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            csv += (c ? "," : "") + t.header[c];
        csv += "\n";
        bool clean = true;
        for (auto& row : t.rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (row[c].find_first_of(",\"\n|\\") != std::string::npos) clean = false;
                // leading/trailing spaces would be significant in csv; skip those
                if (!row[c].empty() && (row[c].front() == ' ' || row[c].back() == ' '))
                    clean = false;
                csv += (c ? "," : "") + row[c];
            }
            csv += "\n";
        }
        if (!clean || t.rows.empty()) continue;
        auto path = testutil::write_temp("prop.csv", csv);
        auto loaded = load_table(path, TableFormat::csv);
        auto re = delinearize(linearize(loaded));
        CHECK(re.header == loaded.header);
        CHECK(re.rows == loaded.rows);
    }
}

TEST_CASE("subtable validates provenance and converts to a table") {
    auto t = testutil::make_table({"a", "b", "c"}, {{"1", "2", "3"}, {"4", "5", "6"}});
    auto s = make_subtable(t, {1}, {0, 2});
    CHECK(s.header == std::vector<std::string>{"a", "c"});
    CHECK(s.rows == std::vector<Row>{{"4", "6"}});
    s.validate_against(t);
    auto as_t = s.as_table();
    as_t.validate();
    CHECK(as_t.header == s.header);
}

TEST_SUITE_END();

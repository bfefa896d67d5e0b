#pragma once

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "tadre/table.hpp"

namespace testutil {

inline std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = std::string(TADRE_TEST_TMP) + "/" + name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

inline tadre::Table make_table(std::vector<std::string> header,
                               std::vector<std::vector<std::string>> rows,
                               std::string id = "t") {
    tadre::Table t;
    t.name = id;
    t.source_id = std::move(id);
    t.header = std::move(header);
    t.rows = std::move(rows);
    t.validate();
    return t;
}

// Mixed numeric/text cell pool mirroring semi-structured table content.
inline std::string random_cell(std::mt19937& rng) {
    static const std::vector<std::string> words = {
        "alpha", "beta",  "gamma", "delta", "New York", "Boston", "red",
        "blue",  "green", "Alice", "Bob",   "",         "N/A",    "yes",
        "no",    "2nd",   "42nd",  "a b",   "x-1",
    };
    std::uniform_int_distribution<int> kind(0, 9);
    int k = kind(rng);
    if (k < 4) {
        std::uniform_int_distribution<int> num(-50, 150);
        return std::to_string(num(rng));
    }
    if (k == 4) {
        std::uniform_int_distribution<int> num(0, 9999);
        std::uniform_int_distribution<int> frac(0, 99);
        return std::to_string(num(rng)) + "." + std::to_string(frac(rng));
    }
    std::uniform_int_distribution<std::size_t> w(0, words.size() - 1);
    return words[w(rng)];
}

inline tadre::Table random_table(std::mt19937& rng, std::size_t max_rows = 20,
                                 std::size_t max_cols = 6) {
    std::uniform_int_distribution<std::size_t> nrows(0, max_rows);
    std::uniform_int_distribution<std::size_t> ncols(1, max_cols);
    std::size_t rows = nrows(rng), cols = ncols(rng);
    tadre::Table t;
    t.name = "random";
    t.source_id = "random";
    for (std::size_t c = 0; c < cols; ++c) t.header.push_back("col_" + std::to_string(c));
    for (std::size_t r = 0; r < rows; ++r) {
        tadre::Row row;
        for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::string random_text(std::mt19937& rng, std::size_t max_len = 40) {
    static const char alphabet[] =
        " \t\nabcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789,.$%'\"-|\\";
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, sizeof(alphabet) - 2);
    std::string s;
    std::size_t n = len(rng);
    for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
    return s;
}

}  // namespace testutil

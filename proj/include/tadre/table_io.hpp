#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tadre/table.hpp"

namespace tadre {

enum class TableFormat { csv, tsv, jsonl };

struct LoadOptions {
    bool strict = false;  // reject ragged rows instead of padding
};

namespace detail {

// RFC-4180-style field parsing: quoted fields may contain the delimiter,
// doubled quotes, and newlines.
inline std::vector<Row> parse_delimited(const std::string& text, char delim) {
    std::vector<Row> records;
    Row cur_row;
    std::string cur;
    bool in_quotes = false;
    bool row_started = false;
    auto end_field = [&] {
        cur_row.push_back(cur);
        cur.clear();
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(cur_row));
        cur_row.clear();
        row_started = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
            continue;
        }
        if (c == '"' && cur.empty()) {
            in_quotes = true;
            row_started = true;
        } else if (c == delim) {
            end_field();
            row_started = true;
        } else if (c == '\r') {
            // swallowed; \r\n and bare \r both end the record below
            if (i + 1 < text.size() && text[i + 1] == '\n') continue;
            if (row_started || !cur.empty()) end_row();
        } else if (c == '\n') {
            if (row_started || !cur.empty()) end_row();
        } else {
            cur += c;
            row_started = true;
        }
    }
    if (row_started || !cur.empty()) end_row();
    return records;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Duplicate names (case-insensitive, trimmed) get _2, _3, ... suffixes so
// the decompose engine can address columns unambiguously by name.
inline void disambiguate_header(std::vector<std::string>& header,
                                std::vector<std::string>& warnings) {
    std::vector<std::string> seen;
    for (auto& name : header) {
        auto key = str::to_lower(str::trim(name));
        int ordinal = 1;
        std::string candidate_key = key;
        while (std::find(seen.begin(), seen.end(), candidate_key) != seen.end()) {
            ++ordinal;
            candidate_key = key + "_" + std::to_string(ordinal);
        }
        if (ordinal > 1) {
            warnings.push_back("duplicate column \"" + name + "\" renamed to \"" + name + "_" +
                               std::to_string(ordinal) + "\"");
            name += "_" + std::to_string(ordinal);
        }
        seen.push_back(candidate_key);
    }
}

inline void fix_ragged(Table& t, const LoadOptions& opt) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        auto& row = t.rows[r];
        if (row.size() == t.header.size()) continue;
        if (opt.strict)
            throw Error("ragged row " + std::to_string(r) + ": " + std::to_string(row.size()) +
                        " cells vs " + std::to_string(t.header.size()) + " columns");
        if (row.size() > t.header.size()) {
            t.load_warnings.push_back("row " + std::to_string(r) + " truncated to " +
                                      std::to_string(t.header.size()) + " cells");
            row.resize(t.header.size());
        } else {
            t.load_warnings.push_back("row " + std::to_string(r) + " padded to " +
                                      std::to_string(t.header.size()) + " cells");
            row.resize(t.header.size());
        }
    }
}

inline Table table_from_json(const nlohmann::json& j, const std::string& fallback_id,
                             const LoadOptions& opt) {
    Table t;
    t.source_id = j.contains("id") ? j.at("id").get<std::string>() : fallback_id;
    t.name = t.source_id;
    if (!j.contains("header")) throw Error("jsonl record missing \"header\"");
    for (const auto& h : j.at("header")) t.header.push_back(h.get<std::string>());
    if (t.header.empty()) throw Error("zero-column table");
    if (j.contains("rows"))
        for (const auto& jr : j.at("rows")) {
            Row row;
            for (const auto& cell : jr)
                row.push_back(cell.is_string() ? cell.get<std::string>() : cell.dump());
            t.rows.push_back(std::move(row));
        }
    disambiguate_header(t.header, t.load_warnings);
    fix_ragged(t, opt);
    t.validate();
    return t;
}

}  // namespace detail

inline TableFormat format_from_extension(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".tsv") return TableFormat::tsv;
    if (ext == ".jsonl" || ext == ".json") return TableFormat::jsonl;
    return TableFormat::csv;
}

/// Loads every table in a JSONL file (one {id, header, rows} record per line).
inline std::vector<Table> load_tables_jsonl(const std::string& path, LoadOptions opt = {}) {
    auto text = detail::read_file(path);
    std::vector<Table> tables;
    auto stem = std::filesystem::path(path).stem().string();
    std::size_t n = 0;
    for (const auto& line : str::split(text, '\n')) {
        if (str::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        tables.push_back(detail::table_from_json(j, stem + "#" + std::to_string(n), opt));
        ++n;
    }
    if (tables.empty()) throw Error("zero-column table");
    return tables;
}

inline Table load_table(const std::string& path, TableFormat format, LoadOptions opt = {}) {
    if (format == TableFormat::jsonl) return load_tables_jsonl(path, opt).front();
    auto text = detail::read_file(path);
    auto records = detail::parse_delimited(text, format == TableFormat::tsv ? '\t' : ',');
    if (records.empty() || records.front().empty() ||
        (records.front().size() == 1 && str::trim(records.front()[0]).empty()))
        throw Error("zero-column table");
    Table t;
    t.source_id = std::filesystem::path(path).stem().string();
    t.name = t.source_id;
    t.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) t.rows.push_back(std::move(records[i]));
    detail::disambiguate_header(t.header, t.load_warnings);
    detail::fix_ragged(t, opt);
    t.validate();
    return t;
}

inline Table load_table(const std::string& path, LoadOptions opt = {}) {
    return load_table(path, format_from_extension(path), opt);
}

inline nlohmann::json table_to_json(const Table& t) {
    nlohmann::json j;
    j["id"] = t.source_id.empty() ? t.name : t.source_id;
    j["header"] = t.header;
    j["rows"] = t.rows;
    return j;
}

inline void save_table_jsonl(const Table& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << table_to_json(t).dump() << "\n";
}

inline void save_table_csv(const Table& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    auto field = [](const std::string& cell) {
        if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
        std::string quoted = "\"";
        for (char c : cell) {
            quoted += c;
            if (c == '"') quoted += '"';
        }
        quoted += '"';
        return quoted;
    };
    auto write_row = [&](const Row& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << field(row[i]);
        }
        out << "\n";
    };
    write_row(t.header);
    for (const auto& row : t.rows) write_row(row);
}

}  // namespace tadre

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tadre/strings.hpp"

namespace tadre {

class Error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Row = std::vector<std::string>;

/// In-memory relation: ordered header plus rows of string cells.
/// Immutable after load; numeric interpretation happens lazily at filter time.
struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<Row> rows;
    std::string source_id;
    std::vector<std::string> load_warnings;

    std::size_t num_rows() const { return rows.size(); }
    std::size_t num_columns() const { return header.size(); }

    std::optional<std::size_t> column_index(std::string_view col) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == col) return i;
        return std::nullopt;
    }

    /// Enforces the type invariants; call after hand-construction.
    void validate() const {
        if (header.empty()) throw Error("table has an empty header");
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (rows[r].size() != header.size())
                throw Error("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                            " cells, header has " + std::to_string(header.size()));
        for (std::size_t i = 0; i < header.size(); ++i)
            for (std::size_t j = i + 1; j < header.size(); ++j)
                if (str::to_lower(str::trim(header[i])) == str::to_lower(str::trim(header[j])))
                    throw Error("duplicate column name: " + header[j]);
    }
};

/// Projection/filter of a parent table with cell-level provenance.
/// Rectangular by construction: every output row shares parent_columns.
struct SubTable {
    std::string parent_id;
    std::vector<std::string> header;
    std::vector<Row> rows;
    std::vector<std::size_t> parent_rows;     // output row -> parent row index
    std::vector<std::size_t> parent_columns;  // output column -> parent column index

    std::size_t num_rows() const { return rows.size(); }
    std::size_t num_columns() const { return header.size(); }

    bool has_column(std::string_view col) const {
        for (const auto& h : header)
            if (h == col) return true;
        return false;
    }

    std::optional<std::size_t> column_index(std::string_view col) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == col) return i;
        return std::nullopt;
    }

    /// A SubTable is itself a valid Table.
    Table as_table() const {
        Table t;
        t.name = parent_id;
        t.source_id = parent_id;
        t.header = header;
        t.rows = rows;
        return t;
    }

    void validate_against(const Table& parent) const {
        if (parent_columns.size() != header.size())
            throw Error("subtable column provenance size mismatch");
        if (parent_rows.size() != rows.size())
            throw Error("subtable row provenance size mismatch");
        for (std::size_t c = 0; c < parent_columns.size(); ++c) {
            if (parent_columns[c] >= parent.header.size())
                throw Error("subtable column provenance out of bounds");
            if (parent.header[parent_columns[c]] != header[c])
                throw Error("subtable header does not match parent column");
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (parent_rows[r] >= parent.rows.size())
                throw Error("subtable row provenance out of bounds");
            if (rows[r].size() != header.size())
                throw Error("subtable row width mismatch");
            for (std::size_t c = 0; c < header.size(); ++c)
                if (rows[r][c] != parent.rows[parent_rows[r]][parent_columns[c]])
                    throw Error("subtable cell differs from parent cell at provenance");
        }
    }
};

/// Builds the rectangular sub-table covering row_ids x col_ids of the parent.
inline SubTable make_subtable(const Table& parent, const std::vector<std::size_t>& row_ids,
                              const std::vector<std::size_t>& col_ids) {
    SubTable s;
    s.parent_id = parent.source_id.empty() ? parent.name : parent.source_id;
    s.parent_rows = row_ids;
    s.parent_columns = col_ids;
    s.header.reserve(col_ids.size());
    for (auto c : col_ids) {
        if (c >= parent.header.size()) throw Error("column index out of bounds");
        s.header.push_back(parent.header[c]);
    }
    s.rows.reserve(row_ids.size());
    for (auto r : row_ids) {
        if (r >= parent.rows.size()) throw Error("row index out of bounds");
        Row row;
        row.reserve(col_ids.size());
        for (auto c : col_ids) row.push_back(parent.rows[r][c]);
        s.rows.push_back(std::move(row));
    }
    return s;
}

inline SubTable full_subtable(const Table& parent) {
    std::vector<std::size_t> all_rows(parent.num_rows());
    std::vector<std::size_t> all_cols(parent.num_columns());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    for (std::size_t i = 0; i < all_cols.size(); ++i) all_cols[i] = i;
    return make_subtable(parent, all_rows, all_cols);
}

namespace detail {

// Cell escaping for the prompt linearization: the format must stay
// unambiguous when cells contain the delimiters themselves.
inline std::string escape_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (char c : cell) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '|': out += "\\|"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string unescape_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (std::size_t i = 0; i < cell.size(); ++i) {
        if (cell[i] == '\\' && i + 1 < cell.size()) {
            char n = cell[++i];
            switch (n) {
                case '\\': out += '\\'; break;
                case '|': out += '|'; break;
                case 'n': out += '\n'; break;
                case 'r': out += '\r'; break;
                default:
                    out += '\\';
                    out += n;
            }
        } else {
            out += cell[i];
        }
    }
    return out;
}

inline std::string join_line(const Row& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += " | ";
        line += escape_cell(cells[i]);
    }
    return line;
}

// Splits one linearized line at unescaped pipes, stripping exactly the one
// space the writer put on each side of the separator.
inline Row split_line(std::string_view line) {
    Row cells;
    std::string cur;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '\\' && i + 1 < line.size()) {
            cur += c;
            cur += line[++i];
            continue;
        }
        if (c == '|') {
            if (!cur.empty() && cur.back() == ' ') cur.pop_back();
            cells.push_back(unescape_cell(cur));
            cur.clear();
            if (i + 1 < line.size() && line[i + 1] == ' ') ++i;
            continue;
        }
        cur += c;
    }
    cells.push_back(unescape_cell(cur));
    return cells;
}

}  // namespace detail

/// Pipe-separated, newline-delimited rendering used in every prompt.
/// First line is the header; deterministic for a given table.
inline std::string linearize(const Table& t) {
    std::string out = detail::join_line(t.header);
    for (const auto& row : t.rows) {
        out += '\n';
        out += detail::join_line(row);
    }
    return out;
}

inline std::string linearize(const SubTable& s) { return linearize(s.as_table()); }

inline std::string linearize_row(const Row& row) { return detail::join_line(row); }

/// Parses a pipe-linearized table back into header + rows.
/// Ragged rows are padded with empty cells (a warning is recorded).
/// skip_blank drops whitespace-only lines (useful for model output, but it
/// loses single-column empty cells, so the default is exact).
inline Table delinearize(std::string_view text, std::string name = {}, bool skip_blank = false) {
    Table t;
    t.name = std::move(name);
    t.source_id = t.name;
    if (str::trim(text).empty()) throw Error("zero-column table");
    auto lines = str::split(std::string(text), '\n');
    for (auto& line : lines)
        if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!lines.empty() && lines.back().empty()) lines.pop_back();  // one trailing newline
    bool first = true;
    for (const auto& line : lines) {
        if (skip_blank && str::trim(line).empty()) continue;
        if (first && str::trim(line).empty()) continue;  // never a header
        Row cells = detail::split_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() > t.header.size()) {
            t.load_warnings.push_back("row truncated from " + std::to_string(cells.size()) +
                                      " to " + std::to_string(t.header.size()) + " cells");
            cells.resize(t.header.size());
        } else if (cells.size() < t.header.size()) {
            t.load_warnings.push_back("row padded from " + std::to_string(cells.size()) + " to " +
                                      std::to_string(t.header.size()) + " cells");
            cells.resize(t.header.size());
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw Error("zero-column table");
    return t;
}

}  // namespace tadre

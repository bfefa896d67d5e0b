#pragma once

// Test-only oracles, implemented independently of the library code paths
// they check.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tadre/lcs.hpp"
#include "tadre/sql.hpp"
#include "tadre/table.hpp"

namespace oracle {

// --- numeric coercion (same contract as the engine, separate code) --------

inline std::optional<double> coerce(const std::string& raw) {
    // trim
    std::size_t b = raw.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return std::nullopt;
    std::size_t e = raw.find_last_not_of(" \t\r\n\f\v");
    std::string s = raw.substr(b, e - b + 1);
    // one leading currency symbol, allowing a sign before it
    const std::vector<std::string> currencies = {"$", "€", "£", "¥"};
    for (const auto& cur : currencies) {
        if (s.rfind(cur, 0) == 0) {
            s = s.substr(cur.size());
            break;
        }
        if ((s.size() > cur.size()) && (s[0] == '-' || s[0] == '+') &&
            s.compare(1, cur.size(), cur) == 0) {
            s = s.substr(0, 1) + s.substr(1 + cur.size());
            break;
        }
    }
    std::string no_commas;
    for (char c : s)
        if (c != ',') no_commas += c;
    s = no_commas;
    if (!s.empty() && s.back() == '%') s.pop_back();
    b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return std::nullopt;
    e = s.find_last_not_of(" \t");
    s = s.substr(b, e - b + 1);
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n\f\v");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(b, e - b + 1);
}

inline bool contains_ci(const std::string& hay, const std::string& needle) {
    return lower(hay).find(lower(needle)) != std::string::npos;
}

// --- row predicate ----------------------------------------------------------

enum class Verdict { match, no_match, uncomparable };

inline bool like_matches(const std::string& cell, const std::string& pattern) {
    bool has_wild = pattern.find('%') != std::string::npos ||
                    pattern.find('_') != std::string::npos;
    if (!has_wild) return contains_ci(cell, pattern);
    // direct recursive wildcard matcher: % = any run, _ = one char
    std::string c = lower(cell), p = lower(pattern);
    std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t ci,
                                                           std::size_t pi) -> bool {
        if (pi == p.size()) return ci == c.size();
        if (p[pi] == '%') {
            for (std::size_t k = ci; k <= c.size(); ++k)
                if (go(k, pi + 1)) return true;
            return false;
        }
        if (ci == c.size()) return false;
        if (p[pi] == '_' || p[pi] == c[ci]) return go(ci + 1, pi + 1);
        return false;
    };
    return go(0, 0);
}

inline Verdict eval_cell(const std::string& cell, const tadre::Condition& cond) {
    using tadre::SqlOperator;
    const auto& ops = cond.operands;
    switch (cond.op) {
        case SqlOperator::is_null:
            return trim(cell).empty() ? Verdict::match : Verdict::no_match;
        case SqlOperator::is_not_null:
            return trim(cell).empty() ? Verdict::no_match : Verdict::match;
        case SqlOperator::like:
            return like_matches(cell, ops[0]) ? Verdict::match : Verdict::no_match;
        case SqlOperator::not_like:
            return like_matches(cell, ops[0]) ? Verdict::no_match : Verdict::match;
        case SqlOperator::in_list:
        case SqlOperator::not_in_list: {
            bool found = false;
            for (const auto& item : ops) {
                auto cn = coerce(cell);
                auto on = coerce(item);
                if (cn && on ? *cn == *on : lower(trim(cell)) == lower(trim(item))) {
                    found = true;
                    break;
                }
            }
            bool want = cond.op == SqlOperator::in_list;
            return found == want ? Verdict::match : Verdict::no_match;
        }
        case SqlOperator::eq:
        case SqlOperator::neq: {
            auto on = coerce(ops[0]);
            if (on) {
                auto cn = coerce(cell);
                if (!cn) return Verdict::uncomparable;
                bool eq = *cn == *on;
                return (eq == (cond.op == SqlOperator::eq)) ? Verdict::match : Verdict::no_match;
            }
            if (cond.op == SqlOperator::eq)
                return contains_ci(cell, ops[0]) ? Verdict::match : Verdict::no_match;
            return lower(trim(cell)) == lower(trim(ops[0])) ? Verdict::no_match : Verdict::match;
        }
        case SqlOperator::gt:
        case SqlOperator::lt:
        case SqlOperator::gte:
        case SqlOperator::lte: {
            auto on = coerce(ops[0]);
            if (!on) return Verdict::uncomparable;
            auto cn = coerce(cell);
            if (!cn) return Verdict::uncomparable;
            bool ok = false;
            if (cond.op == SqlOperator::gt) ok = *cn > *on;
            if (cond.op == SqlOperator::lt) ok = *cn < *on;
            if (cond.op == SqlOperator::gte) ok = *cn >= *on;
            if (cond.op == SqlOperator::lte) ok = *cn <= *on;
            return ok ? Verdict::match : Verdict::no_match;
        }
        case SqlOperator::between: {
            auto lo = coerce(ops[0]), hi = coerce(ops[1]);
            if (!lo || !hi) return Verdict::uncomparable;
            auto cn = coerce(cell);
            if (!cn) return Verdict::uncomparable;
            return (*cn >= *lo && *cn <= *hi) ? Verdict::match : Verdict::no_match;
        }
    }
    return Verdict::uncomparable;
}

// --- whole-plan brute force --------------------------------------------------

struct FilterResult {
    std::vector<std::size_t> columns;  // parent column indices, ascending
    std::vector<std::size_t> rows;     // parent row indices kept
    bool fallback_full_rows = false;
    std::size_t failed_conditions = 0;
};

/// Row-scan oracle for strict conjunctive filtering with fail-open fallback.
inline FilterResult filter(const tadre::Table& t, const tadre::CorrectedPlan& plan) {
    FilterResult out;
    std::set<std::size_t> col_set;
    if (plan.columns.all_columns) {
        for (std::size_t c = 0; c < t.header.size(); ++c) col_set.insert(c);
    } else {
        for (const auto& e : plan.columns.entries) {
            if (!e.matched) continue;
            for (std::size_t c = 0; c < t.header.size(); ++c)
                if (t.header[c] == *e.matched) col_set.insert(c);
        }
        if (col_set.empty())
            for (std::size_t c = 0; c < t.header.size(); ++c) col_set.insert(c);
    }
    out.columns.assign(col_set.begin(), col_set.end());

    std::vector<const tadre::Condition*> usable;
    for (const auto& cond : plan.conditions) {
        // column must be inside the projection
        bool present = false;
        for (auto c : out.columns) present = present || t.header[c] == cond.column;
        bool operand_numeric_ok = true;
        using tadre::SqlOperator;
        if (cond.op == SqlOperator::gt || cond.op == SqlOperator::lt ||
            cond.op == SqlOperator::gte || cond.op == SqlOperator::lte)
            operand_numeric_ok = coerce(cond.operands[0]).has_value();
        if (cond.op == SqlOperator::between)
            operand_numeric_ok =
                coerce(cond.operands[0]).has_value() && coerce(cond.operands[1]).has_value();
        if (!present || !operand_numeric_ok) {
            ++out.failed_conditions;
            continue;
        }
        // strict mode: any uncomparable cell fails the condition; a condition
        // matching nothing on a non-empty table also fails
        std::size_t col = 0;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            if (t.header[c] == cond.column) {
                col = c;
                break;
            }
        bool type_fail = false;
        std::size_t matches = 0;
        for (const auto& row : t.rows) {
            auto v = eval_cell(row[col], cond);
            if (v == Verdict::uncomparable) {
                type_fail = true;
                break;
            }
            if (v == Verdict::match) ++matches;
        }
        if (type_fail || (matches == 0 && !t.rows.empty())) {
            ++out.failed_conditions;
            continue;
        }
        usable.push_back(&cond);
    }

    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        bool keep = true;
        for (const auto* cond : usable) {
            std::size_t col = 0;
            for (std::size_t c = 0; c < t.header.size(); ++c)
                if (t.header[c] == cond->column) {
                    col = c;
                    break;
                }
            if (eval_cell(t.rows[r][col], *cond) != Verdict::match) {
                keep = false;
                break;
            }
        }
        if (keep) out.rows.push_back(r);
    }

    bool all_failed = usable.empty() && !plan.conditions.empty();
    if (all_failed || (out.rows.empty() && !usable.empty())) {
        out.rows.clear();
        for (std::size_t r = 0; r < t.rows.size(); ++r) out.rows.push_back(r);
        out.fallback_full_rows = true;
    }
    if (out.rows.empty()) out.fallback_full_rows = true;
    return out;
}

// --- randomized plan generator for the equivalence suite ---------------------

inline tadre::CorrectedPlan random_plan(std::mt19937& rng, const tadre::Table& t) {
    using tadre::SqlOperator;
    tadre::CorrectedPlan plan;
    std::uniform_int_distribution<int> pct(0, 99);
    std::uniform_int_distribution<std::size_t> col_pick(0, t.header.size() - 1);

    auto add_entry = [&](const std::string& name) {
        for (const auto& e : plan.columns.entries)
            if (e.matched && *e.matched == name) return;
        plan.columns.entries.push_back({name, name, 1.0});
    };

    if (pct(rng) < 15) {
        plan.columns.all_columns = true;
    } else {
        std::uniform_int_distribution<std::size_t> n(0, std::min<std::size_t>(3, t.header.size()));
        std::size_t k = n(rng);
        for (std::size_t i = 0; i < k; ++i) add_entry(t.header[col_pick(rng)]);
    }
    if (pct(rng) < 10)  // a hallucinated name that was discarded
        plan.columns.entries.push_back({"zzz_nonexistent", std::nullopt, 0.0});

    static const std::vector<std::string> words = {"alpha", "beta",  "New York", "red",
                                                   "blue",  "Alice", "yes",      "york"};
    auto number = [&] {
        std::uniform_int_distribution<int> v(-40, 120);
        if (pct(rng) < 25) {
            std::uniform_int_distribution<int> frac(0, 9);
            return std::to_string(v(rng)) + "." + std::to_string(frac(rng));
        }
        return std::to_string(v(rng));
    };
    auto word = [&] {
        std::uniform_int_distribution<std::size_t> w(0, words.size() - 1);
        return words[w(rng)];
    };

    std::uniform_int_distribution<int> n_conds(0, 3);
    std::uniform_int_distribution<int> op_pick(0, 12);
    int k = n_conds(rng);
    for (int i = 0; i < k; ++i) {
        tadre::Condition c;
        c.column = t.header[col_pick(rng)];
        switch (op_pick(rng)) {
            case 0: c.op = SqlOperator::eq; c.operands = {pct(rng) < 50 ? number() : word()}; break;
            case 1: c.op = SqlOperator::neq; c.operands = {pct(rng) < 50 ? number() : word()}; break;
            case 2: c.op = SqlOperator::gt; c.operands = {pct(rng) < 90 ? number() : word()}; break;
            case 3: c.op = SqlOperator::lt; c.operands = {pct(rng) < 90 ? number() : word()}; break;
            case 4: c.op = SqlOperator::gte; c.operands = {number()}; break;
            case 5: c.op = SqlOperator::lte; c.operands = {number()}; break;
            case 6:
                c.op = SqlOperator::like;
                c.operands = {pct(rng) < 25   ? "a%"
                              : pct(rng) < 50 ? "%e%"
                              : pct(rng) < 75 ? "%a"
                                              : "al"};
                break;
            case 7: c.op = SqlOperator::not_like; c.operands = {pct(rng) < 50 ? "%a%" : "b%"}; break;
            case 8: {
                c.op = pct(rng) < 50 ? SqlOperator::in_list : SqlOperator::not_in_list;
                std::uniform_int_distribution<int> n_items(1, 3);
                int m = n_items(rng);
                for (int j = 0; j < m; ++j) c.operands.push_back(pct(rng) < 50 ? number() : word());
                break;
            }
            case 9: {
                c.op = SqlOperator::between;
                auto lo = number(), hi = number();
                if (pct(rng) < 5) lo = word();  // operand type mismatch path
                c.operands = {lo, hi};
                break;
            }
            case 10: c.op = SqlOperator::is_null; break;
            case 11: c.op = SqlOperator::is_not_null; break;
            default: c.op = SqlOperator::eq; c.operands = {word()}; break;
        }
        if (pct(rng) >= 10) add_entry(c.column);  // 10%: column outside the projection
        plan.conditions.push_back(std::move(c));
    }
    return plan;
}

}  // namespace oracle

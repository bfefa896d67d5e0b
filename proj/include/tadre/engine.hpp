#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "tadre/lcs.hpp"
#include "tadre/sql.hpp"
#include "tadre/table.hpp"
#include "tadre/values.hpp"

namespace tadre {

enum class FailureReason { column_missing, type_mismatch, empty_result, unsupported_operator };

inline std::string_view to_string(FailureReason r) {
    switch (r) {
        case FailureReason::column_missing: return "column_missing";
        case FailureReason::type_mismatch: return "type_mismatch";
        case FailureReason::empty_result: return "empty_result";
        case FailureReason::unsupported_operator: return "unsupported_operator";
    }
    return "?";
}

struct EngineOptions {
    bool disjunctive = false;      // OR the conditions instead of AND
    bool strict_numeric = false;   // any non-coercible cell fails the condition
    bool apply_sort = true;
    bool apply_limit = true;
};

/// Result of applying a corrected plan: the sub-table plus which conditions
/// held and whether the fail-open fallback re-opened all rows.
struct FilterOutcome {
    SubTable subtable;
    std::vector<Condition> applied;
    std::vector<std::pair<Condition, FailureReason>> failed;
    bool fallback_full_rows = false;
    bool fallback_all_columns = false;  // projection matched nothing
    std::vector<std::string> warnings;
};

namespace engine_detail {

// Everything below defines the row-level predicate semantics. String
// equality is relaxed to case-insensitive substring containment; numeric
// operators coerce both sides and skip (lenient) or fail on (strict)
// non-coercible cells; empty cell <=> NULL.

enum class CellVerdict { match, no_match, uncomparable };

inline bool cell_is_null(std::string_view cell) { return str::trim(cell).empty(); }

inline bool like_match(std::string_view cell, std::string_view pattern) {
    if (pattern.find('%') == std::string_view::npos &&
        pattern.find('_') == std::string_view::npos)
        return str::icontains(cell, pattern);
    std::string re;
    for (char c : pattern) {
        if (c == '%') re += ".*";
        else if (c == '_') re += '.';
        else {
            if (!std::isalnum(static_cast<unsigned char>(c))) re += '\\';
            re += c;
        }
    }
    try {
        return std::regex_match(str::to_lower(cell), std::regex(str::to_lower(re)));
    } catch (const std::regex_error&) {
        return str::icontains(cell, pattern);
    }
}

inline bool member_match(std::string_view cell, std::string_view item) {
    auto cn = coerce_numeric(cell);
    auto in = coerce_numeric(item);
    if (cn.parsed && in.parsed) return *cn.parsed == *in.parsed;
    return str::iequals(str::trim(cell), str::trim(item));
}

inline CellVerdict eval_cell(std::string_view cell, const Condition& cond) {
    switch (cond.op) {
        case SqlOperator::is_null:
            return cell_is_null(cell) ? CellVerdict::match : CellVerdict::no_match;
        case SqlOperator::is_not_null:
            return cell_is_null(cell) ? CellVerdict::no_match : CellVerdict::match;
        case SqlOperator::like:
            return like_match(cell, cond.operands[0]) ? CellVerdict::match
                                                      : CellVerdict::no_match;
        case SqlOperator::not_like:
            return like_match(cell, cond.operands[0]) ? CellVerdict::no_match
                                                      : CellVerdict::match;
        case SqlOperator::in_list:
        case SqlOperator::not_in_list: {
            bool found = false;
            for (const auto& item : cond.operands)
                if (member_match(cell, item)) {
                    found = true;
                    break;
                }
            bool want = cond.op == SqlOperator::in_list;
            return found == want ? CellVerdict::match : CellVerdict::no_match;
        }
        case SqlOperator::eq:
        case SqlOperator::neq: {
            auto operand = coerce_numeric(cond.operands[0]);
            if (operand.parsed) {
                auto cn = coerce_numeric(cell);
                if (!cn.parsed) return CellVerdict::uncomparable;
                bool equal = *cn.parsed == *operand.parsed;
                bool want = cond.op == SqlOperator::eq;
                return equal == want ? CellVerdict::match : CellVerdict::no_match;
            }
            if (cond.op == SqlOperator::eq)  // relaxed: substring containment
                return str::icontains(cell, cond.operands[0]) ? CellVerdict::match
                                                              : CellVerdict::no_match;
            return str::iequals(str::trim(cell), str::trim(cond.operands[0]))
                       ? CellVerdict::no_match
                       : CellVerdict::match;
        }
        case SqlOperator::gt:
        case SqlOperator::lt:
        case SqlOperator::gte:
        case SqlOperator::lte: {
            auto operand = coerce_numeric(cond.operands[0]);
            if (!operand.parsed) return CellVerdict::uncomparable;
            auto cn = coerce_numeric(cell);
            if (!cn.parsed) return CellVerdict::uncomparable;
            double c = *cn.parsed, o = *operand.parsed;
            bool ok = cond.op == SqlOperator::gt    ? c > o
                      : cond.op == SqlOperator::lt  ? c < o
                      : cond.op == SqlOperator::gte ? c >= o
                                                    : c <= o;
            return ok ? CellVerdict::match : CellVerdict::no_match;
        }
        case SqlOperator::between: {
            auto lo = coerce_numeric(cond.operands[0]);
            auto hi = coerce_numeric(cond.operands[1]);
            if (!lo.parsed || !hi.parsed) return CellVerdict::uncomparable;
            auto cn = coerce_numeric(cell);
            if (!cn.parsed) return CellVerdict::uncomparable;
            return (*cn.parsed >= *lo.parsed && *cn.parsed <= *hi.parsed)
                       ? CellVerdict::match
                       : CellVerdict::no_match;
        }
    }
    return CellVerdict::uncomparable;
}

// A numeric operator with an uncoercible literal can never compare.
inline bool operand_type_mismatch(const Condition& cond) {
    switch (cond.op) {
        case SqlOperator::gt:
        case SqlOperator::lt:
        case SqlOperator::gte:
        case SqlOperator::lte:
            return !coerce_numeric(cond.operands[0]).parsed;
        case SqlOperator::between:
            return !coerce_numeric(cond.operands[0]).parsed ||
                   !coerce_numeric(cond.operands[1]).parsed;
        default:
            return false;
    }
}

struct NumericSortKey {
    bool numeric;
    double num;
    std::string text;
};

inline NumericSortKey sort_key(const std::string& cell) {
    auto c = coerce_numeric(cell);
    if (c.parsed) return {true, *c.parsed, {}};
    return {false, 0.0, str::to_lower(str::trim(cell))};
}

inline bool key_less(const NumericSortKey& a, const NumericSortKey& b) {
    if (a.numeric != b.numeric) return a.numeric;  // numbers sort before text
    if (a.numeric) return a.num < b.num;
    return a.text < b.text;
}

}  // namespace engine_detail

/// Column projection with fail-open: when nothing matched, every column is
/// kept so the answer field cannot be lost.
inline SubTable project(const Table& t, const CorrectedColumns& cols) {
    std::vector<std::size_t> col_ids;
    if (!cols.all_columns) {
        for (const auto& name : cols.matched_names()) {
            auto idx = t.column_index(name);
            if (!idx) throw Error("matched column not in parent header: " + name);
            if (std::find(col_ids.begin(), col_ids.end(), *idx) == col_ids.end())
                col_ids.push_back(*idx);
        }
        std::sort(col_ids.begin(), col_ids.end());  // keep the parent's column order
    }
    if (cols.all_columns || col_ids.empty()) {
        col_ids.resize(t.num_columns());
        std::iota(col_ids.begin(), col_ids.end(), 0);
    }
    std::vector<std::size_t> row_ids(t.num_rows());
    std::iota(row_ids.begin(), row_ids.end(), 0);
    return make_subtable(t, row_ids, col_ids);
}

struct ConditionOutcome {
    std::vector<bool> mask;  // over the sub-table's current rows
    std::optional<FailureReason> failure;
};

/// Evaluates one condition against a sub-table, returning a row mask or the
/// reason the condition cannot be applied. Never throws.
inline ConditionOutcome apply_condition(const SubTable& t, const Condition& cond,
                                        const EngineOptions& opt = {}) {
    ConditionOutcome out;
    out.mask.assign(t.num_rows(), false);
    auto col = t.column_index(cond.column);
    if (!col) {
        out.failure = FailureReason::column_missing;
        return out;
    }
    if (!cond.arity_ok()) {
        out.failure = FailureReason::unsupported_operator;
        return out;
    }
    if (engine_detail::operand_type_mismatch(cond)) {
        out.failure = FailureReason::type_mismatch;
        return out;
    }
    std::size_t comparable = 0, matched = 0;
    for (std::size_t r = 0; r < t.num_rows(); ++r) {
        auto verdict = engine_detail::eval_cell(t.rows[r][*col], cond);
        if (verdict == engine_detail::CellVerdict::uncomparable) {
            if (opt.strict_numeric) {
                out.failure = FailureReason::type_mismatch;
                return out;
            }
            continue;  // lenient: the row is excluded, not the condition
        }
        ++comparable;
        if (verdict == engine_detail::CellVerdict::match) {
            out.mask[r] = true;
            ++matched;
        }
    }
    if (t.num_rows() > 0 && comparable == 0) {
        out.failure = FailureReason::type_mismatch;
        return out;
    }
    if (t.num_rows() > 0 && matched == 0) {
        out.failure = FailureReason::empty_result;
        return out;
    }
    return out;
}

/// Projection + conjunctive (or disjunctive) filtering with the fail-open
/// fallback, then plan-level sort and limit. Total: never throws, and an
/// empty row set always comes back re-opened to all rows.
inline FilterOutcome apply_triple(const Table& t, const CorrectedPlan& plan,
                                  EngineOptions opt = {}) {
    opt.disjunctive = opt.disjunctive || plan.disjunctive;
    FilterOutcome out;
    auto cols = plan.columns;
    out.subtable = project(t, cols);
    out.fallback_all_columns = !cols.all_columns && cols.matched_names().empty();
    if (out.fallback_all_columns)
        out.warnings.push_back("no column matched; projection kept every column");

    const std::size_t n = t.num_rows();
    std::vector<bool> combined(n, !opt.disjunctive);
    bool any_applied = false;
    for (const auto& cond : plan.conditions) {
        auto res = apply_condition(out.subtable, cond, opt);
        if (res.failure) {
            out.failed.emplace_back(cond, *res.failure);
            out.warnings.push_back("condition on \"" + cond.column + "\" failed: " +
                                   std::string(to_string(*res.failure)));
            continue;
        }
        out.applied.push_back(cond);
        any_applied = true;
        for (std::size_t r = 0; r < n; ++r)
            combined[r] = opt.disjunctive ? (combined[r] || res.mask[r])
                                          : (combined[r] && res.mask[r]);
    }

    std::vector<std::size_t> keep;
    if (any_applied) {
        for (std::size_t r = 0; r < n; ++r)
            if (combined[r]) keep.push_back(r);
    } else {
        keep.resize(n);
        std::iota(keep.begin(), keep.end(), 0);
        if (!plan.conditions.empty()) {
            out.fallback_full_rows = true;
            out.warnings.push_back("every condition failed; all rows retained");
        }
    }
    if (any_applied && keep.empty()) {
        keep.resize(n);
        std::iota(keep.begin(), keep.end(), 0);
        out.fallback_full_rows = true;
        out.warnings.push_back("empty filter result; all rows retained");
    }

    auto rebuild = [&](const std::vector<std::size_t>& rows) {
        SubTable s = out.subtable;
        SubTable next;
        next.parent_id = s.parent_id;
        next.header = s.header;
        next.parent_columns = s.parent_columns;
        for (auto r : rows) {
            next.rows.push_back(s.rows[r]);
            next.parent_rows.push_back(s.parent_rows[r]);
        }
        return next;
    };
    out.subtable = rebuild(keep);

    if (opt.apply_sort && !plan.order_by.empty() && out.subtable.num_rows() > 1) {
        std::vector<std::size_t> order(out.subtable.num_rows());
        std::iota(order.begin(), order.end(), 0);
        // stable sorts applied from the least-significant key backwards
        for (auto it = plan.order_by.rbegin(); it != plan.order_by.rend(); ++it) {
            auto col = out.subtable.column_index(it->column);
            if (!col) continue;
            std::vector<engine_detail::NumericSortKey> keys;
            keys.reserve(out.subtable.num_rows());
            for (const auto& row : out.subtable.rows)
                keys.push_back(engine_detail::sort_key(row[*col]));
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return it->ascending ? engine_detail::key_less(keys[a], keys[b])
                                     : engine_detail::key_less(keys[b], keys[a]);
            });
        }
        SubTable sorted;
        sorted.parent_id = out.subtable.parent_id;
        sorted.header = out.subtable.header;
        sorted.parent_columns = out.subtable.parent_columns;
        for (auto r : order) {
            sorted.rows.push_back(out.subtable.rows[r]);
            sorted.parent_rows.push_back(out.subtable.parent_rows[r]);
        }
        out.subtable = std::move(sorted);
        out.warnings.push_back("plan sort applied to the sub-table");
    }

    if (opt.apply_limit && plan.limit && !out.fallback_full_rows) {
        const auto& lim = *plan.limit;
        std::vector<std::size_t> window;
        for (std::size_t r = lim.offset; r < out.subtable.num_rows() && window.size() < lim.count;
             ++r)
            window.push_back(r);
        if (window.empty() && n > 0) {
            out.fallback_full_rows = true;
            out.warnings.push_back("limit/offset emptied the result; all rows retained");
            out.subtable = project(t, cols);
        } else if (window.size() < out.subtable.num_rows()) {
            out.subtable = rebuild(window);
            out.warnings.push_back("plan limit applied to the sub-table");
        }
    }

    if (out.subtable.rows.empty()) {  // totality: an empty result is always re-opened
        out.fallback_full_rows = true;
        if (n > 0) out.subtable = project(t, cols);
    }
    return out;
}

/// Diagnostic aggregate over one sub-table column; numeric aggregates skip
/// non-coercible cells, count counts non-empty cells.
inline std::string aggregate(const SubTable& t, AggregateFn fn, const std::string& column) {
    auto col = t.column_index(column);
    if (!col) throw Error("aggregate column not in sub-table: " + column);
    if (fn == AggregateFn::count) {
        long n = 0;
        for (const auto& row : t.rows)
            if (!engine_detail::cell_is_null(row[*col])) ++n;
        return std::to_string(n);
    }
    std::vector<double> vals;
    for (const auto& row : t.rows) {
        auto c = coerce_numeric(row[*col]);
        if (c.parsed) vals.push_back(*c.parsed);
    }
    if (vals.empty()) throw Error("empty numeric column: " + column);
    double result = 0;
    switch (fn) {
        case AggregateFn::sum: result = std::accumulate(vals.begin(), vals.end(), 0.0); break;
        case AggregateFn::avg:
            result = std::accumulate(vals.begin(), vals.end(), 0.0) /
                     static_cast<double>(vals.size());
            break;
        case AggregateFn::min: result = *std::min_element(vals.begin(), vals.end()); break;
        case AggregateFn::max: result = *std::max_element(vals.begin(), vals.end()); break;
        case AggregateFn::count: break;
    }
    return format_number(result);
}

}  // namespace tadre

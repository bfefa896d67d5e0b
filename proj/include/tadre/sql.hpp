#pragma once

#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "tadre/strings.hpp"
#include "tadre/table.hpp"

namespace tadre {

/// Marker produced for "*" select lists; expands to the whole header.
inline constexpr std::string_view kAllColumns = "*";

enum class SqlOperator {
    eq, neq, gt, lt, gte, lte,
    like, not_like, in_list, not_in_list,
    between, is_null, is_not_null,
};

inline std::string_view to_string(SqlOperator op) {
    switch (op) {
        case SqlOperator::eq: return "eq";
        case SqlOperator::neq: return "neq";
        case SqlOperator::gt: return "gt";
        case SqlOperator::lt: return "lt";
        case SqlOperator::gte: return "gte";
        case SqlOperator::lte: return "lte";
        case SqlOperator::like: return "like";
        case SqlOperator::not_like: return "not_like";
        case SqlOperator::in_list: return "in";
        case SqlOperator::not_in_list: return "not_in";
        case SqlOperator::between: return "between";
        case SqlOperator::is_null: return "is_null";
        case SqlOperator::is_not_null: return "is_not_null";
    }
    return "?";
}

/// One filter predicate from the plan: column, operator, literal operands.
struct Condition {
    std::string column;
    SqlOperator op = SqlOperator::eq;
    std::vector<std::string> operands;

    bool operator==(const Condition&) const = default;

    bool arity_ok() const {
        switch (op) {
            case SqlOperator::is_null:
            case SqlOperator::is_not_null: return operands.empty();
            case SqlOperator::between: return operands.size() == 2;
            case SqlOperator::in_list:
            case SqlOperator::not_in_list: return !operands.empty();
            default: return operands.size() == 1;
        }
    }
};

enum class AggregateFn { sum, avg, count, min, max };

inline std::string_view to_string(AggregateFn fn) {
    switch (fn) {
        case AggregateFn::sum: return "sum";
        case AggregateFn::avg: return "avg";
        case AggregateFn::count: return "count";
        case AggregateFn::min: return "min";
        case AggregateFn::max: return "max";
    }
    return "?";
}

struct AggregateRef {
    AggregateFn fn;
    std::string column;  // "*" for count(*)
    bool operator==(const AggregateRef&) const = default;
};

struct SortSpec {
    std::string column;
    bool ascending = true;
    bool operator==(const SortSpec&) const = default;
};

struct LimitSpec {
    std::size_t offset = 0;
    std::size_t count = 0;
    bool operator==(const LimitSpec&) const = default;
};

/// The (C, P, V) decomposition extracted from an SQL plan, plus the
/// trailing-clause and aggregate information the engine and diagnostics use.
struct DecompositionTriple {
    std::vector<std::string> columns;      // C
    std::vector<Condition> conditions;     // P
    std::vector<std::string> values;       // V: condition literals in order
    std::vector<AggregateRef> aggregates;  // aggregate intent, for diagnostics
    std::vector<std::string> group_by;
    std::vector<Condition> having;         // diagnostics only, never row filters
    std::vector<SortSpec> order_by;
    std::optional<LimitSpec> limit;
    std::vector<std::string> notes;        // skipped/unsupported fragments
};

/// SQL decomposition plan: the generated query text, never executed.
struct SqlPlan {
    enum class Origin { planner, refiner };

    std::string raw_sql;
    std::optional<std::string> refined_sql;
    Origin origin = Origin::planner;

    const std::string& effective_sql() const { return refined_sql ? *refined_sql : raw_sql; }

    void validate() const {
        if (str::trim(raw_sql).empty()) throw Error("SqlPlan.raw_sql is empty");
    }
};

struct ParseResult {
    std::optional<DecompositionTriple> triple;
    std::string failure;  // set when !triple

    bool ok() const { return triple.has_value(); }
};

namespace sql_detail {

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Lowercase, collapse whitespace runs, strip a trailing semicolon. All
// pattern matching runs over this canonical form.
inline std::string canonicalize(std::string_view sql) {
    std::string s = str::collapse_ws(str::to_lower(sql));
    while (!s.empty() && (s.back() == ';' || s.back() == ' ')) s.pop_back();
    return s;
}

// Spans of "(select ...)" subqueries, found by balanced-paren scanning so the
// outer condition tokenizer can skip them and the inner WHERE can be parsed
// separately.
struct Span {
    std::size_t begin;  // at '('
    std::size_t end;    // one past ')'
};

inline std::vector<Span> subquery_spans(const std::string& s) {
    std::vector<Span> spans;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] != '(') continue;
        std::size_t j = i + 1;
        while (j < s.size() && s[j] == ' ') ++j;
        if (s.compare(j, 6, "select") != 0) continue;
        int depth = 1;
        std::size_t k = i + 1;
        char quote = 0;
        for (; k < s.size() && depth > 0; ++k) {
            char c = s[k];
            if (quote) {
                if (c == quote) quote = 0;
            } else if (c == '\'' || c == '"') {
                quote = c;
            } else if (c == '(') {
                ++depth;
            } else if (c == ')') {
                --depth;
            }
        }
        spans.push_back({i, k});
        i = k - 1;
    }
    return spans;
}

inline std::string mask_spans(std::string s, const std::vector<Span>& spans) {
    for (const auto& sp : spans)
        for (std::size_t i = sp.begin; i < sp.end && i < s.size(); ++i) s[i] = ' ';
    return s;
}

// Operator table, longest token first so ">=" never parses as ">".
struct OpToken {
    std::string_view text;
    SqlOperator op;
    bool word;  // needs word boundaries
};

inline const std::vector<OpToken>& op_tokens() {
    static const std::vector<OpToken> ops = {
        {"is not null", SqlOperator::is_not_null, true},
        {"is null", SqlOperator::is_null, true},
        {"not like", SqlOperator::not_like, true},
        {"not in", SqlOperator::not_in_list, true},
        {"between", SqlOperator::between, true},
        {"like", SqlOperator::like, true},
        {"in", SqlOperator::in_list, true},
        {">=", SqlOperator::gte, false},
        {"<=", SqlOperator::lte, false},
        {"<>", SqlOperator::neq, false},
        {"!=", SqlOperator::neq, false},
        {"=", SqlOperator::eq, false},
        {">", SqlOperator::gt, false},
        {"<", SqlOperator::lt, false},
    };
    return ops;
}

inline SqlOperator negate(SqlOperator op) {
    switch (op) {
        case SqlOperator::eq: return SqlOperator::neq;
        case SqlOperator::neq: return SqlOperator::eq;
        case SqlOperator::gt: return SqlOperator::lte;
        case SqlOperator::lt: return SqlOperator::gte;
        case SqlOperator::gte: return SqlOperator::lt;
        case SqlOperator::lte: return SqlOperator::gt;
        case SqlOperator::like: return SqlOperator::not_like;
        case SqlOperator::not_like: return SqlOperator::like;
        case SqlOperator::in_list: return SqlOperator::not_in_list;
        case SqlOperator::not_in_list: return SqlOperator::in_list;
        case SqlOperator::is_null: return SqlOperator::is_not_null;
        case SqlOperator::is_not_null: return SqlOperator::is_null;
        case SqlOperator::between: return SqlOperator::between;  // no negated form kept
    }
    return op;
}

// Scans one literal starting at pos: quoted string (doubled quotes unescape)
// or a bare token of word chars plus . % + -. Returns nullopt when neither
// is present (e.g. the operand was a masked subquery).
inline std::optional<std::string> scan_literal(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos >= s.size()) return std::nullopt;
    char q = s[pos];
    if (q == '\'' || q == '"') {
        std::string out;
        std::size_t i = pos + 1;
        for (; i < s.size(); ++i) {
            if (s[i] == q) {
                if (i + 1 < s.size() && s[i + 1] == q) {
                    out += q;
                    ++i;
                    continue;
                }
                ++i;
                break;
            }
            out += s[i];
        }
        pos = i;
        return out;
    }
    std::size_t start = pos;
    auto bare = [](char c) {
        return is_word_char(c) || c == '.' || c == '%' || c == '+' || c == '-';
    };
    while (pos < s.size() && bare(s[pos])) ++pos;
    if (pos == start) return std::nullopt;
    return s.substr(start, pos - start);
}

// The preceding column word for an operator occurrence, per the pattern-3
// shape "(\w+) <op>". Skips back over one closing paren is NOT done: a
// non-word char directly before the operator rejects the occurrence.
inline std::optional<std::string> column_before(const std::string& s, std::size_t op_pos,
                                                bool* negated) {
    std::size_t i = op_pos;
    while (i > 0 && s[i - 1] == ' ') --i;
    std::size_t end = i;
    bool through_paren = false;
    if (i > 0 && s[i - 1] == ')') return std::nullopt;  // expression, not a bare column
    while (i > 0 && is_word_char(s[i - 1])) --i;
    if (i == end) return std::nullopt;
    std::string word = s.substr(i, end - i);
    if (word == "and" || word == "or" || word == "not" || word == "where" || word == "select" ||
        word == "from" || word == "on" || word == "by")
        return std::nullopt;
    // leading NOT (optionally with a paren) negates the operator
    std::size_t j = i;
    while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '(')) {
        if (s[j - 1] == '(') through_paren = true;
        --j;
    }
    if (j >= 3 && s.compare(j - 3, 3, "not") == 0 && (j == 3 || !is_word_char(s[j - 4]))) {
        (void)through_paren;
        *negated = true;
    } else {
        *negated = false;
    }
    return word;
}

struct ClauseConditions {
    std::vector<Condition> conditions;
    std::vector<std::string> mentioned_columns;  // columns of rejected conditions
    std::vector<std::string> notes;
};

// Pattern-3 style tokenizer over one clause (quote-aware, subqueries already
// masked). Extracts column/operator/operand triples left to right.
inline ClauseConditions tokenize_conditions(const std::string& clause) {
    ClauseConditions out;
    std::size_t pos = 0;
    while (pos < clause.size()) {
        char c = clause[pos];
        if (c == '\'' || c == '"') {  // skip quoted literal
            char q = c;
            ++pos;
            while (pos < clause.size()) {
                if (clause[pos] == q) {
                    if (pos + 1 < clause.size() && clause[pos + 1] == q) pos += 2;
                    else { ++pos; break; }
                } else ++pos;
            }
            continue;
        }
        const OpToken* hit = nullptr;
        for (const auto& op : op_tokens()) {
            if (clause.compare(pos, op.text.size(), op.text) != 0) continue;
            if (op.word) {
                bool left_ok = pos == 0 || !is_word_char(clause[pos - 1]);
                std::size_t after = pos + op.text.size();
                bool right_ok = after >= clause.size() || !is_word_char(clause[after]);
                if (!left_ok || !right_ok) continue;
            }
            hit = &op;
            break;
        }
        if (!hit) {
            ++pos;
            continue;
        }
        bool negated = false;
        auto column = column_before(clause, pos, &negated);
        std::size_t cursor = pos + hit->text.size();
        if (!column) {
            pos = cursor;
            continue;
        }
        Condition cond;
        cond.column = *column;
        cond.op = negated ? negate(hit->op) : hit->op;
        bool keep = true;
        switch (hit->op) {
            case SqlOperator::is_null:
            case SqlOperator::is_not_null:
                break;
            case SqlOperator::between: {
                auto lo = scan_literal(clause, cursor);
                std::size_t save = cursor;
                while (cursor < clause.size() && clause[cursor] == ' ') ++cursor;
                bool has_and = clause.compare(cursor, 3, "and") == 0 &&
                               (cursor + 3 >= clause.size() || !is_word_char(clause[cursor + 3]));
                if (has_and) cursor += 3; else cursor = save;
                auto hi = has_and ? scan_literal(clause, cursor) : std::nullopt;
                if (lo && hi) {
                    cond.operands = {*lo, *hi};
                } else {
                    keep = false;
                    out.notes.push_back("malformed between near \"" + cond.column + "\"");
                }
                break;
            }
            case SqlOperator::in_list:
            case SqlOperator::not_in_list: {
                while (cursor < clause.size() && clause[cursor] == ' ') ++cursor;
                if (cursor < clause.size() && clause[cursor] == '(') {
                    std::size_t close = cursor + 1;
                    int depth = 1;
                    char quote = 0;
                    for (; close < clause.size() && depth > 0; ++close) {
                        char cc = clause[close];
                        if (quote) { if (cc == quote) quote = 0; }
                        else if (cc == '\'' || cc == '"') quote = cc;
                        else if (cc == '(') ++depth;
                        else if (cc == ')') --depth;
                    }
                    std::string inner = clause.substr(cursor + 1, close - cursor - 2);
                    cursor = close;
                    if (str::trim(inner).empty()) {
                        keep = false;
                        out.notes.push_back("in-list operand was a subquery or empty; \"" +
                                            cond.column + "\" joins the projection only");
                    } else {
                        std::size_t p = 0;
                        while (p < inner.size()) {
                            auto lit = scan_literal(inner, p);
                            if (!lit) break;
                            cond.operands.push_back(*lit);
                            while (p < inner.size() && (inner[p] == ' ' || inner[p] == ',')) ++p;
                        }
                        if (cond.operands.empty()) keep = false;
                    }
                } else {
                    auto lit = scan_literal(clause, cursor);
                    if (lit) {
                        cond.operands.push_back(*lit);
                    } else {
                        keep = false;
                        out.notes.push_back("in-list operand missing; \"" + cond.column +
                                            "\" joins the projection only");
                    }
                }
                break;
            }
            default: {
                auto lit = scan_literal(clause, cursor);
                if (lit) {
                    cond.operands.push_back(*lit);
                } else {
                    keep = false;
                    out.notes.push_back("no literal operand after \"" + cond.column + " " +
                                        std::string(hit->text) + "\"");
                }
                break;
            }
        }
        if (keep && cond.arity_ok()) out.conditions.push_back(std::move(cond));
        else out.mentioned_columns.push_back(cond.column);
        pos = cursor > pos ? cursor : pos + 1;
    }
    return out;
}

// count(x)/sum(x)/... wrappers unwrap to the inner column; the aggregate
// intent is preserved separately.
inline std::optional<AggregateFn> aggregate_fn(std::string_view name) {
    if (name == "count") return AggregateFn::count;
    if (name == "sum") return AggregateFn::sum;
    if (name == "avg" || name == "mean") return AggregateFn::avg;
    if (name == "min") return AggregateFn::min;
    if (name == "max") return AggregateFn::max;
    return std::nullopt;
}

struct SelectItem {
    std::string column;
    std::optional<AggregateRef> aggregate;
};

inline std::vector<std::string> split_top_level(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    char quote = 0;
    for (char c : s) {
        if (quote) {
            if (c == quote) quote = 0;
            cur += c;
            continue;
        }
        if (c == '\'' || c == '"') { quote = c; cur += c; continue; }
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) {
            parts.push_back(cur);
            cur.clear();
            continue;
        }
        cur += c;
    }
    parts.push_back(cur);
    return parts;
}

inline SelectItem parse_select_item(std::string item) {
    item = str::trim(item);
    if (str::istarts_with(item, "distinct ")) item = str::trim(item.substr(9));
    static const std::regex alias_re(R"(\s+as\s+[\w"'`]+$)");
    item = std::regex_replace(item, alias_re, "");
    static const std::regex agg_re(R"(^(count|sum|avg|min|max)\s*\((.*)\)$)");
    std::smatch m;
    if (std::regex_match(item, m, agg_re)) {
        auto fn = aggregate_fn(m[1].str());
        std::string inner = str::trim(m[2].str());
        if (str::istarts_with(inner, "distinct ")) inner = str::trim(inner.substr(9));
        if (inner.empty()) inner = "*";
        // compound expressions like max(a) - min(b) are not a single wrapper
        if (inner.find('(') == std::string::npos && inner.find(')') == std::string::npos)
            return {inner, AggregateRef{*fn, inner}};
    }
    return {item, std::nullopt};
}

inline void add_column(std::vector<std::string>& cols, const std::string& name) {
    if (name.empty()) return;
    for (const auto& c : cols)
        if (c == name) return;
    cols.push_back(name);
}

}  // namespace sql_detail

/// Parses an SQL plan into its decomposition triple using pattern-driven
/// extraction (never executes the query). Total over arbitrary input: any
/// string either yields a triple or a ParseResult failure.
inline ParseResult parse_sql(const SqlPlan& plan) {
    using namespace sql_detail;
    try {
        std::string sql = canonicalize(plan.effective_sql());
        DecompositionTriple triple;

        // SELECT list
        static const std::regex select_re(R"(select\s(.*?)\sfrom\b)");
        std::smatch sel;
        if (!std::regex_search(sql, sel, select_re))
            return {std::nullopt, "no select-list matched"};
        for (const auto& raw_item : split_top_level(sel[1].str(), ',')) {
            auto item = parse_select_item(raw_item);
            if (item.aggregate) triple.aggregates.push_back(*item.aggregate);
            if (item.column == "*") add_column(triple.columns, std::string(kAllColumns));
            else add_column(triple.columns, item.column);
        }

        auto spans = subquery_spans(sql);
        std::string masked = mask_spans(sql, spans);

        // outer WHERE (everything after the keyword; trailing clauses carry
        // no operators so the tokenizer ignores them)
        static const std::regex where_re(R"(\bwhere\s+(.*)$)");
        std::smatch wm;
        std::string where_text;
        if (std::regex_search(masked, wm, where_re)) where_text = wm[1].str();

        // cut HAVING out of the condition text; it is handled as diagnostics
        std::string having_text;
        if (auto hpos = where_text.find(" having "); hpos != std::string::npos) {
            having_text = where_text.substr(hpos + 8);
            where_text.resize(hpos);
        }
        static const std::regex having_re(R"(\bhaving\s+(.*)$)");
        if (having_text.empty()) {
            std::smatch hm;
            if (std::regex_search(masked, hm, having_re)) having_text = hm[1].str();
        }

        auto outer = tokenize_conditions(where_text);
        triple.conditions = std::move(outer.conditions);
        triple.notes = std::move(outer.notes);
        std::vector<std::string> mentioned = std::move(outer.mentioned_columns);

        // nested sub-select WHERE clauses
        for (const auto& sp : spans) {
            std::string inner = sql.substr(sp.begin + 1, sp.end - sp.begin - 2);
            auto inner_spans = subquery_spans(inner);
            std::string inner_masked = mask_spans(inner, inner_spans);
            std::smatch im;
            if (!std::regex_search(inner_masked, im, where_re)) continue;
            auto nested = tokenize_conditions(im[1].str());
            for (auto& c : nested.conditions) triple.conditions.push_back(std::move(c));
            for (auto& n : nested.notes) triple.notes.push_back(std::move(n));
            for (auto& c : nested.mentioned_columns) mentioned.push_back(std::move(c));
        }

        for (const auto& c : triple.conditions) add_column(triple.columns, c.column);
        for (const auto& c : mentioned) add_column(triple.columns, c);
        for (const auto& c : triple.conditions)
            for (const auto& v : c.operands) triple.values.push_back(v);

        // HAVING: aggregate-aware, diagnostics only
        if (!having_text.empty()) {
            std::string h = having_text;
            // strip trailing order/limit
            for (const char* kw : {" order by ", " limit "})
                if (auto p = h.find(kw); p != std::string::npos) h.resize(p);
            static const std::regex hagg_re(R"((count|sum|avg|min|max)\s*\(\s*([\w*]*)\s*\))");
            std::smatch am;
            std::string hscan = h;
            while (std::regex_search(hscan, am, hagg_re)) {
                auto fn = aggregate_fn(am[1].str());
                std::string inner = am[2].str().empty() ? "*" : am[2].str();
                triple.aggregates.push_back({*fn, inner});
                if (inner != "*") add_column(triple.columns, inner);
                hscan = am.suffix().str();
            }
            // replace aggregate calls with their inner column so the
            // tokenizer sees a plain "col op literal" shape; "*" needs a
            // word-shaped stand-in for the column scan
            std::string flat = std::regex_replace(h, hagg_re, "$2");
            flat = str::replace_all(std::move(flat), "*", "_star_");
            auto hc = tokenize_conditions(flat);
            for (auto& c : hc.conditions) {
                if (c.column == "_star_") c.column = "*";
                if (c.column != "*" && !c.column.empty()) add_column(triple.columns, c.column);
                triple.having.push_back(std::move(c));
            }
        }

        // GROUP BY
        static const std::regex group_re(R"(\bgroup\s+by\s+([\w,\s]+))");
        std::smatch gm;
        if (std::regex_search(masked, gm, group_re)) {
            std::string g = gm[1].str();
            for (const char* kw : {" order ", " limit ", " having "})
                if (auto p = g.find(kw); p != std::string::npos) g.resize(p);
            for (auto& col : str::split(g, ',')) {
                auto name = str::trim(col);
                if (name.empty()) continue;
                triple.group_by.push_back(name);
                add_column(triple.columns, name);
            }
        }

        // ORDER BY ... [asc|desc]
        static const std::regex order_re(R"(\border\s+by\s+(.*)$)");
        std::smatch om;
        if (std::regex_search(masked, om, order_re)) {
            std::string o = om[1].str();
            if (auto p = o.find(" limit "); p != std::string::npos) o.resize(p);
            for (auto& part : split_top_level(o, ',')) {
                std::string item = str::trim(part);
                if (item.empty()) continue;
                SortSpec sort;
                if (str::iends_with(item, " desc")) {
                    sort.ascending = false;
                    item = str::trim(item.substr(0, item.size() - 5));
                } else if (str::iends_with(item, " asc")) {
                    item = str::trim(item.substr(0, item.size() - 4));
                }
                static const std::regex oagg_re(R"(^(count|sum|avg|min|max)\s*\(.*\)$)");
                if (std::regex_match(item, oagg_re)) {
                    triple.notes.push_back("order by aggregate \"" + item + "\" skipped");
                    continue;
                }
                sort.column = item;
                triple.order_by.push_back(std::move(sort));
            }
        }

        // LIMIT n | LIMIT off, n | LIMIT n OFFSET m
        static const std::regex limit_re(R"(\blimit\s+(\d+)(?:\s*,\s*(\d+))?)");
        std::smatch lm;
        if (std::regex_search(masked, lm, limit_re)) {
            LimitSpec spec;
            if (lm[2].matched) {
                spec.offset = std::stoul(lm[1].str());
                spec.count = std::stoul(lm[2].str());
            } else {
                spec.count = std::stoul(lm[1].str());
            }
            static const std::regex offset_re(R"(\boffset\s+(\d+))");
            std::smatch ofm;
            if (std::regex_search(masked, ofm, offset_re)) spec.offset = std::stoul(ofm[1].str());
            triple.limit = spec;
        }

        return {std::move(triple), {}};
    } catch (const std::exception& e) {
        return {std::nullopt, std::string("parse error: ") + e.what()};
    }
}

inline ParseResult parse_sql(std::string_view sql) {
    SqlPlan plan;
    plan.raw_sql = std::string(sql);
    return parse_sql(plan);
}

}  // namespace tadre

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tadre/sql.hpp"

namespace tadre {

/// Threshold from the correction rule: a match requires LCS ratio > 0.2.
inline constexpr double kLcsMatchThreshold = 0.2;

namespace lcs_detail {

// ASCII lowercase + strip ASCII non-alphanumerics; bytes >= 0x80 are kept so
// non-ASCII names still compare.
inline std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (uc >= 0x80 || std::isalnum(uc))
            out += static_cast<char>(std::tolower(uc));
    }
    return out;
}

inline std::size_t lcs_length(std::string_view a, std::string_view b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace lcs_detail

/// |LCS(norm(a), norm(b))| / max(|norm(a)|, |norm(b)|); 0 when either side
/// normalizes to empty. Symmetric, in [0,1], and 1 iff the normalized
/// strings are equal and non-empty.
inline double lcs_ratio(std::string_view a, std::string_view b) {
    auto na = lcs_detail::normalize(a);
    auto nb = lcs_detail::normalize(b);
    if (na.empty() || nb.empty()) return 0.0;
    auto len = lcs_detail::lcs_length(na, nb);
    return static_cast<double>(len) / static_cast<double>(std::max(na.size(), nb.size()));
}

struct ColumnCorrection {
    std::string extracted;
    std::optional<std::string> matched;  // present iff ratio > threshold
    double ratio = 0.0;
};

/// LCS-corrected projection: per extracted name, the best-matching header
/// column (ties to the leftmost) or nothing when the plan hallucinated.
struct CorrectedColumns {
    std::vector<ColumnCorrection> entries;
    bool all_columns = false;  // the plan selected "*"

    std::vector<std::string> matched_names() const {
        std::vector<std::string> out;
        for (const auto& e : entries)
            if (e.matched && std::find(out.begin(), out.end(), *e.matched) == out.end())
                out.push_back(*e.matched);
        return out;
    }
};

inline CorrectedColumns correct_columns(const std::vector<std::string>& extracted,
                                        const std::vector<std::string>& header) {
    if (header.empty()) throw Error("correct_columns requires a non-empty header");
    CorrectedColumns out;
    for (const auto& name : extracted) {
        if (name == kAllColumns) {
            out.all_columns = true;
            continue;
        }
        ColumnCorrection entry;
        entry.extracted = name;
        std::size_t best = 0;
        double best_ratio = -1.0;
        for (std::size_t i = 0; i < header.size(); ++i) {
            double r = lcs_ratio(name, header[i]);
            if (r > best_ratio) {  // strict: ties keep the leftmost column
                best_ratio = r;
                best = i;
            }
        }
        entry.ratio = best_ratio;
        if (best_ratio > kLcsMatchThreshold) entry.matched = header[best];
        out.entries.push_back(std::move(entry));
    }
    return out;
}

/// A triple with hallucinated names replaced by real header names and the
/// conditions rewritten accordingly; conditions whose column was discarded
/// are dropped (kept for diagnostics).
struct CorrectedPlan {
    CorrectedColumns columns;
    std::vector<Condition> conditions;          // surviving, header-name space
    std::vector<Condition> dropped_conditions;  // extracted-name space
    std::vector<SortSpec> order_by;             // header-name space
    std::optional<LimitSpec> limit;
    bool disjunctive = false;
};

inline CorrectedPlan correct_plan(const DecompositionTriple& triple,
                                  const std::vector<std::string>& header) {
    CorrectedPlan plan;
    plan.columns = correct_columns(triple.columns, header);
    plan.limit = triple.limit;
    auto match_of = [&](const std::string& extracted) -> std::optional<std::string> {
        for (const auto& e : plan.columns.entries)
            if (e.extracted == extracted) return e.matched;
        // column not among C (cannot happen for parser output; fall back to
        // a direct correction for hand-built triples)
        auto corrected = correct_columns({extracted}, header);
        if (!corrected.entries.empty()) return corrected.entries.front().matched;
        return std::nullopt;
    };
    for (const auto& cond : triple.conditions) {
        auto matched = match_of(cond.column);
        if (!matched) {
            plan.dropped_conditions.push_back(cond);
            continue;
        }
        Condition fixed = cond;
        fixed.column = *matched;
        plan.conditions.push_back(std::move(fixed));
    }
    for (const auto& sort : triple.order_by) {
        auto matched = match_of(sort.column);
        if (!matched) continue;
        plan.order_by.push_back({*matched, sort.ascending});
    }
    return plan;
}

}  // namespace tadre

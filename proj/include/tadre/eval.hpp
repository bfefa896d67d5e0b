#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tadre/config.hpp"
#include "tadre/pipeline.hpp"
#include "tadre/strings.hpp"
#include "tadre/table_io.hpp"
#include "tadre/values.hpp"

namespace tadre {

namespace eval_detail {

// Typographic characters folded to ASCII before comparison.
inline std::string fold_unicode(std::string_view s) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            out += static_cast<char>(c);
            ++i;
            continue;
        }
        static const std::pair<std::string_view, std::string_view> folds[] = {
            {"‘", "'"}, {"’", "'"}, {"“", "\""}, {"”", "\""},
            {"–", "-"}, {"—", "-"}, {" ", " "},  {"−", "-"},
        };
        bool folded = false;
        for (const auto& [from, to] : folds) {
            if (s.compare(i, from.size(), from) == 0) {
                out += to;
                i += from.size();
                folded = true;
                break;
            }
        }
        if (!folded) {
            out += static_cast<char>(c);
            ++i;
        }
    }
    return out;
}

// A comma inside a number ("3,000") is a thousands separator, not a list
// separator: preceded by a digit and followed by exactly three digits.
inline std::vector<std::string> split_answer_list(const std::string& s) {
    std::vector<std::string> items;
    std::string cur;
    auto digit = [&](std::size_t i) { return i < s.size() && s[i] >= '0' && s[i] <= '9'; };
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c != ',') {
            cur += c;
            continue;
        }
        bool thousands = i > 0 && digit(i - 1) && digit(i + 1) && digit(i + 2) && digit(i + 3) &&
                         !digit(i + 4);
        if (thousands) {
            cur += c;
            continue;
        }
        items.push_back(cur);
        cur.clear();
    }
    items.push_back(cur);
    return items;
}

inline std::string strip_quotes(std::string s) {
    s = str::trim(s);
    while (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                             (s.front() == '\'' && s.back() == '\''))) {
        s = str::trim(s.substr(1, s.size() - 2));
    }
    return s;
}

inline bool numeric_looking(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = 0;
    if (s[0] == '+' || s[0] == '-') i = 1;
    bool digits = false, dot = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (c >= '0' && c <= '9') {
            digits = true;
            continue;
        }
        if (c == '.' && !dot) {
            dot = true;
            continue;
        }
        return false;
    }
    return digits;
}

// Pure string canonicalization keeps normalize idempotent and avoids
// floating-point round trips: strip leading zeros and trailing fraction
// zeros, normalize -0 to 0.
inline std::string canonical_number(std::string s) {
    bool negative = false;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        negative = s[0] == '-';
        s.erase(0, 1);
    }
    std::string whole, frac;
    if (auto dot = s.find('.'); dot != std::string::npos) {
        whole = s.substr(0, dot);
        frac = s.substr(dot + 1);
    } else {
        whole = s;
    }
    while (whole.size() > 1 && whole.front() == '0') whole.erase(0, 1);
    if (whole.empty()) whole = "0";
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    std::string out = whole;
    if (!frac.empty()) out += "." + frac;
    bool is_zero = out == "0";
    if (negative && !is_zero) out = "-" + out;
    return out;
}

inline std::string clean_numeric_noise(std::string s) {
    // currency and percent markers drop; thousands separators drop when the
    // result still looks numeric
    std::string no_currency;
    std::size_t i = 0;
    while (i < s.size()) {
        bool stripped = false;
        for (std::string_view cur : {"$", "€", "£", "¥", "%"}) {
            if (s.compare(i, cur.size(), cur) == 0) {
                i += cur.size();
                stripped = true;
                break;
            }
        }
        if (!stripped) no_currency += s[i++];
    }
    std::string no_commas;
    for (char c : no_currency)
        if (c != ',') no_commas += c;
    no_commas = str::trim(no_commas);
    if (numeric_looking(no_commas)) return no_commas;
    return s;
}

}  // namespace eval_detail

/// Normalizes one answer string into its comparable item list: strips a
/// "Final Answer:" marker, splits the list, then per item lowercases,
/// folds typographic characters, strips quotes, collapses whitespace, and
/// canonicalizes numbers.
inline std::vector<std::string> normalize_answer(std::string_view raw) {
    using namespace eval_detail;
    std::string s(raw);
    auto low = str::to_lower(s);
    const std::string marker = "final answer:";
    if (auto pos = low.rfind(marker); pos != std::string::npos)
        s = s.substr(pos + marker.size());
    s = fold_unicode(s);
    std::vector<std::string> out;
    for (auto& item : split_answer_list(s)) {
        std::string x = str::to_lower(str::trim(item));
        x = strip_quotes(x);
        x = str::collapse_ws(x);
        x = clean_numeric_noise(x);
        if (numeric_looking(x)) x = canonical_number(x);
        if (!x.empty()) out.push_back(x);
    }
    return out;
}

/// Normalized multiset equality, order-insensitive.
inline bool exact_match(std::string_view pred, const std::vector<std::string>& gold) {
    auto p = normalize_answer(pred);
    std::vector<std::string> g;
    for (const auto& item : gold)
        for (auto& n : normalize_answer(item)) g.push_back(std::move(n));
    std::sort(p.begin(), p.end());
    std::sort(g.begin(), g.end());
    return p == g;
}

/// (full - sub) / full, clamped into [0, 1].
inline double token_reduction(long full, long sub, bool* clamped = nullptr) {
    if (full <= 0) throw Error("token_reduction requires full > 0");
    double r = static_cast<double>(full - sub) / static_cast<double>(full);
    if (clamped) *clamped = r < 0.0;
    return std::clamp(r, 0.0, 1.0);
}

enum class FailureClass { decompose_fail, retrieval_fail, reasoning_fail, provider_fail };

inline std::string_view to_string(FailureClass f) {
    switch (f) {
        case FailureClass::decompose_fail: return "decompose_fail";
        case FailureClass::retrieval_fail: return "retrieval_fail";
        case FailureClass::reasoning_fail: return "reasoning_fail";
        case FailureClass::provider_fail: return "provider_fail";
    }
    return "?";
}

struct EvalRecord {
    std::string question_id;
    std::vector<std::string> gold_answers;
    std::string predicted;
    bool match = false;
    long table_tokens_full = 0;
    long table_tokens_sub = 0;
    long llm_input_tokens_total = 0;
    std::optional<FailureClass> failure_class;
    double token_reduction_value = 0.0;
    bool fallback = false;
    nlohmann::json diagnostics;  // {raw_sql, triple, corrections, dropped_conditions}
};

struct RunReport {
    double accuracy = 0.0;
    std::size_t n = 0;
    double mean_token_reduction = 0.0;
    double mean_llm_input_tokens = 0.0;
    std::map<std::string, std::size_t> failure_histogram;
    std::vector<EvalRecord> per_question;

    void finalize() {
        n = per_question.size();
        std::size_t matches = 0;
        double reductions = 0.0, tokens = 0.0;
        failure_histogram.clear();
        for (const auto& r : per_question) {
            if (r.match) ++matches;
            reductions += r.token_reduction_value;
            tokens += static_cast<double>(r.llm_input_tokens_total);
            if (r.failure_class)
                ++failure_histogram[std::string(to_string(*r.failure_class))];
        }
        accuracy = n ? static_cast<double>(matches) / static_cast<double>(n) : 0.0;
        mean_token_reduction = n ? reductions / static_cast<double>(n) : 0.0;
        mean_llm_input_tokens = n ? tokens / static_cast<double>(n) : 0.0;
    }
};

inline void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = {{"question_id", r.question_id},
         {"gold_answers", r.gold_answers},
         {"predicted", r.predicted},
         {"match", r.match},
         {"table_tokens_full", r.table_tokens_full},
         {"table_tokens_sub", r.table_tokens_sub},
         {"llm_input_tokens_total", r.llm_input_tokens_total},
         {"token_reduction", r.token_reduction_value},
         {"fallback", r.fallback}};
    if (r.failure_class) j["failure_class"] = std::string(to_string(*r.failure_class));
    if (!r.diagnostics.is_null()) j["diagnostics"] = r.diagnostics;
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
    j = {{"accuracy", r.accuracy},
         {"n", r.n},
         {"mean_token_reduction", r.mean_token_reduction},
         {"mean_llm_input_tokens", r.mean_llm_input_tokens},
         {"failure_histogram", r.failure_histogram},
         {"per_question", r.per_question}};
}

/// One benchmark line as loaded; unknown fields are preserved verbatim so
/// builder output round-trips losslessly.
struct BenchRecord {
    std::string table_id;
    std::string question;
    std::vector<std::string> answers;
    nlohmann::json raw;

    std::string question_id(std::size_t index) const {
        if (raw.contains("id")) return raw.at("id").get<std::string>();
        return table_id + "#" + std::to_string(index);
    }
};

inline std::vector<BenchRecord> load_benchmark(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read benchmark: " + path);
    std::vector<BenchRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (str::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        BenchRecord r;
        r.table_id = j.at("table_id").get<std::string>();
        r.question = j.at("question").get<std::string>();
        for (const auto& a : j.at("answers")) r.answers.push_back(a.get<std::string>());
        r.raw = std::move(j);
        records.push_back(std::move(r));
    }
    return records;
}

enum class EvalMode { full_pipeline, end_to_end_baseline, decompose_only };

inline std::optional<EvalMode> eval_mode_from_string(std::string_view s) {
    if (s == "full_pipeline" || s == "full") return EvalMode::full_pipeline;
    if (s == "end_to_end_baseline" || s == "end_to_end") return EvalMode::end_to_end_baseline;
    if (s == "decompose_only" || s == "decompose") return EvalMode::decompose_only;
    return std::nullopt;
}

namespace eval_detail {

// Locates every cell of the parent table whose normalized content covers a
// normalized gold item. Reasoning failures are only decidable when every
// gold item is locatable somewhere in the parent.
struct GoldLocation {
    bool locatable = true;
    bool covered_by_final = true;
};

inline GoldLocation locate_gold(const Table& t, const std::vector<std::string>& gold,
                                const std::vector<std::size_t>& final_rows,
                                const std::vector<std::size_t>& final_cols) {
    GoldLocation out;
    std::vector<std::string> items;
    for (const auto& g : gold)
        for (auto& n : normalize_answer(g)) items.push_back(std::move(n));
    if (items.empty()) {
        out.locatable = false;
        return out;
    }
    for (const auto& item : items) {
        bool anywhere = false, in_final = false;
        for (std::size_t r = 0; r < t.rows.size() && !(anywhere && in_final); ++r) {
            for (std::size_t c = 0; c < t.header.size(); ++c) {
                auto cell_items = normalize_answer(t.rows[r][c]);
                bool hit = std::find(cell_items.begin(), cell_items.end(), item) !=
                           cell_items.end();
                if (!hit) continue;
                anywhere = true;
                bool row_in = std::find(final_rows.begin(), final_rows.end(), r) !=
                              final_rows.end();
                bool col_in = std::find(final_cols.begin(), final_cols.end(), c) !=
                              final_cols.end();
                if (row_in && col_in) {
                    in_final = true;
                    break;
                }
            }
        }
        if (!anywhere) out.locatable = false;
        if (!in_final) out.covered_by_final = false;
    }
    return out;
}

}  // namespace eval_detail

/// Failure taxonomy for one wrong answer; absent = unknown (never guessed).
inline std::optional<FailureClass> classify_failure(const AnswerResult& result,
                                                    const Table& parent,
                                                    const std::vector<std::string>& gold) {
    if (!result.ok) return FailureClass::provider_fail;
    const auto& trace = result.trace;
    if (trace.fallback) return FailureClass::decompose_fail;
    if (trace.actions_requested > 0 &&
        (trace.actions_skipped >= trace.actions_requested || !trace.augmentation_grew))
        return FailureClass::retrieval_fail;
    auto loc = eval_detail::locate_gold(parent, gold, trace.final_parent_rows,
                                        trace.final_parent_columns);
    if (loc.locatable && loc.covered_by_final) return FailureClass::reasoning_fail;
    return std::nullopt;  // gold not locatable: unknown
}

/// Evaluation driver: loads tables lazily, runs each question under the
/// selected mode, scores, classifies failures, and aggregates the report.
class Evaluator {
  public:
    Evaluator(Config cfg, std::shared_ptr<LlmClient> llm,
              std::shared_ptr<ExemplarStore> store = nullptr,
              std::shared_ptr<EmbeddingProvider> embedder = nullptr)
        : cfg_(std::move(cfg)), llm_(std::move(llm)), store_(std::move(store)),
          embedder_(std::move(embedder)) {}

    RunReport run(const std::vector<BenchRecord>& records, const std::string& tables_dir,
                  EvalMode mode) {
        RunReport report;
        report.per_question.resize(records.size());
        std::size_t workers = std::max(1, cfg_.eval_workers);
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= records.size()) break;
                report.per_question[i] = evaluate_one(records[i], i, tables_dir, mode);
            }
        };
        if (workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& th : pool) th.join();
        }
        report.finalize();
        return report;
    }

  private:
    const Table& table_for(const std::string& table_id, const std::string& tables_dir) {
        std::lock_guard<std::mutex> lock(tables_mu_);
        auto it = tables_.find(table_id);
        if (it != tables_.end()) return it->second;
        for (const char* ext : {".jsonl", ".csv", ".tsv"}) {
            auto path = tables_dir + "/" + table_id + ext;
            if (std::filesystem::exists(path))
                return tables_.emplace(table_id, load_table(path)).first->second;
        }
        throw Error("no table file for id \"" + table_id + "\" under " + tables_dir);
    }

    EvalRecord evaluate_one(const BenchRecord& bench, std::size_t index,
                            const std::string& tables_dir, EvalMode mode) {
        EvalRecord rec;
        rec.question_id = bench.question_id(index);
        rec.gold_answers = bench.answers;
        const Table* parent = nullptr;
        try {
            parent = &table_for(bench.table_id, tables_dir);
        } catch (const std::exception& e) {
            rec.failure_class = FailureClass::provider_fail;
            rec.diagnostics = {{"error", e.what()}};
            return rec;
        }
        Pipeline pipeline(cfg_, llm_, store_, embedder_);
        AnswerResult result;
        switch (mode) {
            case EvalMode::full_pipeline: result = pipeline.answer_question(*parent, bench.question); break;
            case EvalMode::end_to_end_baseline: result = pipeline.end_to_end(*parent, bench.question); break;
            case EvalMode::decompose_only: result = pipeline.decompose_only(*parent, bench.question); break;
        }
        const auto& trace = result.trace;
        rec.predicted = result.answer;
        rec.table_tokens_full = trace.table_tokens_full;
        rec.table_tokens_sub = trace.table_tokens_sub;
        rec.llm_input_tokens_total = trace.llm_input_tokens_total();
        rec.fallback = trace.fallback;
        if (rec.table_tokens_full > 0)
            rec.token_reduction_value = token_reduction(rec.table_tokens_full,
                                                        rec.table_tokens_sub);
        rec.diagnostics = {{"raw_sql", trace.raw_sql},
                           {"corrections", trace.corrections},
                           {"dropped_conditions", trace.dropped_conditions}};
        if (trace.triple) rec.diagnostics["triple"] = *trace.triple;
        if (mode == EvalMode::decompose_only) return rec;  // token stats only
        rec.match = result.ok && exact_match(rec.predicted, rec.gold_answers);
        if (!rec.match) rec.failure_class = classify_failure(result, *parent, bench.answers);
        return rec;
    }

    Config cfg_;
    std::shared_ptr<LlmClient> llm_;
    std::shared_ptr<ExemplarStore> store_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    std::mutex tables_mu_;
    std::map<std::string, Table> tables_;
};

}  // namespace tadre

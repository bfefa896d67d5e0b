#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tadre/config.hpp"
#include "tadre/llm.hpp"
#include "tadre/prompts.hpp"
#include "tadre/table.hpp"
#include "tadre/table_io.hpp"
#include "tadre/tokenizer.hpp"

namespace tadre {

enum class QaStrategy { cell, row, column, subtable };

inline std::string_view to_string(QaStrategy s) {
    switch (s) {
        case QaStrategy::cell: return "cell";
        case QaStrategy::row: return "row";
        case QaStrategy::column: return "column";
        case QaStrategy::subtable: return "subtable";
    }
    return "?";
}

struct QAPair {
    std::string question;
    std::vector<std::string> gold_answers;
    QaStrategy strategy = QaStrategy::cell;
    std::string table_id;
    bool needs_review = false;
    std::optional<bool> executable;
};

struct ExecutabilityVerdict {
    std::optional<bool> executable;  // absent: verdict unparseable, review needed
    std::vector<std::string> violated;
};

struct QaParseStats {
    std::size_t lines_seen = 0;
    std::size_t lines_skipped = 0;
};

/// Benchmark construction: LLM-driven table expansion, the four
/// answer-field-first QA strategies, and the executability classifier.
class DatasetBuilder {
  public:
    DatasetBuilder(Config cfg, std::shared_ptr<LlmClient> llm)
        : cfg_(std::move(cfg)),
          llm_(std::move(llm)),
          prompts_(cfg_.prompts_dir),
          rng_(cfg_.dataset_seed) {}

    /// Expands a small table by prompting for synthesized rows and columns.
    /// The reply must strictly grow both dimensions, keep the original
    /// header as a prefix, keep original cells at their coordinates, and
    /// contain no duplicate rows or columns. One re-ask on violation, then
    /// a hard error.
    Table expand_table(const Table& t) {
        std::string failure;
        for (int attempt = 0; attempt < 2; ++attempt) {
            auto prompt = render(prompts_.get(TemplateId::table_expand),
                                 {{"HEADER", str::join(t.header, " | ")},
                                  {"TAB", rows_text(t)}});
            auto ex = llm_->complete(prompt, "table_expand");
            Table expanded;
            try {
                expanded = delinearize(ex.response, t.source_id, /*skip_blank=*/true);
            } catch (const Error& e) {
                failure = std::string("unparseable expansion: ") + e.what();
                continue;
            }
            expanded.source_id = t.source_id;
            expanded.name = t.name;
            failure = validate_expansion(t, expanded);
            if (failure.empty()) return expanded;
        }
        throw Error("table expansion failed for \"" + t.source_id + "\": " + failure);
    }

    /// Renders the strategy prompt and parses "Q: ...; A: ..." reply lines.
    std::vector<QAPair> generate_qa(const Table& t, QaStrategy strategy,
                                    QaParseStats* stats = nullptr) {
        auto prompt = strategy_prompt(t, strategy);
        auto ex = llm_->complete(prompt, std::string(to_string(strategy)) + "_qa");
        auto pairs = parse_qa_lines(ex.response, strategy, t.source_id, stats);
        if (pairs.empty()) throw Error("no parseable QA pairs for table " + t.source_id);
        return pairs;
    }

    ExecutabilityVerdict classify_executability(const std::string& question, const Table& t) {
        nlohmann::json header_json = t.header;
        nlohmann::json rows_json = nlohmann::json::array();
        std::size_t n = std::min<std::size_t>(t.rows.size(),
                                              static_cast<std::size_t>(cfg_.dataset_sample_rows));
        for (std::size_t r = 0; r < n; ++r) rows_json.push_back(t.rows[r]);
        auto prompt = render(prompts_.get(TemplateId::executability),
                             {{"Q", question},
                              {"C", header_json.dump()},
                              {"V", rows_json.dump()}});
        auto ex = llm_->complete(prompt, "executability");
        return parse_executability(ex.response);
    }

    static ExecutabilityVerdict parse_executability(const std::string& response) {
        ExecutabilityVerdict v;
        auto fa = extract_final_answer(response);
        if (!fa.conforming) return v;  // executable stays absent
        if (str::istarts_with(fa.text, "yes")) {
            v.executable = true;
            return v;
        }
        if (!str::istarts_with(fa.text, "no")) return v;
        v.executable = false;
        static const std::pair<const char*, const char*> names[] = {
            {"column validity", "column_validity"},
            {"semantic interpretability", "semantic_interpretability"},
            {"algebraic mapping", "algebraic_mapping"},
            {"runtime error-free", "runtime_error_free"},
            {"runtime error free", "runtime_error_free"},
        };
        auto low = str::to_lower(response);
        // only the violation statement counts, not the definition text the
        // prompt echoes back
        auto mention = low.rfind("condition violated");
        std::string scan = mention == std::string::npos ? low : low.substr(mention);
        for (const auto& [text, tag] : names) {
            if (scan.find(text) == std::string::npos) continue;
            if (std::find(v.violated.begin(), v.violated.end(), tag) == v.violated.end())
                v.violated.push_back(tag);
        }
        return v;
    }

    static std::vector<QAPair> parse_qa_lines(const std::string& response, QaStrategy strategy,
                                              const std::string& table_id,
                                              QaParseStats* stats = nullptr) {
        std::vector<QAPair> pairs;
        static const std::regex qa_re(R"(^\s*(?:\d+\s*[.):]\s*)?[Qq]\s*:\s*(.*?)\s*;\s*[Aa]\s*:\s*(.*?)\s*$)");
        for (const auto& line : str::split(response, '\n')) {
            if (str::trim(line).empty()) continue;
            if (stats) ++stats->lines_seen;
            std::smatch m;
            if (!std::regex_match(line, m, qa_re)) {
                if (stats) ++stats->lines_skipped;
                continue;
            }
            QAPair pair;
            pair.question = str::trim(m[1].str());
            pair.strategy = strategy;
            pair.table_id = table_id;
            bool dropped_empty = false;
            for (auto& item : str::split(m[2].str(), ',')) {
                auto a = str::trim(item);
                if (a.empty()) {
                    dropped_empty = true;
                    continue;
                }
                pair.gold_answers.push_back(a);
            }
            if (pair.question.empty() || pair.gold_answers.empty()) {
                if (stats) ++stats->lines_skipped;
                continue;
            }
            pair.needs_review = dropped_empty;
            pairs.push_back(std::move(pair));
        }
        return pairs;
    }

    std::mt19937& rng() { return rng_; }

  private:
    static std::string rows_text(const Table& t) {
        std::string out;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (r) out += '\n';
            out += linearize_row(t.rows[r]);
        }
        return out;
    }

    std::string strategy_prompt(const Table& t, QaStrategy strategy) {
        std::map<std::string, std::string> bindings = {
            {"HEADER", str::join(t.header, " | ")},
            {"TAB", rows_text(t)},
        };
        switch (strategy) {
            case QaStrategy::cell:
                return render(prompts_.get(TemplateId::qa_cell), bindings);
            case QaStrategy::row: {
                if (t.rows.empty()) throw Error("row strategy needs at least one row");
                std::uniform_int_distribution<std::size_t> pick(0, t.rows.size() - 1);
                bindings["ROW"] = linearize_row(t.rows[pick(rng_)]);
                return render(prompts_.get(TemplateId::qa_row), bindings);
            }
            case QaStrategy::column: {
                std::uniform_int_distribution<std::size_t> pick(0, t.header.size() - 1);
                auto c = pick(rng_);
                std::string col = t.header[c];
                for (const auto& row : t.rows) col += " | " + row[c];
                bindings["COL"] = col;
                return render(prompts_.get(TemplateId::qa_column), bindings);
            }
            case QaStrategy::subtable: {
                auto sub = random_subtable(t);
                bindings["SUB"] = linearize(sub);
                return render(prompts_.get(TemplateId::qa_subtable), bindings);
            }
        }
        throw Error("unknown strategy");
    }

    SubTable random_subtable(const Table& t) {
        std::uniform_int_distribution<std::size_t> ncols(1, std::min<std::size_t>(3, t.header.size()));
        std::uniform_int_distribution<std::size_t> nrows(
            1, std::max<std::size_t>(1, std::min<std::size_t>(5, t.rows.size())));
        auto pick_distinct = [&](std::size_t n, std::size_t bound) {
            std::vector<std::size_t> ids;
            std::uniform_int_distribution<std::size_t> pick(0, bound - 1);
            while (ids.size() < n) {
                auto v = pick(rng_);
                if (std::find(ids.begin(), ids.end(), v) == ids.end()) ids.push_back(v);
            }
            std::sort(ids.begin(), ids.end());
            return ids;
        };
        auto cols = pick_distinct(ncols(rng_), t.header.size());
        auto rows = t.rows.empty() ? std::vector<std::size_t>{}
                                   : pick_distinct(nrows(rng_), t.rows.size());
        return make_subtable(t, rows, cols);
    }

    static std::string validate_expansion(const Table& orig, const Table& expanded) {
        if (expanded.num_rows() <= orig.num_rows() || expanded.num_columns() <= orig.num_columns())
            return "expansion did not strictly grow both dimensions (" +
                   std::to_string(expanded.num_rows()) + "x" +
                   std::to_string(expanded.num_columns()) + " from " +
                   std::to_string(orig.num_rows()) + "x" + std::to_string(orig.num_columns()) + ")";
        for (std::size_t c = 0; c < orig.header.size(); ++c)
            if (expanded.header[c] != orig.header[c]) return "header prefix violated";
        for (std::size_t r = 0; r < orig.rows.size(); ++r)
            for (std::size_t c = 0; c < orig.header.size(); ++c)
                if (expanded.rows[r][c] != orig.rows[r][c])
                    return "original cell mutated at row " + std::to_string(r);
        for (std::size_t i = 0; i < expanded.rows.size(); ++i)
            for (std::size_t j = i + 1; j < expanded.rows.size(); ++j)
                if (expanded.rows[i] == expanded.rows[j])
                    return "duplicate rows " + std::to_string(i) + " and " + std::to_string(j);
        for (std::size_t i = 0; i < expanded.header.size(); ++i)
            for (std::size_t j = i + 1; j < expanded.header.size(); ++j) {
                if (str::to_lower(str::trim(expanded.header[i])) !=
                    str::to_lower(str::trim(expanded.header[j])))
                    continue;
                return "duplicate columns \"" + expanded.header[i] + "\"";
            }
        return "";
    }

    Config cfg_;
    std::shared_ptr<LlmClient> llm_;
    PromptLibrary prompts_;
    std::mt19937 rng_;
};

enum class BenchmarkMode { slqa, seqa };

struct BenchmarkReport {
    std::size_t tables_seen = 0;
    std::size_t tables_expanded = 0;
    std::size_t pairs_total = 0;
    std::map<std::string, std::size_t> pairs_per_strategy;
    std::size_t classified_total = 0;
    std::size_t classified_yes = 0;
    std::size_t needs_review = 0;
    std::size_t qa_lines_seen = 0;
    std::size_t qa_lines_skipped = 0;
    std::vector<std::string> table_errors;

    double executable_ratio() const {
        return classified_total ? static_cast<double>(classified_yes) /
                                      static_cast<double>(classified_total)
                                : 0.0;
    }
    double parse_failure_ratio() const {
        return qa_lines_seen ? static_cast<double>(qa_lines_skipped) /
                                   static_cast<double>(qa_lines_seen)
                             : 0.0;
    }
};

inline void to_json(nlohmann::json& j, const BenchmarkReport& r) {
    j = {{"tables_seen", r.tables_seen},
         {"tables_expanded", r.tables_expanded},
         {"pairs_total", r.pairs_total},
         {"pairs_per_strategy", r.pairs_per_strategy},
         {"classified_total", r.classified_total},
         {"classified_yes", r.classified_yes},
         {"executable_ratio", r.executable_ratio()},
         {"needs_review", r.needs_review},
         {"qa_lines_seen", r.qa_lines_seen},
         {"qa_lines_skipped", r.qa_lines_skipped},
         {"parse_failure_ratio", r.parse_failure_ratio()},
         {"table_errors", r.table_errors}};
}

inline nlohmann::json qa_pair_to_json(const QAPair& p) {
    nlohmann::json j = {{"table_id", p.table_id},
                        {"question", p.question},
                        {"answers", p.gold_answers},
                        {"strategy", std::string(to_string(p.strategy))},
                        {"needs_review", p.needs_review}};
    if (p.executable.has_value()) j["executable"] = *p.executable;
    else j["executable"] = nullptr;
    return j;
}

/// Builds a benchmark over a set of tables: expand (SEQA) or keep (SLQA),
/// generate QA pairs under all four strategies, classify executability,
/// emit JSONL records plus a statistics report. Per-table failures are
/// recorded and the run continues.
inline BenchmarkReport build_benchmark(DatasetBuilder& builder, const std::vector<Table>& tables,
                                       BenchmarkMode mode, const Config& cfg,
                                       const std::string& out_jsonl,
                                       const std::string& out_tables_dir = {}) {
    BenchmarkReport report;
    std::ofstream out(out_jsonl, std::ios::binary);
    if (!out) throw Error("cannot write benchmark file: " + out_jsonl);
    if (!out_tables_dir.empty()) std::filesystem::create_directories(out_tables_dir);
    auto budget = cfg.token_budget();

    for (const auto& original : tables) {
        ++report.tables_seen;
        Table used = original;
        try {
            if (mode == BenchmarkMode::seqa && !is_large(original, budget)) {
                used = builder.expand_table(original);
                ++report.tables_expanded;
            }
            if (!out_tables_dir.empty())
                save_table_jsonl(used, out_tables_dir + "/" + used.source_id + ".jsonl");
            for (auto strategy : {QaStrategy::cell, QaStrategy::row, QaStrategy::column,
                                  QaStrategy::subtable}) {
                QaParseStats stats;
                std::vector<QAPair> pairs;
                try {
                    pairs = builder.generate_qa(used, strategy, &stats);
                } catch (const Error& e) {
                    report.table_errors.push_back(used.source_id + ": " + e.what());
                    continue;
                }
                report.qa_lines_seen += stats.lines_seen;
                report.qa_lines_skipped += stats.lines_skipped;
                for (auto& pair : pairs) {
                    auto verdict = builder.classify_executability(pair.question, used);
                    if (verdict.executable.has_value()) {
                        ++report.classified_total;
                        pair.executable = verdict.executable;
                        if (*verdict.executable) ++report.classified_yes;
                    } else {
                        pair.needs_review = true;
                    }
                    if (pair.needs_review) ++report.needs_review;
                    ++report.pairs_total;
                    ++report.pairs_per_strategy[std::string(to_string(strategy))];
                    out << qa_pair_to_json(pair).dump() << "\n";
                }
            }
        } catch (const std::exception& e) {
            report.table_errors.push_back(original.source_id + ": " + e.what());
        }
    }
    return report;
}

}  // namespace tadre

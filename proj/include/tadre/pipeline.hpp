#pragma once

#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tadre/config.hpp"
#include "tadre/engine.hpp"
#include "tadre/lcs.hpp"
#include "tadre/llm.hpp"
#include "tadre/prompts.hpp"
#include "tadre/retrieval.hpp"
#include "tadre/sql.hpp"
#include "tadre/table.hpp"
#include "tadre/tokenizer.hpp"

namespace tadre {

/// One sub-table augmentation step from the post-decomposition refiner.
struct RetrievalAction {
    enum class Kind { retrieve_rows, retrieve_columns, retrieve_cells };

    Kind kind = Kind::retrieve_rows;
    std::optional<Condition> row_condition;                   // rows, by predicate
    std::vector<std::size_t> row_indices;                     // rows, explicit
    std::vector<std::string> column_names;                    // columns
    std::vector<std::pair<std::size_t, std::string>> cells;   // (row, column name)
};

inline std::string_view to_string(RetrievalAction::Kind k) {
    switch (k) {
        case RetrievalAction::Kind::retrieve_rows: return "retrieve_rows";
        case RetrievalAction::Kind::retrieve_columns: return "retrieve_columns";
        case RetrievalAction::Kind::retrieve_cells: return "retrieve_cells";
    }
    return "?";
}

namespace cotr_detail {

inline std::optional<SqlOperator> operator_from_string(std::string s) {
    s = str::to_lower(str::trim(s));
    if (s == "eq" || s == "=" || s == "==") return SqlOperator::eq;
    if (s == "neq" || s == "!=" || s == "<>") return SqlOperator::neq;
    if (s == "gt" || s == ">") return SqlOperator::gt;
    if (s == "lt" || s == "<") return SqlOperator::lt;
    if (s == "gte" || s == ">=") return SqlOperator::gte;
    if (s == "lte" || s == "<=") return SqlOperator::lte;
    if (s == "like") return SqlOperator::like;
    if (s == "not_like" || s == "not like") return SqlOperator::not_like;
    if (s == "in") return SqlOperator::in_list;
    if (s == "not_in" || s == "not in") return SqlOperator::not_in_list;
    if (s == "between") return SqlOperator::between;
    if (s == "is_null" || s == "is null") return SqlOperator::is_null;
    if (s == "is_not_null" || s == "is not null") return SqlOperator::is_not_null;
    return std::nullopt;
}

inline std::optional<RetrievalAction::Kind> kind_from_string(const std::string& s) {
    auto low = str::to_lower(s);
    if (low.find("retrieve_rows") != std::string::npos || low.find("retrieve rows") != std::string::npos)
        return RetrievalAction::Kind::retrieve_rows;
    if (low.find("retrieve_columns") != std::string::npos ||
        low.find("retrieve columns") != std::string::npos)
        return RetrievalAction::Kind::retrieve_columns;
    if (low.find("retrieve_cells") != std::string::npos ||
        low.find("retrieve cells") != std::string::npos)
        return RetrievalAction::Kind::retrieve_cells;
    return std::nullopt;
}

// Structured JSON argument block:
//   rows:    {"condition": {"column": c, "op": o, "operands": [...]}} or {"rows": [i, ...]}
//   columns: {"columns": [name, ...]}
//   cells:   {"cells": [[row, col_name], ...]}
inline bool fill_from_json(RetrievalAction& action, const nlohmann::json& j) {
    using Kind = RetrievalAction::Kind;
    try {
        if (action.kind == Kind::retrieve_columns) {
            if (!j.contains("columns")) return false;
            for (const auto& c : j.at("columns")) action.column_names.push_back(c.get<std::string>());
            return !action.column_names.empty();
        }
        if (action.kind == Kind::retrieve_cells) {
            if (!j.contains("cells")) return false;
            for (const auto& c : j.at("cells")) {
                if (!c.is_array() || c.size() != 2) return false;
                action.cells.emplace_back(c.at(0).get<std::size_t>(),
                                          c.at(1).get<std::string>());
            }
            return !action.cells.empty();
        }
        if (j.contains("rows")) {
            for (const auto& r : j.at("rows")) action.row_indices.push_back(r.get<std::size_t>());
            return !action.row_indices.empty();
        }
        if (j.contains("condition")) {
            const auto& c = j.at("condition");
            Condition cond;
            cond.column = c.at("column").get<std::string>();
            auto op = operator_from_string(c.at("op").get<std::string>());
            if (!op) return false;
            cond.op = *op;
            if (c.contains("operands"))
                for (const auto& o : c.at("operands"))
                    cond.operands.push_back(o.is_string() ? o.get<std::string>() : o.dump());
            if (!cond.arity_ok()) return false;
            action.row_condition = std::move(cond);
            return true;
        }
    } catch (const std::exception&) {
        return false;
    }
    return false;
}

inline std::string strip_outer_quotes(std::string s) {
    s = str::trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

// Pattern-matched single-expression code forms:
//   df[['a', 'b']]           -> retrieve_columns
//   df[df['col'] op literal] -> retrieve_rows with a condition
//   df.iloc[a:b]             -> retrieve_rows with explicit indices
inline bool fill_from_code(RetrievalAction& action, const std::string& raw_code) {
    std::string code = strip_outer_quotes(raw_code);
    static const std::regex cols_re(R"(df\[\[(.*)\]\])");
    static const std::regex cond_re(
        R"re(df\[\s*df\[['"](.+?)['"]\]\s*(==|!=|>=|<=|>|<)\s*(.+?)\s*\])re");
    static const std::regex iloc_re(R"(df\.iloc\[(\d+)\s*:\s*(\d+)\])");
    std::smatch m;
    if (std::regex_search(code, m, cols_re)) {
        action.kind = RetrievalAction::Kind::retrieve_columns;
        for (auto& item : str::split(m[1].str(), ','))
            if (auto name = strip_outer_quotes(item); !name.empty())
                action.column_names.push_back(name);
        return !action.column_names.empty();
    }
    if (std::regex_search(code, m, cond_re)) {
        action.kind = RetrievalAction::Kind::retrieve_rows;
        Condition cond;
        cond.column = m[1].str();
        auto op = operator_from_string(m[2].str());
        if (!op) return false;
        cond.op = *op;
        cond.operands.push_back(strip_outer_quotes(m[3].str()));
        action.row_condition = std::move(cond);
        return true;
    }
    if (std::regex_search(code, m, iloc_re)) {
        action.kind = RetrievalAction::Kind::retrieve_rows;
        std::size_t a = std::stoul(m[1].str()), b = std::stoul(m[2].str());
        for (std::size_t r = a; r < b; ++r) action.row_indices.push_back(r);
        return !action.row_indices.empty();
    }
    return false;
}

}  // namespace cotr_detail

/// Parsed post-decomposition refiner reply: either a direct answer, or one
/// or more retrieval actions (unparseable blocks are skipped with warnings).
struct RefinerReply {
    std::optional<std::string> answer;
    std::vector<RetrievalAction> actions;
    std::size_t requested = 0;  // action blocks seen, parseable or not
    std::vector<std::string> warnings;
};

inline RefinerReply parse_refiner_reply(const std::string& response) {
    RefinerReply out;
    auto lines = str::split(response, '\n');
    static const std::regex action_re(R"(^\s*action\s*[:\-]\s*(.*)$)", std::regex::icase);
    static const std::regex args_re(R"(^\s*args\s*[:\-]\s*(.*)$)", std::regex::icase);
    static const std::regex code_re(R"(^\s*code\s*[:\-]\s*(.*)$)", std::regex::icase);

    std::vector<std::pair<std::string, std::vector<std::string>>> blocks;  // kind line, payload
    for (const auto& line : lines) {
        std::smatch m;
        if (std::regex_match(line, m, action_re)) {
            blocks.emplace_back(m[1].str(), std::vector<std::string>{});
        } else if (!blocks.empty()) {
            blocks.back().second.push_back(line);
        }
    }
    if (blocks.empty()) {
        auto fa = extract_final_answer(response);
        out.answer = fa.text;
        return out;
    }
    out.requested = blocks.size();
    for (const auto& [kind_line, payload] : blocks) {
        auto kind = cotr_detail::kind_from_string(kind_line);
        if (!kind) {
            out.warnings.push_back("unrecognized action: " + str::trim(kind_line));
            continue;
        }
        RetrievalAction action;
        action.kind = *kind;
        bool filled = false;
        for (const auto& line : payload) {
            std::smatch m;
            if (std::regex_match(line, m, args_re)) {
                try {
                    filled = cotr_detail::fill_from_json(action, nlohmann::json::parse(m[1].str()));
                } catch (const std::exception&) {
                    filled = false;
                }
            } else if (std::regex_match(line, m, code_re)) {
                filled = cotr_detail::fill_from_code(action, m[1].str());
            } else if (!filled && !str::trim(line).empty()) {
                // bare code line under the action header
                filled = cotr_detail::fill_from_code(action, str::trim(line));
            }
            if (filled) break;
        }
        if (!filled) {
            out.warnings.push_back("action arguments unparseable: " + str::trim(kind_line));
            continue;
        }
        out.actions.push_back(std::move(action));
    }
    return out;
}

struct ExecuteResult {
    SubTable subtable;
    bool grew = false;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;
};

/// Executes validated retrieval actions: the sub-table is augmented by
/// union-by-provenance (existing rows/columns keep their order, additions
/// follow parent order, duplicates collapse). Invalid references skip the
/// action with a warning; nothing is ever removed.
inline ExecuteResult execute_actions(const std::vector<RetrievalAction>& actions,
                                     const Table& parent, const SubTable& sub) {
    ExecuteResult out;
    std::vector<std::size_t> rows = sub.parent_rows;
    std::vector<std::size_t> cols = sub.parent_columns;
    auto add_row = [&](std::size_t r) {
        if (std::find(rows.begin(), rows.end(), r) == rows.end()) rows.push_back(r);
    };
    auto add_col = [&](std::size_t c) {
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    };

    for (const auto& action : actions) {
        switch (action.kind) {
            case RetrievalAction::Kind::retrieve_columns: {
                std::vector<std::size_t> wanted;
                bool ok = true;
                for (const auto& name : action.column_names) {
                    auto idx = parent.column_index(name);
                    if (!idx) {
                        // plans hallucinate; try the LCS correction before giving up
                        auto corrected = correct_columns({name}, parent.header);
                        if (!corrected.entries.empty() && corrected.entries[0].matched)
                            idx = parent.column_index(*corrected.entries[0].matched);
                    }
                    if (!idx) {
                        out.warnings.push_back("retrieve_columns: unknown column \"" + name +
                                               "\"; action skipped");
                        ok = false;
                        break;
                    }
                    wanted.push_back(*idx);
                }
                if (!ok) {
                    ++out.skipped;
                    break;
                }
                std::sort(wanted.begin(), wanted.end());
                for (auto c : wanted) add_col(c);
                break;
            }
            case RetrievalAction::Kind::retrieve_rows: {
                if (!action.row_indices.empty()) {
                    bool ok = true;
                    for (auto r : action.row_indices)
                        if (r >= parent.num_rows()) {
                            out.warnings.push_back("retrieve_rows: index " + std::to_string(r) +
                                                   " out of bounds; action skipped");
                            ok = false;
                            break;
                        }
                    if (!ok) {
                        ++out.skipped;
                        break;
                    }
                    for (auto r : action.row_indices) add_row(r);
                    break;
                }
                if (!action.row_condition) {
                    ++out.skipped;
                    break;
                }
                auto cond = *action.row_condition;
                if (!parent.column_index(cond.column)) {
                    auto corrected = correct_columns({cond.column}, parent.header);
                    if (!corrected.entries.empty() && corrected.entries[0].matched)
                        cond.column = *corrected.entries[0].matched;
                }
                auto full = full_subtable(parent);
                auto res = apply_condition(full, cond);
                if (res.failure) {
                    out.warnings.push_back("retrieve_rows: condition on \"" + cond.column +
                                           "\" failed (" + std::string(to_string(*res.failure)) +
                                           "); action skipped");
                    ++out.skipped;
                    break;
                }
                bool hit = false;
                for (std::size_t r = 0; r < res.mask.size(); ++r)
                    if (res.mask[r]) {
                        add_row(r);
                        hit = true;
                    }
                if (!hit)
                    out.warnings.push_back("retrieve_rows: condition matched no rows");
                break;
            }
            case RetrievalAction::Kind::retrieve_cells: {
                bool ok = true;
                std::vector<std::pair<std::size_t, std::size_t>> resolved;
                for (const auto& [r, col_name] : action.cells) {
                    auto idx = parent.column_index(col_name);
                    if (!idx) {
                        auto corrected = correct_columns({col_name}, parent.header);
                        if (!corrected.entries.empty() && corrected.entries[0].matched)
                            idx = parent.column_index(*corrected.entries[0].matched);
                    }
                    if (r >= parent.num_rows() || !idx) {
                        out.warnings.push_back("retrieve_cells: cell (" + std::to_string(r) +
                                               ", \"" + col_name + "\") invalid; action skipped");
                        ok = false;
                        break;
                    }
                    resolved.emplace_back(r, *idx);
                }
                if (!ok) {
                    ++out.skipped;
                    break;
                }
                // minimal rectangular extension covering the cells
                for (const auto& [r, c] : resolved) {
                    add_row(r);
                    add_col(c);
                }
                break;
            }
        }
    }

    out.grew = rows.size() > sub.parent_rows.size() || cols.size() > sub.parent_columns.size();
    // additions follow parent order; the pre-existing prefix keeps its order
    std::sort(rows.begin() + static_cast<std::ptrdiff_t>(sub.parent_rows.size()), rows.end());
    std::sort(cols.begin() + static_cast<std::ptrdiff_t>(sub.parent_columns.size()), cols.end());
    out.subtable = make_subtable(parent, rows, cols);
    return out;
}

struct SubTableStats {
    std::size_t rows = 0;
    std::size_t columns = 0;
    long tokens = 0;
};

/// Full record of one question's journey through the pipeline.
struct PipelineTrace {
    std::string question;
    std::string raw_sql;
    bool verified = false;
    std::optional<std::string> refined_sql;
    std::optional<DecompositionTriple> triple;
    std::string parse_failure;
    std::vector<ColumnCorrection> corrections;
    std::vector<Condition> dropped_conditions;
    SubTableStats subtable0_stats;
    std::string refiner_verdict;  // "answered" or "augmented"
    std::vector<RetrievalAction> actions;
    std::size_t actions_requested = 0;
    std::size_t actions_skipped = 0;
    bool augmentation_grew = false;
    SubTableStats final_subtable_stats;
    std::string answer;
    bool answer_nonconforming = false;
    bool fallback = false;  // parse failure, empty projection, or row fail-open
    std::vector<std::size_t> final_parent_rows;
    std::vector<std::size_t> final_parent_columns;
    long table_tokens_full = 0;
    long table_tokens_sub = 0;
    std::vector<LlmExchange> exchanges;
    std::vector<std::string> warnings;

    long llm_input_tokens_total() const {
        long total = 0;
        for (const auto& ex : exchanges) total += ex.prompt_tokens;
        return total;
    }
};

struct AnswerResult {
    std::string answer;
    PipelineTrace trace;
    bool ok = true;
    std::string error;
};

/// Orchestrates one question end to end: plan, pre-decomposition verify and
/// refine, parse and LCS-correct, filter, post-decomposition refine with
/// retrieval actions, answer.
class Pipeline {
  public:
    Pipeline(Config cfg, std::shared_ptr<LlmClient> llm,
             std::shared_ptr<ExemplarStore> store = nullptr,
             std::shared_ptr<EmbeddingProvider> embedder = nullptr)
        : cfg_(std::move(cfg)),
          llm_(std::move(llm)),
          store_(std::move(store)),
          embedder_(std::move(embedder)),
          prompts_(cfg_.prompts_dir) {}

    const Config& config() const { return cfg_; }

    std::vector<Exemplar> select_exemplars(const std::string& question,
                                           std::vector<std::string>* warnings) {
        std::vector<Exemplar> out;
        if (!store_ || store_->size() == 0 || cfg_.exemplar_top_k <= 0) return out;
        if (!store_->has_embeddings() || !embedder_) {
            if (warnings)
                warnings->push_back("exemplar store has no embeddings; planning zero-shot");
            return out;
        }
        auto q_vec = embedder_->embed(question);
        auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.exemplar_top_k),
                                       store_->size());
        for (auto& scored : top_k(q_vec, *store_, k)) out.push_back(std::move(scored.exemplar));
        return out;
    }

    SqlPlan generate_sql(const std::string& question, const Table& t, PipelineTrace& trace) {
        auto exemplars = select_exemplars(question, &trace.warnings);
        auto prompt =
            build_planner_prompt(exemplars, question, str::join(t.header, ", "), prompts_);
        auto ex = llm_->complete(prompt, "planner");
        trace.exchanges.push_back(ex);
        SqlPlan plan;
        plan.raw_sql = strip_sql_formatting(ex.response);
        plan.origin = SqlPlan::Origin::planner;
        trace.raw_sql = plan.raw_sql;
        return plan;
    }

    bool verify_sql(const SqlPlan& plan, const std::string& question, const Table& t,
                    PipelineTrace& trace) {
        auto preview = preview_subtable(plan, t);
        auto prompt = render(prompts_.get(TemplateId::sql_verify),
                             {{"Question", question},
                              {"Columns", str::join(preview.header, ", ")},
                              {"TAB_CONTENT", rows_only(preview)},
                              {"ORG_COLS", str::join(t.header, ", ")}});
        auto ex = llm_->complete(prompt, "sql_verify");
        trace.exchanges.push_back(ex);
        auto fa = extract_final_answer(ex.response);
        if (!fa.conforming) {
            trace.warnings.push_back("verification verdict unparseable; refining");
            return false;
        }
        return str::istarts_with(fa.text, "true");
    }

    void refine_sql(SqlPlan& plan, const std::string& question, const Table& t,
                    PipelineTrace& trace) {
        auto prompt = render(prompts_.get(TemplateId::sql_refine),
                             {{"SQL", plan.effective_sql()},
                              {"Header", str::join(t.header, ", ")},
                              {"Question", question}});
        auto ex = llm_->complete(prompt, "sql_refine");
        trace.exchanges.push_back(ex);
        auto refined = strip_sql_formatting(ex.response);
        if (refined.empty()) {
            trace.warnings.push_back("empty refinement; keeping the previous SQL");
            return;
        }
        plan.refined_sql = refined;
        plan.origin = SqlPlan::Origin::refiner;
        trace.refined_sql = refined;
    }

    /// Parse + correct + filter. A parse failure falls open to the full
    /// table, never aborts.
    FilterOutcome decompose(const SqlPlan& plan, const Table& t, PipelineTrace& trace) {
        auto parsed = parse_sql(plan);
        if (!parsed.ok()) {
            trace.parse_failure = parsed.failure;
            trace.fallback = true;
            trace.warnings.push_back("plan parse failed (" + parsed.failure +
                                     "); using the full table");
            FilterOutcome out;
            out.subtable = full_subtable(t);
            out.fallback_full_rows = true;
            return out;
        }
        trace.triple = parsed.triple;
        auto corrected = correct_plan(*parsed.triple, t.header);
        corrected.disjunctive = cfg_.plan_disjunctive;
        trace.corrections = corrected.columns.entries;
        trace.dropped_conditions = corrected.dropped_conditions;
        EngineOptions opt;
        opt.strict_numeric = cfg_.engine_strict_numeric;
        auto out = apply_triple(t, corrected, opt);
        for (const auto& w : out.warnings) trace.warnings.push_back(w);
        if (out.fallback_full_rows || out.fallback_all_columns) trace.fallback = true;
        return out;
    }

    struct RefineSubtableResult {
        std::optional<std::string> answer;
        SubTable subtable;
    };

    /// CoTR: ask, execute retrieval actions, re-ask, until a direct answer
    /// or the round budget is exhausted.
    RefineSubtableResult refine_subtable(const std::string& question, const Table& parent,
                                         SubTable sub, PipelineTrace& trace) {
        int rounds = 0;
        bool augmented = false;
        while (true) {
            auto prompt = render(prompts_.get(TemplateId::subtable_refine),
                                 {{"Question", question},
                                  {"Columns", str::join(sub.header, ", ")},
                                  {"TAB_CONTENT", rows_only(sub)},
                                  {"ORG_COLS", str::join(parent.header, ", ")}});
            auto ex = llm_->complete(prompt, "subtable_refine");
            trace.exchanges.push_back(ex);
            auto reply = parse_refiner_reply(ex.response);
            trace.actions_requested += reply.requested;
            for (const auto& w : reply.warnings) trace.warnings.push_back(w);
            if (reply.answer) {
                trace.refiner_verdict = augmented ? "augmented" : "answered";
                return {reply.answer, std::move(sub)};
            }
            if (reply.actions.empty()) {
                trace.actions_skipped += reply.requested;
                trace.warnings.push_back("no executable action; moving to answer generation");
                break;
            }
            auto exec = execute_actions(reply.actions, parent, sub);
            for (const auto& w : exec.warnings) trace.warnings.push_back(w);
            trace.actions_skipped += exec.skipped;
            for (auto& a : reply.actions) trace.actions.push_back(std::move(a));
            trace.augmentation_grew = trace.augmentation_grew || exec.grew;
            sub = std::move(exec.subtable);
            augmented = true;
            ++rounds;
            if (rounds >= cfg_.max_cotr_rounds) break;
        }
        trace.refiner_verdict = "augmented";
        return {std::nullopt, std::move(sub)};
    }

    std::string generate_answer(const std::string& question, const SubTable& sub,
                                PipelineTrace& trace) {
        if (sub.num_columns() == 0) throw Error("degenerate sub-table: no columns");
        auto prompt = render(prompts_.get(TemplateId::answer_gen),
                             {{"Columns", str::join(sub.header, ", ")},
                              {"TAB_CONTENT", rows_only(sub)},
                              {"Question", question}});
        auto ex = llm_->complete(prompt, "answer_gen");
        trace.exchanges.push_back(ex);
        auto fa = extract_final_answer(ex.response);
        if (!fa.conforming) {
            trace.answer_nonconforming = true;
            trace.warnings.push_back("answer missing the Final Answer marker");
        }
        return fa.text;
    }

    AnswerResult answer_question(const Table& t, const std::string& question) {
        AnswerResult result;
        auto& trace = result.trace;
        trace.question = question;
        trace.table_tokens_full = count_tokens(linearize(t), budget());
        try {
            auto plan = generate_sql(question, t, trace);
            trace.verified = verify_sql(plan, question, t, trace);
            int refinements = 0;
            bool verified = trace.verified;
            while (!verified && refinements < cfg_.max_sql_refinements) {
                refine_sql(plan, question, t, trace);
                ++refinements;
                if (refinements < cfg_.max_sql_refinements)
                    verified = verify_sql(plan, question, t, trace);
            }
            auto filtered = decompose(plan, t, trace);
            trace.subtable0_stats = stats_of(filtered.subtable);
            auto refined = refine_subtable(question, t, std::move(filtered.subtable), trace);
            std::string answer;
            if (refined.answer) {
                answer = *refined.answer;
            } else {
                answer = generate_answer(question, refined.subtable, trace);
            }
            finalize(trace, refined.subtable, answer);
            result.answer = answer;
        } catch (const std::exception& e) {
            result.ok = false;
            result.error = e.what();
            trace.warnings.push_back(std::string("pipeline aborted: ") + e.what());
        }
        return result;
    }

    /// The end-to-end baseline: the answer prompt over the full table, no
    /// decomposition.
    AnswerResult end_to_end(const Table& t, const std::string& question) {
        AnswerResult result;
        auto& trace = result.trace;
        trace.question = question;
        trace.table_tokens_full = count_tokens(linearize(t), budget());
        try {
            auto sub = full_subtable(t);
            auto answer = generate_answer(question, sub, trace);
            finalize(trace, sub, answer);
            result.answer = answer;
        } catch (const std::exception& e) {
            result.ok = false;
            result.error = e.what();
        }
        return result;
    }

    /// Stops after the initial sub-table: plan, verify/refine, decompose.
    AnswerResult decompose_only(const Table& t, const std::string& question) {
        AnswerResult result;
        auto& trace = result.trace;
        trace.question = question;
        trace.table_tokens_full = count_tokens(linearize(t), budget());
        try {
            auto plan = generate_sql(question, t, trace);
            trace.verified = verify_sql(plan, question, t, trace);
            int refinements = 0;
            bool verified = trace.verified;
            while (!verified && refinements < cfg_.max_sql_refinements) {
                refine_sql(plan, question, t, trace);
                ++refinements;
                if (refinements < cfg_.max_sql_refinements)
                    verified = verify_sql(plan, question, t, trace);
            }
            auto filtered = decompose(plan, t, trace);
            trace.subtable0_stats = stats_of(filtered.subtable);
            finalize(trace, filtered.subtable, "");
        } catch (const std::exception& e) {
            result.ok = false;
            result.error = e.what();
        }
        return result;
    }

    /// Offline path for the decompose CLI command: no LLM involved.
    FilterOutcome decompose_offline(const Table& t, const std::string& sql,
                                    PipelineTrace& trace) {
        SqlPlan plan;
        plan.raw_sql = strip_sql_formatting(sql);
        trace.raw_sql = plan.raw_sql;
        trace.table_tokens_full = count_tokens(linearize(t), budget());
        auto out = decompose(plan, t, trace);
        trace.subtable0_stats = stats_of(out.subtable);
        finalize(trace, out.subtable, "");
        return out;
    }

    TokenBudget budget() const { return cfg_.token_budget(); }

  private:
    SubTable preview_subtable(const SqlPlan& plan, const Table& t) {
        auto parsed = parse_sql(plan);
        if (!parsed.ok()) return full_subtable(t);
        auto corrected = correct_plan(*parsed.triple, t.header);
        EngineOptions opt;
        opt.strict_numeric = cfg_.engine_strict_numeric;
        return apply_triple(t, corrected, opt).subtable;
    }

    static std::string rows_only(const SubTable& sub) {
        std::string out;
        for (std::size_t r = 0; r < sub.rows.size(); ++r) {
            if (r) out += '\n';
            out += linearize_row(sub.rows[r]);
        }
        return out;
    }

    SubTableStats stats_of(const SubTable& sub) {
        return {sub.num_rows(), sub.num_columns(), count_tokens(linearize(sub), budget())};
    }

    void finalize(PipelineTrace& trace, const SubTable& sub, const std::string& answer) {
        trace.final_subtable_stats = stats_of(sub);
        trace.final_parent_rows = sub.parent_rows;
        trace.final_parent_columns = sub.parent_columns;
        trace.table_tokens_sub = trace.final_subtable_stats.tokens;
        trace.answer = answer;
    }

    Config cfg_;
    std::shared_ptr<LlmClient> llm_;
    std::shared_ptr<ExemplarStore> store_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    PromptLibrary prompts_;
};

// --- JSON serialization for traces and diagnostics ---------------------------

inline void to_json(nlohmann::json& j, const Condition& c) {
    j = {{"column", c.column}, {"op", std::string(to_string(c.op))}, {"operands", c.operands}};
}

inline void to_json(nlohmann::json& j, const ColumnCorrection& c) {
    j = {{"extracted", c.extracted}, {"lcs_ratio", c.ratio}};
    if (c.matched) j["matched"] = *c.matched;
}

inline void to_json(nlohmann::json& j, const DecompositionTriple& t) {
    j = {{"columns", t.columns}, {"conditions", t.conditions}, {"values", t.values}};
    if (!t.group_by.empty()) j["group_by"] = t.group_by;
    if (!t.having.empty()) j["having"] = t.having;
    if (t.limit) j["limit"] = {{"offset", t.limit->offset}, {"count", t.limit->count}};
    if (!t.order_by.empty()) {
        j["order_by"] = nlohmann::json::array();
        for (const auto& s : t.order_by)
            j["order_by"].push_back({{"column", s.column}, {"ascending", s.ascending}});
    }
    if (!t.aggregates.empty()) {
        j["aggregates"] = nlohmann::json::array();
        for (const auto& a : t.aggregates)
            j["aggregates"].push_back(
                {{"fn", std::string(to_string(a.fn))}, {"column", a.column}});
    }
}

inline void to_json(nlohmann::json& j, const RetrievalAction& a) {
    j = {{"kind", std::string(to_string(a.kind))}};
    if (a.row_condition) j["condition"] = *a.row_condition;
    if (!a.row_indices.empty()) j["rows"] = a.row_indices;
    if (!a.column_names.empty()) j["columns"] = a.column_names;
    if (!a.cells.empty()) {
        j["cells"] = nlohmann::json::array();
        for (const auto& [r, c] : a.cells) j["cells"].push_back({r, c});
    }
}

inline void to_json(nlohmann::json& j, const SubTableStats& s) {
    j = {{"rows", s.rows}, {"columns", s.columns}, {"tokens", s.tokens}};
}

inline void to_json(nlohmann::json& j, const LlmExchange& ex) {
    j = {{"template_id", ex.template_id},
         {"prompt_tokens", ex.prompt_tokens},
         {"completion_tokens", ex.completion_tokens},
         {"latency_ms", ex.latency_ms},
         {"attempt", ex.attempt}};
}

inline void to_json(nlohmann::json& j, const PipelineTrace& t) {
    j = {{"question", t.question},
         {"raw_sql", t.raw_sql},
         {"verified", t.verified},
         {"subtable0_stats", t.subtable0_stats},
         {"refiner_verdict", t.refiner_verdict},
         {"actions", t.actions},
         {"actions_requested", t.actions_requested},
         {"actions_skipped", t.actions_skipped},
         {"final_subtable_stats", t.final_subtable_stats},
         {"answer", t.answer},
         {"fallback", t.fallback},
         {"table_tokens_full", t.table_tokens_full},
         {"table_tokens_sub", t.table_tokens_sub},
         {"llm_input_tokens_total", t.llm_input_tokens_total()},
         {"exchanges", t.exchanges},
         {"warnings", t.warnings}};
    if (t.refined_sql) j["refined_sql"] = *t.refined_sql;
    if (t.triple) j["triple"] = *t.triple;
    if (!t.parse_failure.empty()) j["parse_failure"] = t.parse_failure;
    j["corrections"] = t.corrections;
    j["dropped_conditions"] = t.dropped_conditions;
    if (t.answer_nonconforming) j["answer_nonconforming"] = true;
}

}  // namespace tadre

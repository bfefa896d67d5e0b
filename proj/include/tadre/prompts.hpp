#pragma once

#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "tadre/retrieval.hpp"
#include "tadre/strings.hpp"
#include "tadre/table.hpp"

namespace tadre {

/// Template ids; one per LLM-facing prompt in the pipeline and the dataset
/// builder.
enum class TemplateId {
    planner,
    sql_verify,
    sql_refine,
    subtable_refine,
    answer_gen,
    qa_cell,
    qa_row,
    qa_column,
    qa_subtable,
    table_expand,
    executability,
};

inline std::string_view to_string(TemplateId id) {
    switch (id) {
        case TemplateId::planner: return "planner";
        case TemplateId::sql_verify: return "sql_verify";
        case TemplateId::sql_refine: return "sql_refine";
        case TemplateId::subtable_refine: return "subtable_refine";
        case TemplateId::answer_gen: return "answer_gen";
        case TemplateId::qa_cell: return "qa_cell";
        case TemplateId::qa_row: return "qa_row";
        case TemplateId::qa_column: return "qa_column";
        case TemplateId::qa_subtable: return "qa_subtable";
        case TemplateId::table_expand: return "table_expand";
        case TemplateId::executability: return "executability";
    }
    return "?";
}

struct PromptTemplate {
    TemplateId id;
    std::string body;  // contains [Name] placeholders
};

namespace prompt_text {

// One "Answer the following:" block per retrieved exemplar.
inline constexpr std::string_view planner_prefix =
    "/* Some example questions and corresponding SQL queries\n"
    "are provided based on similar problems: */\n";

inline constexpr std::string_view planner_block =
    "Answer the following: [P]\n"
    "[S]\n";

inline constexpr std::string_view planner_suffix =
    "The target questions: [P]\n"
    "Table columns: [Columns]\n"
    "The corresponding SQL:\n"
    "Note:\n"
    "- Do not add any explanation after the SQL.";

inline constexpr std::string_view sql_verify =
    "Please determine whether the sub-table obtained using raw SQL is sufficient to answer the "
    "given question.\n"
    "The question is: [Question]\n"
    "Raw Sub-table Columns: [Columns]\n"
    "Raw Sub-table Content: [TAB_CONTENT]\n"
    "Notes:\n"
    "- Complete table contains the following columns: [ORG_COLS]\n"
    "- Give me the answer in format \"Final Answer: True / False\" form (should be either True "
    "or False, without any explanation)";

inline constexpr std::string_view sql_refine =
    "Please refine the given SQL according to the question and the table header.\n"
    "The SQL is: [SQL]\n"
    "The table header: [Header]\n"
    "The question is: [Question]\n"
    "Notes:\n"
    "- The current SQL query can not solve the problem well.\n"
    "- Please optimize it and return the optimized SQL directly.";

inline constexpr std::string_view subtable_refine =
    "Please answer the question using the given table.\n"
    "The question is: [Question]\n"
    "Table Columns: [Columns]\n"
    "Table Content: [TAB_CONTENT]\n"
    "CASE 1: If you can answer the question correctly, directly return the answer (without any "
    "explanation).\n"
    "CASE 2: If information is missing, choose the necessary action with Python code for the "
    "DataFrame.\n"
    "Complete DF column names: [ORG_COLS]\n"
    "Action list:\n"
    "1. Retrieve_rows (you need additional rows information to answer the question)\n"
    "2. Retrieve_columns (you need additional columns information to answer the question)\n"
    "3. Retrieve_cells (you need additional cells information to answer the question)\n"
    "In this case, directly return the action names (can be one action or more) with their "
    "Python code, for example:\n"
    "Action: Retrieve_rows\n"
    "Code: \"Python_code\"\n"
    "Notes:\n"
    "- You should either return the answer or return the action with its Python code (no other "
    "cases).\n"
    "- Prefer an \"Args:\" line holding one JSON object per action over Python code, for "
    "example:\n"
    "Action: Retrieve_columns\n"
    "Args: {\"columns\": [\"column_name\"]}";

inline constexpr std::string_view answer_gen =
    "Please answer the question according to the given table.\n"
    "The header is: [Columns]\n"
    "The table content: [TAB_CONTENT]\n"
    "The question is: [Question]\n"
    "\n"
    "Notes:\n"
    "- Give me the answer in the format \"Final Answer: AnswerName1, AnswerName2...\" form "
    "(should be a number or entity names, as short as possible, without any explanation).";

inline constexpr std::string_view qa_cell =
    "Use the given table as evidence.\n"
    "Table Header: [HEADER]\n"
    "Table Content: [TAB]\n"
    "Task: Randomly select one cell in the table as the answer and generate a question that can "
    "produce the answer.\n"
    "Return both the question and the answer. Repeat this process 10 times and return to me 10 "
    "QA pairs.\n"
    "Notes:\n"
    "- Directly return questions in format \"Q: question_content; A: answer_content\" (without "
    "any explanation).\n"
    "- Try to make the question diverse.\n"
    "- Keep answers as concise as possible and only contain entities.";

inline constexpr std::string_view qa_row =
    "Use the given table as evidence.\n"
    "Table Header: [HEADER]\n"
    "Table Content: [TAB]\n"
    "Selected Row: [ROW]\n"
    "Task: Please use the selected row above to generate one question using the information "
    "within this row. Return the question and its answer. Repeat this process 4 times.\n"
    "Notes:\n"
    "- Directly return questions in format \"Q: question_content; A: answer_content\" (without "
    "any explanation).\n"
    "- Try to make the question diverse.\n"
    "- Do not include \"selected row/given data\" in questions, as the selected columns are not "
    "known to the person answering the question.\n"
    "- Keep answers as concise as possible and only contain entities.";

inline constexpr std::string_view qa_column =
    "Use the given table as evidence.\n"
    "Table Header: [HEADER]\n"
    "Table Content: [TAB]\n"
    "Selected Column: [COL]\n"
    "Task: Please use the selected column above to generate one question using the information "
    "within this column. Return the question and its answer. Repeat this process 4 times.\n"
    "Notes:\n"
    "- Directly return questions in format \"Q: question_content; A: answer_content\" (without "
    "any explanation).\n"
    "- Try to make the question diverse.\n"
    "- Do not include \"selected column/given data\" in questions, as the selected columns are "
    "not known to the person answering the question.\n"
    "- Keep answers as concise as possible and only contain entities.";

inline constexpr std::string_view qa_subtable =
    "Use the given table as evidence.\n"
    "Table Header: [HEADER]\n"
    "Table Content: [TAB]\n"
    "Sub-table: [SUB]\n"
    "Task: Please use the sub-table above to generate one question using the information within "
    "this sub-table. Return the question and its answer. Repeat this process 4 times.\n"
    "Notes:\n"
    "- Directly return questions in format \"Q: question_content; A: answer_content\" (without "
    "any explanation).\n"
    "- Try to make the question diverse.\n"
    "- Do not include \"sub-table/given data\" in questions, as the sub-table is not known to "
    "the person answering the question.\n"
    "- Keep answers as concise as possible and only contain entities.";

inline constexpr std::string_view table_expand =
    "Please use the synthesized data to expand the existing table and increase its rows and "
    "columns.\n"
    "Table Header: [HEADER]\n"
    "Table Content: [TAB]\n"
    "\n"
    "Notes:\n"
    "- Directly returns the new table.\n"
    "- Make sure there are no duplicate rows and columns.";

inline constexpr std::string_view executability =
    "Task: Given a natural language question q and a table column name C, determine whether q "
    "is a SQL-executable question under the following semantics:\n"
    "\n"
    "A question q is considered SQL-executable if there exists at least one SQL query s that:\n"
    "- Maps from q through a valid equal semantic mapping mechanism (i.e., s in M(q)), and\n"
    "- Satisfies all the following conditions:\n"
    "\n"
    "1. Column Validity: All column references in s refer to column names in C.\n"
    "2. Semantic Interpretability: Every operation in s — including value-level operations "
    "(e.g., comparisons, arithmetic, string functions), aggregate and grouping operations "
    "(e.g., SUM, GROUP BY), and logical/set-level operations (e.g., AND, IN, EXISTS, UNION) — "
    "can be semantically interpreted and safely applied to the actual values in the referenced "
    "columns.\n"
    "3. Algebraic Mapping: s can be faithfully translated into a well-defined relational "
    "algebra expression whose evaluation on the table is valid and returns a relation.\n"
    "4. Runtime Error-Free: The execution of s on the given table would not lead to runtime "
    "errors (e.g., division by zero, null dereferencing, invalid function usage, or other "
    "data-dependent failures).\n"
    "\n"
    "Few-shot Examples:\n"
    "\n"
    "#### Condition 1: Violates Column Validity\n"
    "\n"
    "Question:\n"
    "What is the average employee rating by department?\n"
    "\n"
    "Table Header:\n"
    "[\"Department\", \"Employee Name\", \"Performance Score\", \"Join Date\"]\n"
    "\n"
    "Sample Row Values:\n"
    "[[\"HR\", \"Alice\", 4.5, \"2018-01-01\"], [\"Engineering\", \"Bob\", 3.8, \"2020-06-01\"]]\n"
    "\n"
    "Explanation:\n"
    "Although the question mentions \"department\" and \"employee rating\", the column "
    "\"employee rating\" does not exist. There is no column with a matching name or "
    "sufficiently clear mapping. \"Performance Score\" might be intended, but the mapping is "
    "ambiguous without schema-level aliases.\n"
    "\n"
    "Condition Violated: Column Validity\n"
    "Final Answer: No\n"
    "\n"
    "#### Condition 2: Violates Semantic Interpretability\n"
    "\n"
    "Question:\n"
    "What is the median value among departments?\n"
    "\n"
    "Table Header:\n"
    "[\"Employee ID\", \"Name\", \"Department\", \"Salary\"]\n"
    "\n"
    "Sample Row Values:\n"
    "[[\"E001\", \"Alice\", \"HR\", 70000], [\"E002\", \"Bob\", \"Engineering\", 75000]]\n"
    "\n"
    "Explanation:\n"
    "\"Median\" is a statistical operation valid only on numeric or ordered data. \"Department\" "
    "is a categorical string column, so computing a median on it is semantically meaningless, "
    "even if syntactically allowed.\n"
    "\n"
    "Condition Violated: Semantic Interpretability\n"
    "Final Answer: No\n"
    "\n"
    "#### Condition 3: Violates Algebraic Mapping\n"
    "\n"
    "Question:\n"
    "Which students performed better than average in subjects they are strongest at?\n"
    "\n"
    "Table Header:\n"
    "[\"Student\", \"Math Score\", \"English Score\", \"Science Score\"]\n"
    "\n"
    "Sample Row Values:\n"
    "[[\"Alice\", 88, 76, 91], [\"Bob\", 90, 85, 80], [\"Charlie\", 72, 95, 70]]\n"
    "\n"
    "Explanation:\n"
    "The question requires identifying the strongest subject (highest score) per student, then "
    "comparing it against that subject's average across all students. This involves row-wise "
    "dynamic column selection and per-row conditional aggregation, which cannot be represented "
    "in standard relational algebra or SQL without structural transformations like unpivoting. "
    "Therefore, a valid relational algebra mapping is not possible.\n"
    "\n"
    "Condition Violated: Algebraic Mapping\n"
    "Final Answer: No\n"
    "\n"
    "#### Condition 4: Violates Runtime Error-Free\n"
    "\n"
    "Question:\n"
    "What is the highest average revenue per unit cost?\n"
    "\n"
    "Table Header:\n"
    "[\"Product\", \"Revenue\", \"Unit Cost\"]\n"
    "\n"
    "Sample Row Values:\n"
    "[[\"P1\", 10000, 0], [\"P2\", 20000, 100]]\n"
    "\n"
    "Explanation:\n"
    "While the SQL query SELECT MAX(Revenue / Unit Cost) is syntactically and semantically "
    "valid, it can result in a division by zero runtime error when Unit Cost is 0, which is "
    "highly probable in the given data. Thus, it fails the Runtime Error-Free condition.\n"
    "\n"
    "Condition Violated: Runtime Error-Free\n"
    "Final Answer: No\n"
    "\n"
    "Input:\n"
    "Question: [Q]\n"
    "Table Header (Column Names Only): [C]\n"
    "Sample Row Values (Not the entire table): [V]\n"
    "\n"
    "Output:\n"
    "Is the question SQL-executable with respect to the given table? (Yes or No)\n"
    "If Yes, explain briefly what a possible executable SQL query might look like.\n"
    "If No, specify which condition(s) in the definition are violated.\n"
    "\n"
    "Notes:\n"
    "- For condition: Runtime Error-Free, don't assume that this condition has been violated "
    "unless the probability of s execution error is very high.\n"
    "- If No, firstly specify which condition(s) in the definition are violated, and then give "
    "answers. If Yes, directly give answers.\n"
    "- Then respond in format: Final Answer: Yes/No";

}  // namespace prompt_text

/// Repository of prompt bodies. Defaults are compiled in; a directory of
/// <template_id>.txt files can override any of them.
class PromptLibrary {
  public:
    PromptLibrary() = default;

    explicit PromptLibrary(const std::string& override_dir) {
        if (override_dir.empty()) return;
        for (auto id : {TemplateId::planner, TemplateId::sql_verify, TemplateId::sql_refine,
                        TemplateId::subtable_refine, TemplateId::answer_gen, TemplateId::qa_cell,
                        TemplateId::qa_row, TemplateId::qa_column, TemplateId::qa_subtable,
                        TemplateId::table_expand, TemplateId::executability}) {
            std::ifstream in(override_dir + "/" + std::string(to_string(id)) + ".txt",
                             std::ios::binary);
            if (!in) continue;
            std::ostringstream ss;
            ss << in.rdbuf();
            overrides_[id] = ss.str();
        }
    }

    PromptTemplate get(TemplateId id) const {
        auto it = overrides_.find(id);
        if (it != overrides_.end()) return {id, it->second};
        return {id, std::string(default_body(id))};
    }

    static std::string_view default_body(TemplateId id) {
        using namespace prompt_text;
        switch (id) {
            case TemplateId::planner: return planner_suffix;  // blocks are assembled separately
            case TemplateId::sql_verify: return sql_verify;
            case TemplateId::sql_refine: return sql_refine;
            case TemplateId::subtable_refine: return subtable_refine;
            case TemplateId::answer_gen: return answer_gen;
            case TemplateId::qa_cell: return qa_cell;
            case TemplateId::qa_row: return qa_row;
            case TemplateId::qa_column: return qa_column;
            case TemplateId::qa_subtable: return qa_subtable;
            case TemplateId::table_expand: return table_expand;
            case TemplateId::executability: return executability;
        }
        return "";
    }

  private:
    std::map<TemplateId, std::string> overrides_;
};

/// Substitutes [Name] placeholders. Every placeholder in the body must be
/// bound; missing names raise an error naming them.
inline std::string render(const PromptTemplate& tpl,
                          const std::map<std::string, std::string>& bindings) {
    std::string out;
    out.reserve(tpl.body.size());
    std::vector<std::string> missing;
    std::size_t i = 0;
    while (i < tpl.body.size()) {
        char c = tpl.body[i];
        if (c != '[') {
            out += c;
            ++i;
            continue;
        }
        auto close = tpl.body.find(']', i + 1);
        bool name_like = close != std::string::npos && close > i + 1;
        if (name_like) {
            for (std::size_t k = i + 1; k < close; ++k) {
                char ch = tpl.body[k];
                if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_') {
                    name_like = false;
                    break;
                }
            }
        }
        if (!name_like) {
            out += c;
            ++i;
            continue;
        }
        std::string name = tpl.body.substr(i + 1, close - i - 1);
        auto it = bindings.find(name);
        if (it == bindings.end()) {
            if (std::find(missing.begin(), missing.end(), name) == missing.end())
                missing.push_back(name);
            i = close + 1;
            continue;
        }
        out += it->second;
        i = close + 1;
    }
    if (!missing.empty())
        throw Error("unbound placeholders: " + str::join(missing, ", "));
    return out;
}

/// Assembles the planner prompt: prefix comment, one block per exemplar,
/// then the target question and table columns.
inline std::string build_planner_prompt(const std::vector<Exemplar>& exemplars,
                                        const std::string& question,
                                        const std::string& columns_text,
                                        const PromptLibrary& lib = {}) {
    std::string body;
    if (!exemplars.empty()) body += std::string(prompt_text::planner_prefix);
    for (const auto& ex : exemplars) {
        body += render({TemplateId::planner, std::string(prompt_text::planner_block)},
                       {{"P", ex.question}, {"S", ex.sql}});
    }
    body += render(lib.get(TemplateId::planner),
                   {{"P", question}, {"Columns", columns_text}});
    return body;
}

}  // namespace tadre

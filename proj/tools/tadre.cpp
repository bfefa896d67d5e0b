// tadre command-line interface: answer questions over tables, inspect
// decompositions offline, run evaluations, build benchmarks, and embed
// exemplar stores.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tadre/config.hpp"
#include "tadre/dataset.hpp"
#include "tadre/eval.hpp"
#include "tadre/llm.hpp"
#include "tadre/pipeline.hpp"
#include "tadre/table_io.hpp"

namespace {

using namespace tadre;

Config load_config(const std::string& path) {
    if (path.empty()) return Config{};
    return Config::from_file(path);
}

std::shared_ptr<LlmClient> make_llm(const Config& cfg, const std::string& mock_script) {
    std::shared_ptr<LlmTransport> transport;
    if (!mock_script.empty()) {
        transport = ScriptedTransport::from_jsonl(mock_script);
    } else {
        if (cfg.llm_endpoint.empty())
            throw Error("no llm.endpoint configured and no --mock script given");
        transport = std::make_shared<HttpTransport>(cfg.llm_endpoint, cfg.llm_api_key());
    }
    return std::make_shared<LlmClient>(transport, cfg);
}

std::shared_ptr<ExemplarStore> make_store(const Config& cfg) {
    if (cfg.exemplar_store_path.empty()) return nullptr;
    auto store = std::make_shared<ExemplarStore>(ExemplarStore::load_jsonl(cfg.exemplar_store_path));
    if (!cfg.exemplar_embeddings_path.empty() &&
        std::filesystem::exists(cfg.exemplar_embeddings_path))
        store->load_embeddings(cfg.exemplar_embeddings_path);
    return store;
}

std::shared_ptr<EmbeddingProvider> make_embedder(const Config& cfg) {
    if (cfg.embed_endpoint.empty()) return nullptr;
    return std::make_shared<CachingEmbeddings>(std::make_shared<HttpEmbeddingProvider>(
        cfg.embed_endpoint, cfg.embed_model, cfg.embed_api_key(), cfg.llm_max_retries,
        cfg.llm_retry_backoff_ms));
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

int cmd_answer(const std::string& config_path, const std::string& table_path,
               const std::string& question, const std::string& trace_path,
               const std::string& mock_script) {
    auto cfg = load_config(config_path);
    auto table = load_table(table_path);
    Pipeline pipeline(cfg, make_llm(cfg, mock_script), make_store(cfg), make_embedder(cfg));
    auto result = pipeline.answer_question(table, question);
    if (!trace_path.empty()) write_json(trace_path, nlohmann::json(result.trace));
    if (!result.ok) {
        std::cerr << "error: " << result.error << "\n";
        return 1;
    }
    std::cout << result.answer << "\n";
    return 0;
}

int cmd_decompose(const std::string& config_path, const std::string& table_path,
                  const std::string& sql, const std::string& trace_path) {
    auto cfg = load_config(config_path);
    auto table = load_table(table_path);
    Pipeline pipeline(cfg, nullptr);
    PipelineTrace trace;
    auto out = pipeline.decompose_offline(table, sql, trace);
    std::cout << linearize(out.subtable) << "\n";
    std::cerr << "rows: " << out.subtable.num_rows() << "/" << table.num_rows()
              << "  columns: " << out.subtable.num_columns() << "/" << table.num_columns()
              << "  tokens: " << trace.table_tokens_sub << "/" << trace.table_tokens_full
              << "  reduction: "
              << (trace.table_tokens_full
                      ? token_reduction(trace.table_tokens_full, trace.table_tokens_sub)
                      : 0.0)
              << (out.fallback_full_rows ? "  [fallback: all rows]" : "") << "\n";
    if (!trace_path.empty()) write_json(trace_path, nlohmann::json(trace));
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& bench_path,
             const std::string& tables_dir, const std::string& mode_name,
             const std::string& out_path, const std::string& mock_script, bool strict_official) {
    auto cfg = load_config(config_path);
    auto mode = eval_mode_from_string(mode_name);
    if (!mode) throw Error("unknown mode: " + mode_name);
    auto records = load_benchmark(bench_path);
    Evaluator evaluator(cfg, make_llm(cfg, mock_script), make_store(cfg), make_embedder(cfg));
    auto report = evaluator.run(records, tables_dir, *mode);
    nlohmann::json report_json = report;
    report_json["scorer"] = "internal";
    if (strict_official)
        std::cerr << "note: --strict-official selected; the bundled scorer approximates the "
                     "official evaluator. Re-score the per-question records in "
                  << out_path << ".records.jsonl with the official tool.\n";
    write_json(out_path, report_json);
    auto records_path = out_path + ".records.jsonl";
    {
        std::ofstream out(records_path, std::ios::binary);
        for (const auto& r : report.per_question) out << nlohmann::json(r).dump() << "\n";
    }
    std::cout << "n=" << report.n << " accuracy=" << report.accuracy
              << " mean_token_reduction=" << report.mean_token_reduction
              << " mean_llm_input_tokens=" << report.mean_llm_input_tokens << "\n";
    return 0;  // completion is success regardless of accuracy
}

int cmd_build_dataset(const std::string& config_path, const std::string& mode_name,
                      const std::string& tables_dir, const std::string& out_path,
                      const std::string& report_path, const std::string& out_tables,
                      const std::string& mock_script) {
    auto cfg = load_config(config_path);
    BenchmarkMode mode;
    if (mode_name == "slqa") mode = BenchmarkMode::slqa;
    else if (mode_name == "seqa") mode = BenchmarkMode::seqa;
    else throw Error("mode must be slqa or seqa");

    std::vector<Table> tables;
    for (const auto& entry : std::filesystem::directory_iterator(tables_dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        if (ext != ".csv" && ext != ".tsv" && ext != ".jsonl") continue;
        if (ext == ".jsonl") {
            for (auto& t : load_tables_jsonl(entry.path().string())) tables.push_back(std::move(t));
        } else {
            tables.push_back(load_table(entry.path().string()));
        }
    }
    if (tables.empty()) throw Error("no tables under " + tables_dir);
    std::sort(tables.begin(), tables.end(),
              [](const Table& a, const Table& b) { return a.source_id < b.source_id; });

    DatasetBuilder builder(cfg, make_llm(cfg, mock_script));
    std::string sidecar = out_tables.empty() ? out_path + ".tables" : out_tables;
    auto report = build_benchmark(builder, tables, mode, cfg, out_path, sidecar);
    if (!report_path.empty()) write_json(report_path, nlohmann::json(report));
    std::cout << "tables=" << report.tables_seen << " expanded=" << report.tables_expanded
              << " pairs=" << report.pairs_total
              << " executable_ratio=" << report.executable_ratio()
              << " parse_failure_ratio=" << report.parse_failure_ratio() << "\n";
    for (const auto& err : report.table_errors) std::cerr << "table error: " << err << "\n";
    return 0;
}

int cmd_embed_store(const std::string& config_path, const std::string& store_path,
                    const std::string& out_path) {
    auto cfg = load_config(config_path);
    auto store = ExemplarStore::load_jsonl(store_path);
    auto embedder = make_embedder(cfg);
    if (!embedder) throw Error("embed.endpoint must be configured for embed-store");
    store.compute_embeddings(*embedder);
    store.save_embeddings(out_path);
    std::cout << "embedded " << store.size() << " exemplars (dim " << store.dimension() << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TableQA via SQL-plan decomposition and LLM refinement"};
    app.require_subcommand(1);

    std::string config_path, table_path, question, trace_path, mock_script, sql;
    std::string bench_path, tables_dir, mode_name, out_path, report_path, out_tables, store_path;

    auto* answer = app.add_subcommand("answer", "Answer a question over one table");
    answer->add_option("--config", config_path, "JSON config file");
    answer->add_option("--table", table_path, "table file (csv/tsv/jsonl)")->required();
    answer->add_option("--question", question, "natural-language question")->required();
    answer->add_option("--trace", trace_path, "write the pipeline trace JSON here");
    answer->add_option("--mock", mock_script, "scripted mock provider (JSONL rules)");

    auto* decompose = app.add_subcommand("decompose",
                                         "Extract the sub-table for an SQL plan (offline)");
    decompose->add_option("--config", config_path, "JSON config file");
    decompose->add_option("--table", table_path, "table file")->required();
    decompose->add_option("--sql", sql, "SQL decomposition plan")->required();
    decompose->add_option("--trace", trace_path, "write the trace JSON here");

    auto* eval = app.add_subcommand("eval", "Evaluate a benchmark");
    eval->add_option("--config", config_path, "JSON config file");
    eval->add_option("--bench", bench_path, "benchmark JSONL")->required();
    eval->add_option("--tables", tables_dir, "directory of table files")->required();
    eval->add_option("--mode", mode_name, "full_pipeline | end_to_end_baseline | decompose_only")
        ->required();
    eval->add_option("--out", out_path, "report JSON output")->required();
    eval->add_option("--mock", mock_script, "scripted mock provider (JSONL rules)");
    bool strict_official = false;
    eval->add_flag("--strict-official", strict_official,
                   "note that official-scorer semantics are expected; re-score the records "
                   "file externally");

    auto* build = app.add_subcommand("build-dataset", "Generate a large-table QA benchmark");
    build->add_option("--config", config_path, "JSON config file");
    build->add_option("--mode", mode_name, "slqa | seqa")->required();
    build->add_option("--tables", tables_dir, "directory of source tables")->required();
    build->add_option("--out", out_path, "benchmark JSONL output")->required();
    build->add_option("--report", report_path, "statistics report JSON");
    build->add_option("--out-tables", out_tables,
                      "directory for the tables the benchmark refers to");
    build->add_option("--mock", mock_script, "scripted mock provider (JSONL rules)");

    auto* embed = app.add_subcommand("embed-store",
                                     "Precompute exemplar embeddings via the embed endpoint");
    embed->add_option("--config", config_path, "JSON config file");
    embed->add_option("--store", store_path, "exemplar store JSONL")->required();
    embed->add_option("--out", out_path, "embeddings JSON output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*answer) return cmd_answer(config_path, table_path, question, trace_path, mock_script);
        if (*decompose) return cmd_decompose(config_path, table_path, sql, trace_path);
        if (*eval)
            return cmd_eval(config_path, bench_path, tables_dir, mode_name, out_path, mock_script,
                            strict_official);
        if (*build)
            return cmd_build_dataset(config_path, mode_name, tables_dir, out_path, report_path,
                                     out_tables, mock_script);
        if (*embed) return cmd_embed_store(config_path, store_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "tadre/table.hpp"
#include "tadre/tokenizer.hpp"

namespace tadre {

/// Runtime configuration, loaded from a JSON file with nested sections
/// (llm.*, embed.*, tokenizer.*, plan.*, pipeline.*, eval.*, exemplars.*,
/// dataset.*). Every knob has a default so an empty config works offline.
struct Config {
    // llm
    std::string llm_endpoint;
    std::string llm_model = "gpt-4o-mini";
    std::string llm_api_key_env = "TADRE_API_KEY";
    int llm_max_retries = 3;
    int llm_retry_backoff_ms = 250;
    double llm_rps = 0.0;  // 0 = unlimited
    double llm_temperature = 0.0;
    int llm_max_tokens = 1024;

    // embeddings
    std::string embed_endpoint;
    std::string embed_model = "all-mpnet-base-v2";
    std::string embed_api_key_env = "TADRE_API_KEY";

    // tokenizer
    CounterKind tokenizer_kind = CounterKind::whitespace;
    std::string tokenizer_vocab_path;
    long large_table_threshold = 4096;

    // plan / engine
    bool plan_disjunctive = false;
    bool engine_strict_numeric = false;

    // pipeline
    int max_sql_refinements = 1;
    int max_cotr_rounds = 3;

    // exemplars
    std::string exemplar_store_path;
    std::string exemplar_embeddings_path;
    int exemplar_top_k = 5;

    // eval
    int eval_workers = 1;

    // dataset builder
    unsigned dataset_seed = 42;
    int dataset_sample_rows = 3;
    std::string prompts_dir;  // optional per-template overrides

    TokenBudget token_budget() const {
        return TokenBudget(tokenizer_kind, large_table_threshold, tokenizer_vocab_path);
    }

    static Config from_json(const nlohmann::json& j) {
        Config c;
        auto get = [&](const char* section, const char* key) -> const nlohmann::json* {
            if (!j.contains(section)) return nullptr;
            const auto& s = j.at(section);
            if (!s.contains(key)) return nullptr;
            return &s.at(key);
        };
        auto str_of = [&](const char* s, const char* k, std::string& out) {
            if (auto v = get(s, k)) out = v->get<std::string>();
        };
        auto int_of = [&](const char* s, const char* k, auto& out) {
            if (auto v = get(s, k)) out = v->get<std::decay_t<decltype(out)>>();
        };
        str_of("llm", "endpoint", c.llm_endpoint);
        str_of("llm", "model", c.llm_model);
        str_of("llm", "api_key_env", c.llm_api_key_env);
        int_of("llm", "max_retries", c.llm_max_retries);
        int_of("llm", "retry_backoff_ms", c.llm_retry_backoff_ms);
        int_of("llm", "rps", c.llm_rps);
        int_of("llm", "temperature", c.llm_temperature);
        int_of("llm", "max_tokens", c.llm_max_tokens);
        str_of("embed", "endpoint", c.embed_endpoint);
        str_of("embed", "model", c.embed_model);
        str_of("embed", "api_key_env", c.embed_api_key_env);
        if (auto v = get("tokenizer", "kind"))
            c.tokenizer_kind = v->get<std::string>() == "bpe_cl100k" ? CounterKind::bpe_cl100k
                                                                     : CounterKind::whitespace;
        str_of("tokenizer", "vocab_path", c.tokenizer_vocab_path);
        int_of("tokenizer", "large_table_threshold", c.large_table_threshold);
        if (auto v = get("plan", "disjunctive")) c.plan_disjunctive = v->get<bool>();
        if (auto v = get("engine", "strict_numeric")) c.engine_strict_numeric = v->get<bool>();
        int_of("pipeline", "max_sql_refinements", c.max_sql_refinements);
        int_of("pipeline", "max_cotr_rounds", c.max_cotr_rounds);
        str_of("exemplars", "store_path", c.exemplar_store_path);
        str_of("exemplars", "embeddings_path", c.exemplar_embeddings_path);
        int_of("exemplars", "top_k", c.exemplar_top_k);
        int_of("eval", "workers", c.eval_workers);
        int_of("dataset", "seed", c.dataset_seed);
        int_of("dataset", "sample_rows", c.dataset_sample_rows);
        str_of("prompts", "dir", c.prompts_dir);
        if (c.large_table_threshold <= 0) throw Error("tokenizer.large_table_threshold must be > 0");
        return c;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read config file: " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }

    std::string llm_api_key() const {
        const char* v = std::getenv(llm_api_key_env.c_str());
        return v ? v : "";
    }

    std::string embed_api_key() const {
        const char* v = std::getenv(embed_api_key_env.c_str());
        return v ? v : "";
    }
};

}  // namespace tadre

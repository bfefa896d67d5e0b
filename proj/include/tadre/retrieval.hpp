#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tadre/strings.hpp"
#include "tadre/table.hpp"

namespace tadre {

struct EmbeddingVector {
    std::vector<double> values;

    double norm() const {
        double s = 0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }
};

/// Produces question embeddings. Two implementations ship: an HTTP client
/// (llm.hpp) and a precomputed lookup for deterministic tests.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::string id() const = 0;
};

/// Exact-match lookup over preloaded vectors; unknown text is an error.
class PrecomputedEmbeddings : public EmbeddingProvider {
  public:
    explicit PrecomputedEmbeddings(std::string id = "precomputed") : id_(std::move(id)) {}

    void put(const std::string& text, std::vector<double> vec) {
        vectors_[text] = std::move(vec);
    }

    EmbeddingVector embed(const std::string& text) override {
        auto it = vectors_.find(text);
        if (it == vectors_.end())
            throw Error("no precomputed embedding for: " + text);
        return {it->second};
    }

    std::string id() const override { return id_; }

  private:
    std::string id_;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Thread-safe memoization so repeated questions embed once per run.
class CachingEmbeddings : public EmbeddingProvider {
  public:
    explicit CachingEmbeddings(std::shared_ptr<EmbeddingProvider> inner)
        : inner_(std::move(inner)) {}

    EmbeddingVector embed(const std::string& text) override {
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(text);
            if (it != cache_.end()) return {it->second};
        }
        auto vec = inner_->embed(text);
        std::lock_guard<std::mutex> lock(mu_);
        cache_[text] = vec.values;
        return vec;
    }

    std::string id() const override { return inner_->id(); }

  private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::mutex mu_;
    std::unordered_map<std::string, std::vector<double>> cache_;
};

struct Exemplar {
    std::string question;
    std::string sql;
};

/// The in-context exemplar set with its embedding matrix. Immutable after
/// load; embeddings are computed offline (see the embed-store CLI command).
class ExemplarStore {
  public:
    ExemplarStore() = default;

    static ExemplarStore from_entries(std::vector<Exemplar> entries,
                                      std::vector<std::vector<double>> embeddings,
                                      std::string embedder_id) {
        ExemplarStore s;
        s.entries_ = std::move(entries);
        s.embeddings_ = std::move(embeddings);
        s.embedder_id_ = std::move(embedder_id);
        s.validate();
        return s;
    }

    /// Loads the JSONL sidecar of {question, sql} pairs. Embeddings may be
    /// absent (zero-shot prompting still works).
    static ExemplarStore load_jsonl(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read exemplar store: " + path);
        ExemplarStore s;
        std::string line;
        while (std::getline(in, line)) {
            if (str::trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            s.entries_.push_back({j.at("question").get<std::string>(),
                                  j.at("sql").get<std::string>()});
        }
        return s;
    }

    /// Attaches the embedding matrix JSON {embedder_id, dim, vectors}.
    void load_embeddings(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read embeddings file: " + path);
        nlohmann::json j;
        in >> j;
        embedder_id_ = j.value("embedder_id", "");
        embeddings_.clear();
        for (const auto& row : j.at("vectors"))
            embeddings_.push_back(row.get<std::vector<double>>());
        validate();
    }

    void save_embeddings(const std::string& path) const {
        nlohmann::json j;
        j["embedder_id"] = embedder_id_;
        j["dim"] = dimension();
        j["vectors"] = embeddings_;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("cannot write embeddings file: " + path);
        out << j.dump();
    }

    void compute_embeddings(EmbeddingProvider& provider) {
        embeddings_.clear();
        for (const auto& e : entries_) embeddings_.push_back(provider.embed(e.question).values);
        embedder_id_ = provider.id();
        validate();
    }

    void validate() const {
        if (embeddings_.empty()) return;
        if (embeddings_.size() != entries_.size())
            throw Error("embedding row count does not match entry count");
        std::size_t m = embeddings_.front().size();
        if (m == 0) throw Error("zero-dimension embeddings");
        for (const auto& row : embeddings_) {
            if (row.size() != m) throw Error("dimension mismatch inside the embedding matrix");
            double norm = 0;
            for (double v : row) norm += v * v;
            if (norm == 0.0) throw Error("zero embedding vector in store");
        }
    }

    std::size_t size() const { return entries_.size(); }
    bool has_embeddings() const { return !embeddings_.empty(); }
    std::size_t dimension() const { return embeddings_.empty() ? 0 : embeddings_.front().size(); }
    const std::string& embedder_id() const { return embedder_id_; }
    const std::vector<Exemplar>& entries() const { return entries_; }
    const std::vector<std::vector<double>>& embeddings() const { return embeddings_; }

  private:
    std::vector<Exemplar> entries_;
    std::vector<std::vector<double>> embeddings_;
    std::string embedder_id_;
};

struct ScoredExemplar {
    Exemplar exemplar;
    double similarity;
    std::size_t index;
};

/// The k store entries with the highest cosine similarity to the query
/// vector, in descending order; ties break toward the lower store index.
inline std::vector<ScoredExemplar> top_k(const EmbeddingVector& query, const ExemplarStore& store,
                                         std::size_t k) {
    if (k < 1 || k > store.size()) throw Error("top_k: k must be in [1, store size]");
    if (!store.has_embeddings()) throw Error("top_k: store has no embeddings");
    if (query.values.size() != store.dimension())
        throw Error("dimension mismatch: query has " + std::to_string(query.values.size()) +
                    ", store has " + std::to_string(store.dimension()));
    double qn = query.norm();
    if (qn == 0.0) throw Error("zero query embedding");
    std::vector<ScoredExemplar> scored;
    scored.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& row = store.embeddings()[i];
        double dot = 0, rn = 0;
        for (std::size_t d = 0; d < row.size(); ++d) {
            dot += query.values[d] * row[d];
            rn += row[d] * row[d];
        }
        double cos = dot / (qn * std::sqrt(rn));
        scored.push_back({store.entries()[i], cos, i});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredExemplar& a, const ScoredExemplar& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.index < b.index;
    });
    scored.resize(k);
    return scored;
}

}  // namespace tadre

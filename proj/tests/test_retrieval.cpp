#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "tadre/retrieval.hpp"

using namespace tadre;

namespace {

ExemplarStore planted_store(std::vector<std::vector<double>> vecs) {
    std::vector<Exemplar> entries;
    for (std::size_t i = 0; i < vecs.size(); ++i)
        entries.push_back({"q" + std::to_string(i), "select " + std::to_string(i)});
    return ExemplarStore::from_entries(std::move(entries), std::move(vecs), "planted");
}

}  // namespace

TEST_SUITE_BEGIN("retrieval");

TEST_CASE("top_k: hand-computable 2-D cases") {
    auto store = planted_store({{1, 0}, {0, 1}, {-1, 0}});
    EmbeddingVector q{{1, 0}};
    auto one = top_k(q, store, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].index == 0);
    CHECK(one[0].similarity == doctest::Approx(1.0));

    auto two = top_k(q, store, 2);
    CHECK(two[0].index == 0);
    CHECK(two[1].index == 1);  // cos 0 beats cos -1
    CHECK(two[0].similarity == doctest::Approx(1.0));
    CHECK(two[1].similarity == doctest::Approx(0.0));
}

TEST_CASE("top_k: orthogonal ties break to the lower index") {
    auto store = planted_store({{0, 1}, {0, -1}});
    EmbeddingVector q{{1, 0}};
    auto r = top_k(q, store, 1);
    CHECK(r[0].index == 0);
}

TEST_CASE("top_k: k out of range and dimension mismatch") {
    auto store = planted_store({{1, 0}, {0, 1}});
    EmbeddingVector q{{1, 0}};
    CHECK_THROWS_AS(top_k(q, store, 0), Error);
    CHECK_THROWS_AS(top_k(q, store, 3), Error);
    EmbeddingVector bad{{1, 0, 0}};
    CHECK_THROWS_AS(top_k(bad, store, 1), Error);
}

TEST_CASE("top_k: k = N returns everything in non-increasing similarity") {
    std::mt19937 rng(555);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::vector<double>> vecs;
        for (int i = 0; i < 12; ++i) {
            std::vector<double> v(4);
            double norm = 0;
            do {
                norm = 0;
                for (auto& x : v) {
                    x = u(rng);
                    norm += x * x;
                }
            } while (norm == 0);
            vecs.push_back(v);
        }
        auto store = planted_store(vecs);
        EmbeddingVector q{{u(rng), u(rng), u(rng), 1.0}};
        auto all = top_k(q, store, store.size());
        REQUIRE(all.size() == store.size());
        for (std::size_t i = 1; i < all.size(); ++i)
            CHECK(all[i - 1].similarity >= all[i].similarity);
    }
}

TEST_CASE("property: positive scaling of the query leaves the order unchanged") {
    std::mt19937 rng(556);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::vector<double>> vecs;
        for (int i = 0; i < 8; ++i)
            vecs.push_back({u(rng), u(rng), u(rng) + 2.0});  // offset avoids zero vectors
        auto store = planted_store(vecs);
        EmbeddingVector q{{u(rng), u(rng), u(rng) + 2.0}};
        auto base = top_k(q, store, 5);
        EmbeddingVector scaled = q;
        for (auto& x : scaled.values) x *= 37.5;
        auto same = top_k(scaled, store, 5);
        for (std::size_t i = 0; i < base.size(); ++i) CHECK(base[i].index == same[i].index);
    }
}

TEST_CASE("property: row order permutation only re-labels indices") {
    auto store = planted_store({{3, 1}, {1, 3}, {2, 2}});
    auto flipped = planted_store({{1, 3}, {3, 1}, {2, 2}});
    EmbeddingVector q{{1, 0}};
    auto a = top_k(q, store, 3);
    auto b = top_k(q, flipped, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].similarity == doctest::Approx(b[i].similarity));
}

TEST_CASE("store: jsonl round trip with embeddings sidecar") {
    auto store_path = testutil::write_temp(
        "store.jsonl",
        R"({"question":"how many wins","sql":"select count(*) from t"})" "\n"
        R"({"question":"which team","sql":"select team from t"})" "\n");
    auto store = ExemplarStore::load_jsonl(store_path);
    REQUIRE(store.size() == 2);
    CHECK(store.entries()[0].question == "how many wins");
    CHECK_FALSE(store.has_embeddings());

    PrecomputedEmbeddings provider("test-embedder");
    provider.put("how many wins", {1, 0});
    provider.put("which team", {0, 1});
    store.compute_embeddings(provider);
    CHECK(store.has_embeddings());
    CHECK(store.dimension() == 2);

    auto emb_path = std::string(TADRE_TEST_TMP) + "/store_emb.json";
    store.save_embeddings(emb_path);
    auto store2 = ExemplarStore::load_jsonl(store_path);
    store2.load_embeddings(emb_path);
    CHECK(store2.dimension() == 2);
    CHECK(store2.embedder_id() == "test-embedder");
    CHECK(store2.embeddings() == store.embeddings());
}

TEST_CASE("store validation rejects zero vectors and ragged matrices") {
    CHECK_THROWS_AS(ExemplarStore::from_entries({{"q", "s"}}, {{0, 0}}, "x"), Error);
    CHECK_THROWS_AS(ExemplarStore::from_entries({{"q", "s"}, {"r", "t"}}, {{1, 0}}, "x"), Error);
    CHECK_THROWS_AS(
        ExemplarStore::from_entries({{"q", "s"}, {"r", "t"}}, {{1, 0}, {1, 0, 0}}, "x"), Error);
}

TEST_CASE("caching provider: repeated text embeds once") {
    struct Counting : EmbeddingProvider {
        int calls = 0;
        EmbeddingVector embed(const std::string&) override {
            ++calls;
            return {{1.0, 2.0}};
        }
        std::string id() const override { return "counting"; }
    };
    auto inner = std::make_shared<Counting>();
    CachingEmbeddings cache(inner);
    auto a = cache.embed("same");
    auto b = cache.embed("same");
    CHECK(inner->calls == 1);
    CHECK(a.values == b.values);
}

TEST_CASE("precomputed provider: unknown text is an error") {
    PrecomputedEmbeddings p;
    p.put("known", {1.0});
    CHECK(p.embed("known").values == std::vector<double>{1.0});
    CHECK_THROWS_AS(p.embed("unknown"), Error);
}

TEST_SUITE_END();

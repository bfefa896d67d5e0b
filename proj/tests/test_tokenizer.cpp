#include "doctest.h"

#include <random>

#include "helpers.hpp"
#include "tadre/tokenizer.hpp"

using namespace tadre;

namespace {

const std::string kVocabPath = std::string(TADRE_DATA_DIR) + "/cl100k_base.tiktoken";

TokenBudget bpe_budget(long threshold = 4096) {
    return TokenBudget(CounterKind::bpe_cl100k, threshold, kVocabPath);
}

std::string b64(const std::string& bytes) {
    static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                     static_cast<unsigned char>(bytes[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += tbl[v & 63];
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                     (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += tbl[(v >> 6) & 63];
        out += "=";
    }
    return out;
}

// Independent merge oracle: works on a list of byte strings instead of the
// engine's boundary vector.
std::vector<std::string> oracle_merge(const std::string& piece, const BpeVocabulary& vocab) {
    std::vector<std::string> segs;
    for (char c : piece) segs.emplace_back(1, c);
    while (segs.size() > 1) {
        int best = std::numeric_limits<int>::max();
        std::size_t at = 0;
        for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
            auto r = vocab.rank(segs[i] + segs[i + 1]);
            if (r && *r < best) {
                best = *r;
                at = i;
            }
        }
        if (best == std::numeric_limits<int>::max()) break;
        segs[at] += segs[at + 1];
        segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(at) + 1);
    }
    return segs;
}

}  // namespace

TEST_SUITE_BEGIN("tokenizer");

TEST_CASE("whitespace counter") {
    TokenBudget ws(CounterKind::whitespace, 4096);
    CHECK(count_tokens("", ws) == 0);
    CHECK(count_tokens("a b c", ws) == 3);
    CHECK(count_tokens("  a\t\tb \n c  ", ws) == 3);
    CHECK(count_tokens("one", ws) == 1);
}

TEST_CASE("token budget rejects non-positive thresholds") {
    CHECK_THROWS_AS(TokenBudget(CounterKind::whitespace, 0), Error);
    CHECK_THROWS_AS(TokenBudget(CounterKind::whitespace, -1), Error);
}

TEST_CASE("bpe counter requires a vocabulary path") {
    TokenBudget b(CounterKind::bpe_cl100k, 4096);
    CHECK_THROWS_AS(count_tokens("x", b), Error);
    TokenBudget missing(CounterKind::bpe_cl100k, 4096, "/nope/vocab.tiktoken");
    CHECK_THROWS_AS(count_tokens("x", missing), Error);
}

// Counts frozen from the published cl100k_base encoder on these exact strings.
TEST_CASE("bpe counter matches reference counts") {
    auto b = bpe_budget();
    CHECK(count_tokens("", b) == 0);
    CHECK(count_tokens("hello world", b) == 2);
    CHECK(count_tokens("Hello, world!", b) == 4);
    CHECK(count_tokens("a b c", b) == 3);
    CHECK(count_tokens("select name from t where age > 30", b) == 9);
    CHECK(count_tokens("Player Name | Team\nAlice | Reds", b) == 8);
    CHECK(count_tokens("3,000.50 dollars (50%)", b) == 9);
    CHECK(count_tokens("The quick brown fox jumps over the lazy dog.", b) == 10);
    CHECK(count_tokens("café naïve résumé", b) == 7);
    CHECK(count_tokens("Column_1 | Column_2 | Column_3\n1 | 2 | 3\n4 | 5 | 6", b) == 27);
    CHECK(count_tokens("   leading spaces and\ttabs\n\nnewlines", b) == 9);
    CHECK(count_tokens("id | name | team | points\n1 | Alice Johnson | Reds | 42\n"
                       "2 | Bob Smith | Blues | 37", b) == 27);
    CHECK(count_tokens("don't can't won't it's", b) == 8);
    CHECK(count_tokens("x >= 5 AND y <= 10", b) == 9);
    CHECK(count_tokens("1234567890", b) == 4);
    CHECK(count_tokens("SELECT COUNT(*) FROM employees WHERE salary >= 50000 "
                       "GROUP BY dept LIMIT 3", b) == 17);
}

TEST_CASE("bpe ids match reference encoding") {
    const auto& vocab = BpeVocabulary::load(kVocabPath);
    CHECK(vocab.encode("hello world") == std::vector<int>{15339, 1917});
    CHECK(vocab.encode("a b c") == std::vector<int>{64, 293, 272});
}

TEST_CASE("synthetic vocabulary: engine agrees with the independent merge oracle") {
    // Small vocabulary with every needed byte plus a few merges.
    std::string content;
    int rank = 0;
    for (char c : std::string("abcdef xyz")) content += b64(std::string(1, c)) + " " + std::to_string(rank++) + "\n";
    for (const char* m : {"ab", "cd", "abc", "cde", "abcd", "xy"})
        content += b64(m) + " " + std::to_string(rank++) + "\n";
    auto path = testutil::write_temp("mini.tiktoken", content);
    auto vocab = BpeVocabulary::load(path);

    std::mt19937 rng(9001);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::uniform_int_distribution<int> pick(0, 9);
    const std::string pool = "abcdef xyz";
    for (int i = 0; i < 500; ++i) {
        std::string piece;
        std::size_t n = len(rng);
        for (std::size_t k = 0; k < n; ++k) piece += pool[static_cast<std::size_t>(pick(rng))];
        auto expected = oracle_merge(piece, vocab);
        auto got = vocab.encode_piece(piece);
        REQUIRE(got.size() == expected.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            auto r = vocab.rank(expected[k]);
            REQUIRE(r.has_value());
            CHECK(got[k] == *r);
        }
    }
}

TEST_CASE("is_large: threshold boundary") {
    TokenBudget ws(CounterKind::whitespace, 4096);
    Table small = testutil::make_table({"h"}, {});
    for (int i = 0; i < 4095; ++i) small.rows.push_back({"w"});
    CHECK(count_tokens(linearize(small), ws) == 4096);
    CHECK_FALSE(is_large(small, ws));
    small.rows.push_back({"w"});  // 4097 tokens: one past the threshold
    CHECK(count_tokens(linearize(small), ws) == 4097);
    CHECK(is_large(small, ws));
}

TEST_CASE("is_large: tiny table") {
    TokenBudget ws(CounterKind::whitespace, 4096);
    auto t = testutil::make_table({"a", "b"}, {{"1", "2"}});
    CHECK_FALSE(is_large(t, ws));
}

TEST_CASE("property: whitespace count is monotone under cell removal") {
    std::mt19937 rng(9002);
    TokenBudget ws(CounterKind::whitespace, 4096);
    for (int i = 0; i < 200; ++i) {
        auto t = testutil::random_table(rng);
        if (t.rows.empty() || t.header.size() < 2) continue;
        std::uniform_int_distribution<std::size_t> ncols(1, t.header.size() - 1);
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < ncols(rng); ++c) cols.push_back(c);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < t.rows.size(); r += 2) rows.push_back(r);
        if (rows.empty()) continue;
        auto sub = make_subtable(t, rows, cols);
        CHECK(count_tokens(linearize(sub), ws) <= count_tokens(linearize(t), ws));
    }
}

TEST_CASE("property: bpe count is monotone under projection on >=99% of cases") {
    std::mt19937 rng(9003);
    auto b = bpe_budget();
    int total = 0, violations = 0;
    for (int i = 0; i < 300; ++i) {
        auto t = testutil::random_table(rng, 12, 5);
        if (t.rows.empty() || t.header.size() < 2) continue;
        std::uniform_int_distribution<std::size_t> ncols(1, t.header.size() - 1);
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < ncols(rng); ++c) cols.push_back(c);
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < t.rows.size(); r += 2) rows.push_back(r);
        if (rows.empty()) continue;
        auto sub = make_subtable(t, rows, cols);
        ++total;
        if (count_tokens(linearize(sub), b) > count_tokens(linearize(t), b)) ++violations;
    }
    REQUIRE(total > 100);
    CHECK(static_cast<double>(violations) <= 0.01 * static_cast<double>(total));
}

TEST_SUITE_END();

#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tadre/table.hpp"

namespace tadre {

enum class CounterKind { bpe_cl100k, whitespace };

/// Token accounting policy: which counter to use and where "large" begins.
struct TokenBudget {
    CounterKind counter_kind = CounterKind::whitespace;
    long large_table_threshold = 4096;
    std::string vocab_path;  // required for bpe_cl100k

    TokenBudget() = default;
    TokenBudget(CounterKind kind, long threshold, std::string vocab = {})
        : counter_kind(kind), large_table_threshold(threshold), vocab_path(std::move(vocab)) {
        if (large_table_threshold <= 0) throw Error("token threshold must be positive");
    }
};

namespace detail {

inline bool is_unicode_ws(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
        case 0x20: case 0x85: case 0xA0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Letter/number classification for the split pattern. Exact for ASCII;
// common non-ASCII letter ranges are covered, everything else unlisted is
// treated as "other" (symbol), which matches how table text is split in
// practice. Full Unicode category tables are deliberately out of scope.
inline bool is_unicode_letter(char32_t cp) {
    if (cp < 0x80)
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    if (cp >= 0xC0 && cp <= 0x24F)  // Latin-1 letters + Latin Extended-A/B
        return cp != 0xD7 && cp != 0xF7;
    if (cp == 0xB5 || cp == 0xAA || cp == 0xBA) return true;
    if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x37E && cp != 0x387;   // Greek
    if (cp >= 0x400 && cp <= 0x4FF) return true;                         // Cyrillic
    if (cp >= 0x531 && cp <= 0x58F) return cp <= 0x556 || cp >= 0x561;   // Armenian
    if (cp >= 0x5D0 && cp <= 0x5EA) return true;                         // Hebrew
    if (cp >= 0x620 && cp <= 0x64A) return true;                         // Arabic
    if (cp >= 0x3040 && cp <= 0x30FF) return cp != 0x3097 && cp != 0x3098;  // Kana
    if (cp >= 0x4E00 && cp <= 0x9FFF) return true;                       // CJK unified
    if (cp >= 0xAC00 && cp <= 0xD7A3) return true;                       // Hangul
    if (cp >= 0x1E00 && cp <= 0x1FFF) return true;  // Latin/Greek extended additional
    return false;
}

inline bool is_unicode_number(char32_t cp) {
    if (cp < 0x80) return cp >= '0' && cp <= '9';
    if (cp >= 0x660 && cp <= 0x669) return true;    // Arabic-Indic
    if (cp >= 0x966 && cp <= 0x96F) return true;    // Devanagari
    if (cp >= 0xFF10 && cp <= 0xFF19) return true;  // fullwidth
    return cp == 0xB2 || cp == 0xB3 || cp == 0xB9 || (cp >= 0xBC && cp <= 0xBE);
}

// Decodes one UTF-8 code point; invalid bytes decode as themselves so the
// scanner is total over arbitrary byte strings.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
    unsigned char c = static_cast<unsigned char>(s[pos]);
    len = 1;
    if (c < 0x80) return c;
    int extra = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) { cp = c & 0x1F; extra = 1; }
    else if ((c & 0xF0) == 0xE0) { cp = c & 0x0F; extra = 2; }
    else if ((c & 0xF8) == 0xF0) { cp = c & 0x07; extra = 3; }
    else return c;
    if (pos + static_cast<std::size_t>(extra) >= s.size()) return c;
    for (int k = 1; k <= extra; ++k) {
        unsigned char cc = static_cast<unsigned char>(s[pos + k]);
        if ((cc & 0xC0) != 0x80) return c;
        cp = (cp << 6) | (cc & 0x3F);
    }
    len = 1 + extra;
    return cp;
}

struct Cp {
    char32_t cp;
    std::size_t offset;  // byte offset
    std::size_t size;    // byte length
};

inline std::vector<Cp> decode_all(std::string_view s) {
    std::vector<Cp> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t len = 0;
        char32_t cp = decode_utf8(s, i, len);
        cps.push_back({cp, i, len});
        i += len;
    }
    return cps;
}

}  // namespace detail

/// Splits text into the pieces that BPE merging runs over, following the
/// cl100k_base segmentation rules (contractions, letter runs with one
/// leading non-letter, <=3-digit number chunks, punctuation runs, and the
/// whitespace cases).
inline std::vector<std::string> cl100k_pre_tokenize(std::string_view text) {
    using namespace detail;
    auto cps = decode_all(text);
    const std::size_t n = cps.size();
    auto letter = [&](std::size_t i) { return is_unicode_letter(cps[i].cp); };
    auto number = [&](std::size_t i) { return is_unicode_number(cps[i].cp); };
    auto ws = [&](std::size_t i) { return is_unicode_ws(cps[i].cp); };
    auto newline = [&](std::size_t i) { return cps[i].cp == '\r' || cps[i].cp == '\n'; };

    std::vector<std::string> pieces;
    auto emit = [&](std::size_t from, std::size_t to) {  // [from, to) in code points
        std::size_t b0 = cps[from].offset;
        std::size_t b1 = cps[to - 1].offset + cps[to - 1].size;
        pieces.emplace_back(text.substr(b0, b1 - b0));
    };

    std::size_t i = 0;
    while (i < n) {
        // 1: contraction suffixes 's 't 'd 'm 'll 've 're (case-insensitive)
        if (cps[i].cp == '\'' && i + 1 < n) {
            char32_t a = cps[i + 1].cp | 0x20;
            if (a == 's' || a == 'd' || a == 'm' || a == 't') {
                emit(i, i + 2);
                i += 2;
                continue;
            }
            if (i + 2 < n) {
                char32_t b = cps[i + 2].cp | 0x20;
                if ((a == 'l' && b == 'l') || (a == 'v' && b == 'e') || (a == 'r' && b == 'e')) {
                    emit(i, i + 3);
                    i += 3;
                    continue;
                }
            }
        }
        // 2: optional one non-letter/number/newline, then a letter run
        {
            std::size_t start = i, j = i;
            if (!letter(j) && !number(j) && !newline(j) && j + 1 < n && letter(j + 1)) ++j;
            if (j < n && letter(j)) {
                while (j < n && letter(j)) ++j;
                emit(start, j);
                i = j;
                continue;
            }
        }
        // 3: one to three numbers
        if (number(i)) {
            std::size_t j = i;
            while (j < n && number(j) && j - i < 3) ++j;
            emit(i, j);
            i = j;
            continue;
        }
        // 4: optional space, punctuation run, trailing newlines
        {
            std::size_t start = i, j = i;
            if (cps[j].cp == ' ' && j + 1 < n) ++j;
            if (j < n && !ws(j) && !letter(j) && !number(j)) {
                while (j < n && !ws(j) && !letter(j) && !number(j)) ++j;
                while (j < n && newline(j)) ++j;
                emit(start, j);
                i = j;
                continue;
            }
        }
        // whitespace run for branches 5-7
        if (ws(i)) {
            std::size_t j = i;
            while (j < n && ws(j)) ++j;
            // 5: up to and including the last newline in the run
            std::size_t last_nl = std::numeric_limits<std::size_t>::max();
            for (std::size_t k = i; k < j; ++k)
                if (newline(k)) last_nl = k;
            if (last_nl != std::numeric_limits<std::size_t>::max()) {
                emit(i, last_nl + 1);
                i = last_nl + 1;
                continue;
            }
            // 6: all of it at end of text, else all but the final char
            if (j == n) {
                emit(i, j);
                i = j;
                continue;
            }
            if (j - i >= 2) {
                emit(i, j - 1);
                i = j - 1;
                continue;
            }
            // 7: a single whitespace char before a non-letter token
            emit(i, j);
            i = j;
            continue;
        }
        emit(i, i + 1);  // unreachable fallback: keep the scanner total
        ++i;
    }
    return pieces;
}

/// Byte-pair encoder over a tiktoken-format vocabulary file
/// (one "base64-bytes rank" entry per line).
class BpeVocabulary {
  public:
    static BpeVocabulary load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error("cannot read vocabulary file: " + path);
        BpeVocabulary v;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto sp = line.find(' ');
            if (sp == std::string::npos) throw Error("malformed vocabulary line: " + line);
            int rank = std::stoi(line.substr(sp + 1));
            v.ranks_.emplace(decode_base64(line.substr(0, sp)), rank);
        }
        if (v.ranks_.empty()) throw Error("empty vocabulary file: " + path);
        return v;
    }

    std::optional<int> rank(std::string_view bytes) const {
        auto it = ranks_.find(std::string(bytes));
        if (it == ranks_.end()) return std::nullopt;
        return it->second;
    }

    /// Encodes one pre-tokenized piece: start from single bytes, repeatedly
    /// merge the adjacent pair whose joined bytes have the lowest rank
    /// (leftmost on ties). Unknown single bytes count as one token (-1).
    std::vector<int> encode_piece(std::string_view piece) const {
        if (piece.empty()) return {};
        // whole-piece hit short-circuits the merge loop
        if (auto direct = rank(piece)) return {*direct};
        std::vector<std::size_t> bounds(piece.size() + 1);
        for (std::size_t i = 0; i <= piece.size(); ++i) bounds[i] = i;
        while (bounds.size() > 2) {
            int best_rank = std::numeric_limits<int>::max();
            std::size_t best_i = 0;
            for (std::size_t i = 0; i + 2 < bounds.size(); ++i) {
                auto r = rank(piece.substr(bounds[i], bounds[i + 2] - bounds[i]));
                if (r && *r < best_rank) {
                    best_rank = *r;
                    best_i = i;
                }
            }
            if (best_rank == std::numeric_limits<int>::max()) break;
            bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(best_i) + 1);
        }
        std::vector<int> ids;
        ids.reserve(bounds.size() - 1);
        for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
            auto r = rank(piece.substr(bounds[i], bounds[i + 1] - bounds[i]));
            ids.push_back(r ? *r : -1);
        }
        return ids;
    }

    std::vector<int> encode(std::string_view text) const {
        std::vector<int> ids;
        for (const auto& piece : cl100k_pre_tokenize(text)) {
            auto part = encode_piece(piece);
            ids.insert(ids.end(), part.begin(), part.end());
        }
        return ids;
    }

    long count(std::string_view text) const {
        long total = 0;
        for (const auto& piece : cl100k_pre_tokenize(text)) total += static_cast<long>(encode_piece(piece).size());
        return total;
    }

  private:
    static std::string decode_base64(std::string_view in) {
        static constexpr signed char table[] = {
            // clang-format off
            -1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,
            -1,-1,-1,-1,-1,-1,-1,-1,-1,-1,-1,62,-1,-1,-1,63,52,53,54,55,56,57,58,59,60,61,-1,-1,-1,-1,-1,-1,
            -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25,-1,-1,-1,-1,-1,
            -1,26,27,28,29,30,31,32,33,34,35,36,37,38,39,40,41,42,43,44,45,46,47,48,49,50,51,-1,-1,-1,-1,-1,
            // clang-format on
        };
        std::string out;
        int val = 0, bits = 0;
        for (char c : in) {
            if (c == '=') break;
            auto uc = static_cast<unsigned char>(c);
            if (uc >= 128 || table[uc] < 0) throw Error("invalid base64 in vocabulary");
            val = (val << 6) | table[uc];
            bits += 6;
            if (bits >= 8) {
                bits -= 8;
                out += static_cast<char>((val >> bits) & 0xFF);
            }
        }
        return out;
    }

    std::unordered_map<std::string, int> ranks_;
};

namespace detail {

// Loaded vocabularies are shared across threads and cached by path.
inline const BpeVocabulary& vocabulary_for(const std::string& path) {
    static std::mutex mu;
    static std::unordered_map<std::string, std::unique_ptr<BpeVocabulary>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(path);
    if (it == cache.end())
        it = cache.emplace(path, std::make_unique<BpeVocabulary>(BpeVocabulary::load(path))).first;
    return *it->second;
}

}  // namespace detail

inline long count_whitespace_tokens(std::string_view text) {
    long count = 0;
    bool in_token = false;
    for (char c : text) {
        bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!ws && !in_token) ++count;
        in_token = !ws;
    }
    return count;
}

inline long count_tokens(std::string_view text, const TokenBudget& budget) {
    if (budget.counter_kind == CounterKind::whitespace) return count_whitespace_tokens(text);
    if (budget.vocab_path.empty())
        throw Error("tokenizer.vocab_path is required for the bpe_cl100k counter");
    return detail::vocabulary_for(budget.vocab_path).count(text);
}

inline bool is_large(const Table& t, const TokenBudget& budget) {
    return count_tokens(linearize(t), budget) > budget.large_table_threshold;
}

}  // namespace tadre

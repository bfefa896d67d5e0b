#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>

#include "tadre/strings.hpp"

namespace tadre {

/// Lazily-typed view of one cell or literal.
struct ValueCoercion {
    enum class Kind { numeric, text };
    Kind kind = Kind::text;
    std::optional<double> parsed;
};

namespace values_detail {

inline bool strip_prefix(std::string& s, std::string_view p) {
    if (str::starts_with(s, p)) {
        s.erase(0, p.size());
        return true;
    }
    return false;
}

}  // namespace values_detail

/// Numeric coercion for semi-structured cells: trims, strips thousands
/// separators, a leading currency symbol, and a trailing percent sign, then
/// requires the remainder to parse fully as a decimal.
inline ValueCoercion coerce_numeric(std::string_view raw) {
    std::string s = str::trim(raw);
    if (s.empty()) return {};
    for (std::string_view cur : {"$", "€", "£", "¥"}) {  // $ € £ ¥
        if (values_detail::strip_prefix(s, cur)) break;
        // also negative amounts written as -$5
        if (s.size() > 1 && (s[0] == '-' || s[0] == '+') &&
            str::starts_with(std::string_view(s).substr(1), cur)) {
            s.erase(1, cur.size());
            break;
        }
    }
    s = str::replace_all(std::move(s), ",", "");
    if (!s.empty() && s.back() == '%') s.pop_back();
    s = str::trim(s);
    if (s.empty()) return {};
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) return {};
    return {ValueCoercion::Kind::numeric, v};
}

inline bool is_numeric(std::string_view s) {
    return coerce_numeric(s).kind == ValueCoercion::Kind::numeric;
}

/// Renders a double as a canonical decimal string (no trailing zeros, no
/// scientific form for integral values).
inline std::string format_number(double v) {
    if (std::isfinite(v) && std::fabs(v) < 1e15 && v == std::floor(v)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace tadre

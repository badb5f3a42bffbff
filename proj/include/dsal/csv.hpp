#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

namespace dsal {

/// Fixed formatting for every real written to a report, so output is
/// byte-stable for a given value.
inline std::string fmt_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// Shortest text that parses back to the same double (used for config echo).
inline std::string fmt_exact(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace dsal

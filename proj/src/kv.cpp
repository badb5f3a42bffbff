#include "dsal/kv.hpp"

#include "dsal/core.hpp"

#include <charconv>
#include <sstream>

namespace dsal {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::istream& is, std::string_view source) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw Error(std::string(source) + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key(trim(t.substr(0, eq)));
        if (key.empty()) throw Error(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.values_.emplace(key, std::string(trim(t.substr(eq + 1)))).second)
            throw Error(std::string(source) + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

KeyValues KeyValues::parse(std::string_view text, std::string_view source) {
    std::istringstream is{std::string(text)};
    return parse(is, source);
}

std::string KeyValues::get_string(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) throw Error("missing key '" + std::string(key) + "'");
    return it->second;
}

std::string KeyValues::get_string(std::string_view key, std::string fallback) const {
    const auto it = values_.find(std::string(key));
    return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_real(std::string_view key) const {
    const std::string v = get_string(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw Error("key '" + std::string(key) + "': expected a number, got '" + v + "'");
    return out;
}

double KeyValues::get_real(std::string_view key, double fallback) const {
    return contains(key) ? get_real(key) : fallback;
}

long long KeyValues::get_int(std::string_view key) const {
    const std::string v = get_string(key);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw Error("key '" + std::string(key) + "': expected an integer, got '" + v + "'");
    return out;
}

long long KeyValues::get_int(std::string_view key, long long fallback) const {
    return contains(key) ? get_int(key) : fallback;
}

bool KeyValues::get_bool(std::string_view key, bool fallback) const {
    if (!contains(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw Error("key '" + std::string(key) + "': expected a boolean, got '" + v + "'");
}

KeyValues KeyValues::section(std::string_view prefix) const {
    KeyValues out;
    for (const auto& [k, v] : values_)
        if (k.size() > prefix.size() && std::string_view(k).substr(0, prefix.size()) == prefix)
            out.values_.emplace(k.substr(prefix.size()), v);
    return out;
}

}  // namespace dsal

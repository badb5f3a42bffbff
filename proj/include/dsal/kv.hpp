#pragma once

#include <istream>
#include <map>
#include <string>
#include <string_view>

namespace dsal {

/// Flat `key=value` text. Blank lines and `#` comments are skipped, and
/// whitespace around keys and values is trimmed. Keys are unique; a key may
/// carry dotted section prefixes (`train.epochs`).
class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(std::istream& is, std::string_view source = "<input>");
    static KeyValues parse(std::string_view text, std::string_view source = "<input>");

    bool contains(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }
    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

    std::string get_string(std::string_view key) const;
    std::string get_string(std::string_view key, std::string fallback) const;
    double get_real(std::string_view key) const;
    double get_real(std::string_view key, double fallback) const;
    long long get_int(std::string_view key) const;
    long long get_int(std::string_view key, long long fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;

    /// Keys starting with `prefix`, with the prefix removed.
    KeyValues section(std::string_view prefix) const;

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace dsal

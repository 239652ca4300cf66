#pragma once

// Small string helpers shared across modules.

#include <string>
#include <string_view>
#include <vector>

namespace mmagent {

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Strips ASCII whitespace at both ends; interior whitespace is preserved.
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
/// Whitespace-delimited tokens (runs of ASCII whitespace separate tokens).
std::vector<std::string_view> split_whitespace(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace mmagent

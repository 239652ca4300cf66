#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmagent {

using Duration = std::chrono::nanoseconds;

/// Milliseconds as a floating value; the unit used in every persisted log.
inline double to_ms(Duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
}

inline Duration from_ms(double ms) {
    return std::chrono::duration_cast<Duration>(std::chrono::duration<double, std::milli>(ms));
}

enum class ToolKind : std::uint8_t { Search, Perceive, Code };

inline constexpr std::array<ToolKind, 3> kAllTools{ToolKind::Search, ToolKind::Perceive, ToolKind::Code};

/// Display name used in prompts and plans: "Search", "Perceive", "Code".
std::string_view tool_name(ToolKind kind);
/// Tag word used in the control-token grammar: "search", "perceive", "code".
std::string_view tool_tag(ToolKind kind);
/// Case-insensitive lookup by name; surrounding whitespace ignored.
std::optional<ToolKind> parse_tool_name(std::string_view name);

/// Small fixed set of tools, iterated in canonical order.
class ToolSet {
public:
    ToolSet() = default;
    ToolSet(std::initializer_list<ToolKind> kinds) {
        for (auto k : kinds) insert(k);
    }
    static ToolSet all() { return {ToolKind::Search, ToolKind::Perceive, ToolKind::Code}; }

    void insert(ToolKind k) { bits_ |= bit(k); }
    void erase(ToolKind k) { bits_ &= static_cast<std::uint8_t>(~bit(k)); }
    bool contains(ToolKind k) const { return (bits_ & bit(k)) != 0; }
    bool empty() const { return bits_ == 0; }
    std::size_t size() const;
    bool is_subset_of(const ToolSet& other) const { return (bits_ & ~other.bits_) == 0; }
    std::vector<ToolKind> to_vector() const;

    friend bool operator==(const ToolSet&, const ToolSet&) = default;

private:
    static std::uint8_t bit(ToolKind k) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(k)); }
    std::uint8_t bits_ = 0;
};

/// Parses a comma-separated list such as "search,code". Throws std::invalid_argument
/// on unknown names.
ToolSet parse_tool_list(std::string_view csv);
std::string format_tool_list(const ToolSet& tools);

/// Opaque image handle: a local path, an http(s) URL, or a data URL.
struct ImageRef {
    std::string uri;
    friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct TaskInput {
    std::string id;
    std::optional<ImageRef> image;
    std::string question;
    std::vector<std::string> options;

    /// Question text as shown to the model, with options listed as "A. value" lines.
    std::string prompt_text() const;
};

/// Label for the option at `index`: A, B, ..., Z, then AA, AB, ...
std::string option_label(std::size_t index);

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mmagent

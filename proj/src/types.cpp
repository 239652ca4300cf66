#include "mmagent/types.hpp"

#include "mmagent/text.hpp"

#include <bit>

namespace mmagent {

std::string_view tool_name(ToolKind kind) {
    switch (kind) {
        case ToolKind::Search: return "Search";
        case ToolKind::Perceive: return "Perceive";
        case ToolKind::Code: return "Code";
    }
    return "?";
}

std::string_view tool_tag(ToolKind kind) {
    switch (kind) {
        case ToolKind::Search: return "search";
        case ToolKind::Perceive: return "perceive";
        case ToolKind::Code: return "code";
    }
    return "?";
}

std::optional<ToolKind> parse_tool_name(std::string_view name) {
    const std::string lowered = to_lower(trim(name));
    for (auto kind : kAllTools) {
        if (lowered == tool_tag(kind)) return kind;
    }
    return std::nullopt;
}

std::size_t ToolSet::size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<ToolKind> ToolSet::to_vector() const {
    std::vector<ToolKind> out;
    for (auto k : kAllTools) {
        if (contains(k)) out.push_back(k);
    }
    return out;
}

ToolSet parse_tool_list(std::string_view csv) {
    ToolSet set;
    for (const auto& item : split(csv, ',')) {
        if (trim(item).empty()) continue;
        auto kind = parse_tool_name(item);
        if (!kind) throw std::invalid_argument("unknown tool '" + std::string(trim(item)) + "'");
        set.insert(*kind);
    }
    return set;
}

std::string format_tool_list(const ToolSet& tools) {
    std::string out;
    for (auto k : tools.to_vector()) {
        if (!out.empty()) out += ",";
        out += tool_tag(k);
    }
    return out;
}

std::string option_label(std::size_t index) {
    std::string label;
    std::size_t n = index + 1;
    while (n > 0) {
        --n;
        label.insert(label.begin(), static_cast<char>('A' + n % 26));
        n /= 26;
    }
    return label;
}

std::string TaskInput::prompt_text() const {
    if (options.empty()) return question;
    std::string out = question;
    out += "\nOptions:";
    for (std::size_t i = 0; i < options.size(); ++i) {
        out += "\n" + option_label(i) + ". " + options[i];
    }
    return out;
}

}  // namespace mmagent

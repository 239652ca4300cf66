#include "mmagent/navigator.hpp"

#include "mmagent/text.hpp"

#include <nlohmann/json.hpp>

namespace mmagent {

using nlohmann::json;

std::optional<ParsedPlan> parse_plan_reply(std::string_view reply) {
    // Fences and surrounding prose fall outside the outermost braces.
    const auto open = reply.find('{');
    const auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;

    json doc;
    try {
        doc = json::parse(reply.substr(open, close - open + 1));
    } catch (const json::parse_error&) {
        return std::nullopt;
    }
    if (!doc.is_object() || !doc.contains("selected_tools") || !doc.contains("global_plan")) return std::nullopt;
    const auto& tools = doc["selected_tools"];
    const auto& guidance = doc["global_plan"];
    if (!guidance.is_string()) return std::nullopt;

    ParsedPlan parsed;
    parsed.global_plan = guidance.get<std::string>();
    if (tools.is_array()) {
        for (const auto& t : tools) {
            if (!t.is_string()) return std::nullopt;
            parsed.tool_names.push_back(t.get<std::string>());
        }
    } else if (tools.is_string()) {
        for (const auto& t : split(tools.get<std::string>(), ','))
            if (!trim(t).empty()) parsed.tool_names.emplace_back(trim(t));
    } else if (!tools.is_null()) {
        return std::nullopt;
    }
    return parsed;
}

std::string render_navigator_prompt(const TaskInput& task, const ToolSet& pool, const PromptAssets& prompts) {
    static constexpr ToolKind kCatalogOrder[] = {ToolKind::Search, ToolKind::Code, ToolKind::Perceive};
    std::string catalog;
    int n = 0;
    for (auto kind : kCatalogOrder) {
        if (!pool.contains(kind)) continue;
        if (n) catalog += "\n";
        catalog += std::to_string(++n) + ". " + prompts.get("navigator_tool_" + std::string(tool_tag(kind)));
    }
    if (n == 0) catalog = "(none)";
    return prompts.render("navigator", {{"question", task.prompt_text()}, {"tool_catalog", catalog}});
}

GlobalPlan plan(const TaskInput& task, const ToolSet& pool, Model& model, const PromptAssets& prompts,
                const NavigatorOptions& options) {
    GlobalPlan result;
    std::vector<Message> messages;
    try {
        messages.push_back(Message::user(render_navigator_prompt(task, pool, prompts), task.image));
        const int attempts = std::max(1, options.max_attempts);
        for (int attempt = 1; attempt <= attempts; ++attempt) {
            if (attempt > 1) {
                messages.push_back(Message::assistant(result.raw));
                messages.push_back(Message::user(prompts.get("navigator_repair")));
            }
            result.raw = model.complete(messages, options.decoding).text;
            auto parsed = parse_plan_reply(result.raw);
            if (!parsed) {
                result.warnings.push_back("navigator reply #" + std::to_string(attempt) + " is not a valid plan");
                continue;
            }
            for (const auto& name : parsed->tool_names) {
                auto kind = parse_tool_name(name);
                if (!kind) {
                    result.warnings.push_back("dropped unknown tool '" + name + "'");
                } else if (!pool.contains(*kind)) {
                    result.warnings.push_back("dropped tool '" + std::string(tool_name(*kind)) +
                                              "' outside the offered pool");
                } else {
                    result.selected_tools.insert(*kind);
                }
            }
            result.global_plan = std::move(parsed->global_plan);
            return result;
        }
    } catch (const Error& e) {
        result.warnings.push_back(std::string("navigator call failed: ") + e.what());
    }
    result.selected_tools = pool;
    result.global_plan.clear();
    result.fallback = true;
    result.warnings.push_back("falling back to the full tool pool");
    return result;
}

}  // namespace mmagent

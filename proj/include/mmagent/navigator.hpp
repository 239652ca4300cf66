#pragma once

#include "mmagent/gateway.hpp"
#include "mmagent/prompts.hpp"
#include "mmagent/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmagent {

/// Global planning output: the toolkit subset plus free-text guidance.
struct GlobalPlan {
    ToolSet selected_tools;
    std::string global_plan;
    /// Verbatim model reply the plan was taken from.
    std::string raw;
    /// True when no reply could be parsed and the whole pool was granted.
    bool fallback = false;
    std::vector<std::string> warnings;
};

struct NavigatorOptions {
    DecodingConfig decoding = DecodingConfig::preset_a();
    /// Model calls before falling back: the first ask plus one "JSON only" re-prompt.
    int max_attempts = 2;
};

struct ParsedPlan {
    std::vector<std::string> tool_names;
    std::string global_plan;
};

/// Extracts the JSON object from a reply that may carry code fences or prose.
/// Returns nullopt when no object with the two keys can be parsed.
std::optional<ParsedPlan> parse_plan_reply(std::string_view reply);

/// Renders the navigator prompt for `pool`.
std::string render_navigator_prompt(const TaskInput& task, const ToolSet& pool, const PromptAssets& prompts);

/// Never throws: unparseable replies and gateway failures both end in
/// GlobalPlan{pool, "", fallback=true} with the cause in `warnings`.
GlobalPlan plan(const TaskInput& task, const ToolSet& pool, Model& model, const PromptAssets& prompts,
                const NavigatorOptions& options = {});

}  // namespace mmagent

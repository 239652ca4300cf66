#pragma once

// plan -> execute -> synthesize for one task.

#include "mmagent/code/code_tool.hpp"
#include "mmagent/executor.hpp"
#include "mmagent/navigator.hpp"
#include "mmagent/search/search_tool.hpp"
#include "mmagent/synthesizer.hpp"

#include <map>
#include <nlohmann/json.hpp>

namespace mmagent {

inline constexpr int kDefaultMaxTurns = 10;

struct PipelineConfig {
    ToolSet pool = ToolSet::all();
    int max_turns = kDefaultMaxTurns;
    DecodingConfig decoding = DecodingConfig::preset_a();
    RetrievalConfig retrieval;
    CodeToolOptions code;
    /// Comparison arm: a single model call, no planning and no tools.
    bool direct_prompting = false;
};

/// Shared, read-only collaborators. Any of the pointers may be null; the
/// matching tool then reports itself unavailable.
struct PipelineServices {
    const PromptAssets* prompts = nullptr;
    const PassageIndex* index = nullptr;
    EmbeddingProvider* embeddings = nullptr;
    CodeExecutor* code = nullptr;
    const Clock* clock = nullptr;  // steady clock when null
};

struct ToolTiming {
    int calls = 0;
    Duration wall_time{0};
};

struct PipelineResult {
    ReasoningTrace trace;
    FinalAnswer answer;
    bool direct_prompting = false;
    Duration total_latency{0};
    /// Sum of gateway-reported call durations, including calls made by tools.
    Duration model_time{0};
    int model_calls = 0;
    std::map<ToolKind, ToolTiming> tool_time;
};

/// Handlers for all three tools, bound to `model` and `services`.
ToolRegistry make_tool_registry(Model& model, const PipelineConfig& config, const PipelineServices& services);

PipelineResult run_pipeline(const TaskInput& task, Model& model, const PipelineConfig& config,
                            const PipelineServices& services);

/// Per-task trace log. Keys are ordered, so equal runs serialize identically.
nlohmann::ordered_json trace_log(const PipelineResult& result);

}  // namespace mmagent

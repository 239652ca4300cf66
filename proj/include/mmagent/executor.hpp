#pragma once

// The budgeted reason -> invoke -> inject loop.
//
// Each turn the model continues the executor prompt until it either closes a
// tool tag (generation stops on the closer) or finishes without one. The
// first complete invocation is dispatched, its result is appended as
// "<result> ... </result>", and the next turn sees the extended context.

#include "mmagent/clock.hpp"
#include "mmagent/gateway.hpp"
#include "mmagent/navigator.hpp"
#include "mmagent/prompts.hpp"

#include <array>
#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mmagent {

struct ToolResult {
    ToolKind tool = ToolKind::Search;
    bool ok = false;
    /// Answer text when ok, otherwise a readable error description.
    std::string content;
    Duration wall_time{0};
    /// Set when the tool rewrote its input before succeeding (code revisions).
    std::optional<std::string> effective_payload;
    /// Attempts that failed before the reported one.
    int failed_attempts = 0;

    static ToolResult success(ToolKind tool, std::string content) {
        return {tool, true, std::move(content), Duration{0}, std::nullopt, 0};
    }
    static ToolResult failure(ToolKind tool, std::string message) {
        return {tool, false, std::move(message), Duration{0}, std::nullopt, 0};
    }
};

enum class StepStatus { ToolOk, ToolError, FinalCandidate };
std::string_view step_status_name(StepStatus s);

struct ToolCall {
    ToolKind tool;
    std::string payload;
};

struct Step {
    int index = 0;  // 1-based
    std::string reasoning;
    std::optional<ToolCall> invocation;
    std::optional<ToolResult> result;
    StepStatus status = StepStatus::FinalCandidate;
    /// Model output for this turn, verbatim.
    std::string raw_output;
    Duration model_time{0};
};

enum class Termination { FinalAnswer, BudgetExhausted };
std::string_view termination_name(Termination t);

struct ReasoningTrace {
    TaskInput task;
    GlobalPlan plan;
    std::vector<Step> steps;
    Termination terminated_by = Termination::FinalAnswer;
    int turns_used = 0;
};

struct ToolContext {
    const TaskInput& task;
    /// Rendered reasoning so far, including the current step's reasoning text.
    std::string_view prior_reasoning;
};

using ToolHandler = std::function<ToolResult(std::string_view payload, const ToolContext& context)>;

/// Tool handlers by kind. Dispatch counts are kept for auditing.
class ToolRegistry {
public:
    void register_tool(ToolKind kind, ToolHandler handler);
    bool has(ToolKind kind) const;
    /// Exceptions thrown by a handler become a failed ToolResult.
    ToolResult dispatch(ToolKind kind, std::string_view payload, const ToolContext& context) const;
    int dispatch_count(ToolKind kind) const;

private:
    static std::size_t slot(ToolKind k) { return static_cast<std::size_t>(k); }
    std::array<ToolHandler, 3> handlers_;
    // Behind a pointer so the registry stays movable.
    std::shared_ptr<std::array<std::atomic<int>, 3>> counts_ = std::make_shared<std::array<std::atomic<int>, 3>>();
};

struct ExecutorOptions {
    int max_turns = 10;
    DecodingConfig decoding = DecodingConfig::preset_a();
    const Clock* clock = nullptr;  // steady clock when null
};

/// Whether the executor runs without tools: the navigator chose none and did
/// not fall back.
bool is_direct_plan(const GlobalPlan& plan);

/// Serialization of finished steps, used as the {previous_reasoning} slot.
std::string render_history(std::span<const Step> history);
std::string render_step(const Step& step);

std::vector<Message> render_executor_prompt(const TaskInput& task, const GlobalPlan& plan,
                                            std::span<const Step> history, const PromptAssets& prompts);

ReasoningTrace run_executor(const TaskInput& task, const GlobalPlan& plan, const ToolRegistry& tools, Model& model,
                            const PromptAssets& prompts, const ExecutorOptions& options = {});

}  // namespace mmagent

#include "mmagent/executor.hpp"

#include "mmagent/protocol.hpp"

namespace mmagent {

std::string_view step_status_name(StepStatus s) {
    switch (s) {
        case StepStatus::ToolOk: return "tool_ok";
        case StepStatus::ToolError: return "tool_error";
        case StepStatus::FinalCandidate: return "final_candidate";
    }
    return "?";
}

std::string_view termination_name(Termination t) {
    return t == Termination::FinalAnswer ? "final_answer" : "budget_exhausted";
}

void ToolRegistry::register_tool(ToolKind kind, ToolHandler handler) { handlers_[slot(kind)] = std::move(handler); }

bool ToolRegistry::has(ToolKind kind) const { return static_cast<bool>(handlers_[slot(kind)]); }

ToolResult ToolRegistry::dispatch(ToolKind kind, std::string_view payload, const ToolContext& context) const {
    const auto& handler = handlers_[slot(kind)];
    if (!handler) return ToolResult::failure(kind, "tool '" + std::string(tool_name(kind)) + "' is not available");
    (*counts_)[slot(kind)].fetch_add(1);
    try {
        ToolResult r = handler(payload, context);
        r.tool = kind;
        if (r.ok && r.content.empty()) {
            r.ok = false;
            r.content = "tool '" + std::string(tool_name(kind)) + "' returned no content";
        }
        return r;
    } catch (const std::exception& e) {
        return ToolResult::failure(kind, e.what());
    }
}

int ToolRegistry::dispatch_count(ToolKind kind) const { return (*counts_)[slot(kind)].load(); }

bool is_direct_plan(const GlobalPlan& plan) { return plan.selected_tools.empty(); }

std::string render_step(const Step& step) {
    std::string out = step.reasoning;
    if (step.invocation) {
        out += render_invocation(step.invocation->tool, step.invocation->payload);
        out += "\n<result> ";
        if (step.result) out += step.result->content;
        out += " </result>\n";
    }
    return out;
}

std::string render_history(std::span<const Step> history) {
    std::string out;
    for (const auto& step : history) out += render_step(step);
    return out;
}

std::vector<Message> render_executor_prompt(const TaskInput& task, const GlobalPlan& plan,
                                            std::span<const Step> history, const PromptAssets& prompts) {
    Slots slots{
        {"question", task.prompt_text()},
        {"guidance", plan.global_plan.empty() ? std::string() : "\nGlobal Plan: \n" + plan.global_plan + "\n"},
        {"previous_reasoning", render_history(history)},
    };
    if (is_direct_plan(plan)) return {Message::user(prompts.render("executor_direct", slots), task.image)};

    std::string descriptions;
    std::string usage;
    std::string examples;
    int n = 0;
    for (auto kind : plan.selected_tools.to_vector()) {
        const std::string tag(tool_tag(kind));
        if (n) {
            descriptions += "\n";
            usage += " ";
            examples += "\n\n";
        }
        descriptions += std::to_string(++n) + ". " + prompts.get("executor_tool_" + tag);
        usage += prompts.get("executor_usage_" + tag);
        examples += prompts.get("example_" + tag);
    }
    slots["tool_descriptions"] = std::move(descriptions);
    slots["tool_usage"] = std::move(usage);
    slots["tool_examples"] = std::move(examples);
    return {Message::user(prompts.render("executor", slots), task.image)};
}

namespace {

Step tool_error(Step step, ToolKind kind, std::string payload, std::string message) {
    step.invocation = ToolCall{kind, std::move(payload)};
    step.result = ToolResult::failure(kind, std::move(message));
    step.status = StepStatus::ToolError;
    return step;
}

}  // namespace

ReasoningTrace run_executor(const TaskInput& task, const GlobalPlan& plan, const ToolRegistry& tools, Model& model,
                            const PromptAssets& prompts, const ExecutorOptions& options) {
    if (options.max_turns < 1) throw std::invalid_argument("max_turns must be at least 1");
    const Clock& clock = options.clock ? *options.clock : steady_clock();
    const bool direct = is_direct_plan(plan);

    DecodingConfig decoding = options.decoding;
    decoding.stop_sequences.clear();
    if (!direct) {
        for (auto kind : kAllTools) decoding.stop_sequences.push_back(close_tag(kind));
    }

    ReasoningTrace trace{task, plan, {}, Termination::BudgetExhausted, 0};
    for (int turn = 1; turn <= options.max_turns; ++turn) {
        const auto messages = render_executor_prompt(task, plan, trace.steps, prompts);
        Completion completion = model.complete(messages, decoding);

        Step step;
        step.index = turn;
        step.raw_output = completion.text;
        step.model_time = completion.model_time;

        const std::string& text = completion.text;
        const Segment* first = nullptr;
        std::vector<Segment> segments;
        if (!direct) {
            segments = scan(text);
            for (const auto& seg : segments) {
                if (seg.kind != SegmentKind::Reasoning) {
                    first = &seg;
                    break;
                }
            }
        }

        if (first == nullptr) {
            step.reasoning = text;
            step.status = StepStatus::FinalCandidate;
            trace.steps.push_back(std::move(step));
            trace.terminated_by = Termination::FinalAnswer;
            break;
        }

        const ToolKind kind = *first->tool;
        step.reasoning = text.substr(0, first->span.begin);
        if (first->kind == SegmentKind::UnterminatedInvocation) {
            step = tool_error(std::move(step), kind, first->text,
                              "unterminated " + open_tag(kind) + " invocation: missing " + close_tag(kind));
        } else if (!plan.selected_tools.contains(kind) || !tools.has(kind)) {
            step = tool_error(std::move(step), kind, first->text,
                              "tool '" + std::string(tool_name(kind)) + "' is not available for this task");
        } else if (first->text.empty()) {
            step = tool_error(std::move(step), kind, first->text, "empty tool query");
        } else {
            // Anything after the first invocation is discarded; the model
            // continues from the injected result next turn.
            const std::string prior = render_history(trace.steps) + step.reasoning;
            const auto started = clock.now();
            ToolResult result = tools.dispatch(kind, first->text, ToolContext{task, prior});
            result.wall_time = clock.now() - started;
            step.invocation = ToolCall{kind, first->text};
            step.status = result.ok ? StepStatus::ToolOk : StepStatus::ToolError;
            step.result = std::move(result);
        }
        trace.steps.push_back(std::move(step));
    }
    trace.turns_used = static_cast<int>(trace.steps.size());
    return trace;
}

}  // namespace mmagent

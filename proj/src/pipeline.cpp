#include "mmagent/pipeline.hpp"

#include "mmagent/tool_perceive.hpp"

namespace mmagent {

using nlohmann::ordered_json;

ToolRegistry make_tool_registry(Model& model, const PipelineConfig& config, const PipelineServices& services) {
    const PromptAssets& prompts = *services.prompts;
    ToolRegistry registry;

    registry.register_tool(ToolKind::Perceive, [&model, &prompts, decoding = perception_decoding(config.decoding)](
                                                   std::string_view payload, const ToolContext& ctx) {
        return perceive(ctx.task.image, payload, model, prompts, decoding);
    });

    auto search = std::make_shared<SearchTool>(services.index, services.embeddings, config.retrieval, prompts,
                                               config.decoding);
    registry.register_tool(ToolKind::Search, [search, &model](std::string_view payload, const ToolContext& ctx) {
        return search->dispatch(payload, ctx.task, ctx.prior_reasoning, model);
    });

    registry.register_tool(ToolKind::Code, [&model, &prompts, exec = services.code, options = config.code](
                                               std::string_view payload, const ToolContext& ctx) {
        if (exec == nullptr) return ToolResult::failure(ToolKind::Code, "code execution is not configured");
        const std::string question = ctx.task.prompt_text();
        return run_with_feedback(payload, CodeContext{question, ctx.prior_reasoning}, model, *exec, prompts, options)
            .first;
    });
    return registry;
}

namespace {

ReasoningTrace run_direct(const TaskInput& task, Model& model, const PipelineConfig& config,
                          const PromptAssets& prompts, FinalAnswer& answer) {
    DecodingConfig d = config.decoding;
    d.stop_sequences.clear();
    const std::vector<Message> messages{
        Message::user(prompts.render("direct", {{"question", task.prompt_text()}}), task.image)};
    Completion c = model.complete(messages, d);

    ReasoningTrace trace;
    trace.task = task;
    Step step;
    step.index = 1;
    step.reasoning = c.text;
    step.raw_output = c.text;
    step.model_time = c.model_time;
    step.status = StepStatus::FinalCandidate;
    trace.steps.push_back(std::move(step));
    trace.terminated_by = Termination::FinalAnswer;
    trace.turns_used = 1;

    answer.raw = c.text;
    answer.trace_digest = c.text;
    if (auto index = map_option(c.text, task.options)) {
        answer.chosen_option = option_label(*index);
        answer.text = *answer.chosen_option;
    } else {
        if (!task.options.empty()) answer.warnings.push_back("reply does not name exactly one option; kept as-is");
        answer.text = clean_reply(c.text);
    }
    return trace;
}

}  // namespace

PipelineResult run_pipeline(const TaskInput& task, Model& model, const PipelineConfig& config,
                            const PipelineServices& services) {
    if (services.prompts == nullptr) throw std::invalid_argument("pipeline needs prompt assets");
    const Clock& clock = services.clock ? *services.clock : steady_clock();
    const PromptAssets& prompts = *services.prompts;
    MeteredModel metered(model);

    PipelineResult result;
    result.direct_prompting = config.direct_prompting;
    const auto started = clock.now();

    if (config.direct_prompting) {
        result.trace = run_direct(task, metered, config, prompts, result.answer);
    } else {
        NavigatorOptions nav;
        nav.decoding = config.decoding;
        nav.decoding.stop_sequences.clear();
        GlobalPlan global = plan(task, config.pool, metered, prompts, nav);

        const ToolRegistry registry = make_tool_registry(metered, config, services);
        ExecutorOptions exec;
        exec.max_turns = config.max_turns;
        exec.decoding = config.decoding;
        exec.clock = &clock;
        result.trace = run_executor(task, global, registry, metered, prompts, exec);
        result.answer = synthesize(task, result.trace, metered, prompts, config.decoding);
    }

    result.total_latency = clock.now() - started;
    result.model_time = metered.model_time();
    result.model_calls = metered.calls();
    for (const auto& step : result.trace.steps) {
        if (!step.result || step.status == StepStatus::FinalCandidate) continue;
        auto& t = result.tool_time[step.result->tool];
        ++t.calls;
        t.wall_time += step.result->wall_time;
    }
    return result;
}

ordered_json trace_log(const PipelineResult& result) {
    const auto& trace = result.trace;
    const auto& task = trace.task;

    ordered_json task_json;
    task_json["id"] = task.id;
    task_json["question"] = task.question;
    task_json["image"] = task.image ? ordered_json(task.image->uri) : ordered_json(nullptr);
    task_json["options"] = task.options;

    ordered_json plan_json;
    ordered_json tools = ordered_json::array();
    for (auto k : trace.plan.selected_tools.to_vector()) tools.push_back(tool_name(k));
    plan_json["selected_tools"] = std::move(tools);
    plan_json["global_plan"] = trace.plan.global_plan;
    plan_json["raw"] = trace.plan.raw;
    plan_json["fallback"] = trace.plan.fallback;
    plan_json["warnings"] = trace.plan.warnings;

    ordered_json steps = ordered_json::array();
    for (const auto& s : trace.steps) {
        ordered_json j;
        j["index"] = s.index;
        j["status"] = step_status_name(s.status);
        j["reasoning"] = s.reasoning;
        if (s.invocation) {
            j["invocation"] = {{"tool", tool_name(s.invocation->tool)}, {"payload", s.invocation->payload}};
        } else {
            j["invocation"] = nullptr;
        }
        if (s.result) {
            ordered_json r;
            r["tool"] = tool_name(s.result->tool);
            r["ok"] = s.result->ok;
            r["content"] = s.result->content;
            r["wall_time_ms"] = to_ms(s.result->wall_time);
            r["failed_attempts"] = s.result->failed_attempts;
            r["effective_payload"] =
                s.result->effective_payload ? ordered_json(*s.result->effective_payload) : ordered_json(nullptr);
            j["result"] = std::move(r);
        } else {
            j["result"] = nullptr;
        }
        j["raw_output"] = s.raw_output;
        j["model_time_ms"] = to_ms(s.model_time);
        steps.push_back(std::move(j));
    }

    ordered_json answer;
    answer["text"] = result.answer.text;
    answer["chosen_option"] =
        result.answer.chosen_option ? ordered_json(*result.answer.chosen_option) : ordered_json(nullptr);
    answer["raw"] = result.answer.raw;
    answer["warnings"] = result.answer.warnings;
    answer["trace_digest"] = result.answer.trace_digest;

    ordered_json tool_times = ordered_json::object();
    for (const auto& [kind, t] : result.tool_time)
        tool_times[std::string(tool_name(kind))] = {{"calls", t.calls}, {"wall_time_ms", to_ms(t.wall_time)}};

    ordered_json log;
    log["task"] = std::move(task_json);
    log["mode"] = result.direct_prompting ? "direct" : "agent";
    log["plan"] = std::move(plan_json);
    log["steps"] = std::move(steps);
    log["terminated_by"] = termination_name(trace.terminated_by);
    log["turns_used"] = trace.turns_used;
    log["answer"] = std::move(answer);
    log["timings"] = {{"total_latency_ms", to_ms(result.total_latency)},
                      {"model_time_ms", to_ms(result.model_time)},
                      {"model_calls", result.model_calls},
                      {"tools", std::move(tool_times)}};
    return log;
}

}  // namespace mmagent

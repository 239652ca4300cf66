#include "mmagent/code/code_tool.hpp"

#include "mmagent/protocol.hpp"
#include "mmagent/text.hpp"

namespace mmagent {

std::string extract_code(std::string_view reply) {
    for (const auto& seg : scan(reply)) {
        if (seg.tool == ToolKind::Code && seg.kind != SegmentKind::Reasoning) return seg.text;
    }
    const auto fence = reply.find("```");
    if (fence != std::string_view::npos) {
        auto body_start = reply.find('\n', fence);
        if (body_start != std::string_view::npos) {
            ++body_start;
            const auto close = reply.find("```", body_start);
            return std::string(trim(reply.substr(body_start, close == std::string_view::npos ? reply.npos
                                                                                             : close - body_start)));
        }
    }
    return std::string(trim(reply));
}

std::string describe_failure(const ExecutionResult& result) {
    if (result.killed_by_timeout) return result.stderr_text.empty() ? "execution timed out" : result.stderr_text;
    if (result.ok) return "The code ran without errors but printed nothing. Print the final result.";
    auto err = trim(result.stderr_text);
    if (!err.empty()) return std::string(err);
    return "execution failed with exit status " + std::to_string(result.exit_status);
}

std::pair<ToolResult, RevisionHistory> run_with_feedback(std::string_view snippet, const CodeContext& context,
                                                         Model& model, CodeExecutor& executor,
                                                         const PromptAssets& prompts, const CodeToolOptions& options) {
    if (options.max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    RevisionHistory history;
    std::string current(trim(snippet));
    if (current.empty()) return {ToolResult::failure(ToolKind::Code, "empty tool query"), history};

    DecodingConfig decoding = options.decoding;
    decoding.stop_sequences = {close_tag(ToolKind::Code)};
    bool nudged = false;
    std::string abort_note;

    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
        auto result = executor.execute(current, options.limits);
        const bool valid = result.ok && !trim(result.stdout_text).empty();
        history.attempts.push_back({current, result});
        if (valid) {
            history.final_ok = true;
            ToolResult tr = ToolResult::success(ToolKind::Code, std::string(trim(result.stdout_text)));
            tr.failed_attempts = attempt;
            if (attempt > 0) tr.effective_payload = current;
            return {std::move(tr), std::move(history)};
        }
        if (attempt == options.max_retries) break;
        if (result.ok) {
            if (nudged) break;
            nudged = true;
        }

        const auto prompt = prompts.render("code_revision", {{"question", std::string(context.question)},
                                                             {"code", current},
                                                             {"error", describe_failure(result)}});
        const std::vector<Message> messages{Message::user(prompt)};
        std::string revised;
        try {
            revised = extract_code(model.complete(messages, decoding).text);
        } catch (const Error& e) {
            abort_note = std::string("\n(revision request failed: ") + e.what() + ")";
            break;
        }
        if (revised.empty()) {
            abort_note = "\n(the revision reply contained no code)";
            break;
        }
        current = std::move(revised);
    }

    const auto& last = history.attempts.back().result;
    history.final_ok = last.ok;
    ToolResult tr = ToolResult::failure(
        ToolKind::Code, last.ok ? "code ran but printed nothing" + abort_note : describe_failure(last) + abort_note);
    tr.failed_attempts = static_cast<int>(history.attempts.size());
    return {std::move(tr), std::move(history)};
}

}  // namespace mmagent

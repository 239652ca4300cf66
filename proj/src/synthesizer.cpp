#include "mmagent/synthesizer.hpp"

#include "mmagent/protocol.hpp"
#include "mmagent/text.hpp"

#include <cctype>
#include <set>

namespace mmagent {

namespace {

std::string first_line(std::string_view s) {
    s = trim(s);
    return std::string(s.substr(0, s.find('\n')));
}

void append_note(std::string& out, const std::string& note) {
    if (!out.empty() && out.back() != '\n') out += '\n';
    out += "[note: " + note + "]\n";
}

bool is_label_punct(char c) {
    return c == '(' || c == ')' || c == '.' || c == ',' || c == ':' || c == '[' || c == ']' || c == '*' ||
           c == '"' || c == '\'' || is_ascii_space(c);
}

std::string strip_label_punct(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_label_punct(s[b])) ++b;
    while (e > b && is_label_punct(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

}  // namespace

std::string build_digest(const ReasoningTrace& trace) {
    std::string out;
    for (const auto& step : trace.steps) {
        switch (step.status) {
            case StepStatus::FinalCandidate:
                out += step.reasoning;
                break;
            case StepStatus::ToolOk: {
                const auto& r = *step.result;
                out += step.reasoning;
                if (r.failed_attempts > 0)
                    append_note(out, std::to_string(r.failed_attempts) + " failed " +
                                         std::string(tool_name(r.tool)) + " attempt(s) omitted");
                out += render_invocation(step.invocation->tool, r.effective_payload.value_or(step.invocation->payload));
                out += "\n<result> " + r.content + " </result>\n";
                break;
            }
            case StepStatus::ToolError:
                out += step.reasoning;
                append_note(out, std::string(tool_name(step.invocation->tool)) +
                                     " call failed: " + first_line(step.result ? step.result->content : ""));
                break;
        }
    }
    return out;
}

std::string clean_reply(std::string_view reply) {
    auto s = trim(reply);
    for (std::string_view prefix : {"the final answer is", "final answer:", "the answer is", "answer:"}) {
        if (starts_with_icase(s, prefix)) {
            s = trim(s.substr(prefix.size()));
            break;
        }
    }
    return std::string(s);
}

std::optional<std::size_t> map_option(std::string_view reply, const std::vector<std::string>& options) {
    if (options.empty()) return std::nullopt;
    const auto cleaned = clean_reply(reply);
    const auto bare = strip_label_punct(cleaned);

    for (std::size_t i = 0; i < options.size(); ++i)
        if (bare == option_label(i)) return i;

    for (std::size_t i = 0; i < options.size(); ++i)
        if (iequals(bare, trim(options[i]))) return i;

    const auto lowered = to_lower(cleaned);
    std::set<std::size_t> by_value;
    for (std::size_t i = 0; i < options.size(); ++i) {
        const auto value = to_lower(trim(options[i]));
        if (!value.empty() && lowered.find(value) != std::string::npos) by_value.insert(i);
    }
    if (by_value.size() == 1) return *by_value.begin();
    if (by_value.size() > 1) return std::nullopt;

    std::set<std::size_t> by_label;
    std::string token;
    auto flush = [&] {
        for (std::size_t i = 0; i < options.size(); ++i)
            if (token == option_label(i)) by_label.insert(i);
        token.clear();
    };
    for (char c : cleaned) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token += c;
        } else {
            flush();
        }
    }
    flush();
    if (by_label.size() == 1) return *by_label.begin();
    return std::nullopt;
}

FinalAnswer synthesize(const TaskInput& task, const ReasoningTrace& trace, Model& model, const PromptAssets& prompts,
                       const DecodingConfig& decoding) {
    FinalAnswer answer;
    answer.trace_digest = build_digest(trace);
    const auto prompt =
        prompts.render("synthesizer", {{"question", task.prompt_text()}, {"reasoning", answer.trace_digest}});
    const std::vector<Message> messages{Message::user(prompt, task.image)};
    DecodingConfig d = decoding;
    d.stop_sequences.clear();
    answer.raw = model.complete(messages, d).text;

    if (!task.options.empty()) {
        if (auto index = map_option(answer.raw, task.options)) {
            answer.chosen_option = option_label(*index);
            answer.text = *answer.chosen_option;
            return answer;
        }
        answer.warnings.push_back("reply does not name exactly one option; kept as-is");
    }
    answer.text = clean_reply(answer.raw);
    return answer;
}

}  // namespace mmagent

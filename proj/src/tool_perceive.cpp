#include "mmagent/tool_perceive.hpp"

#include "mmagent/text.hpp"

namespace mmagent {

DecodingConfig perception_decoding(const DecodingConfig& base) {
    DecodingConfig d = base;
    d.temperature = 0.1;
    d.top_p = 0.9;
    d.max_new_tokens = 256;
    d.stop_sequences.clear();
    return d;
}

ToolResult perceive(const std::optional<ImageRef>& image, std::string_view subquestion, Model& model,
                    const PromptAssets& prompts, const DecodingConfig& decoding) {
    const auto question = trim(subquestion);
    if (question.empty()) return ToolResult::failure(ToolKind::Perceive, "empty tool query");
    if (!image) return ToolResult::failure(ToolKind::Perceive, "perceive requires an image");

    const std::vector<Message> messages{
        Message::user(prompts.render("perceive", {{"question", std::string(question)}}), image)};
    try {
        auto completion = model.complete(messages, decoding);
        auto answer = trim(completion.text);
        if (answer.empty()) return ToolResult::failure(ToolKind::Perceive, "perception returned an empty answer");
        return ToolResult::success(ToolKind::Perceive, std::string(answer));
    } catch (const Error& e) {
        return ToolResult::failure(ToolKind::Perceive, std::string("perception call failed: ") + e.what());
    }
}

}  // namespace mmagent

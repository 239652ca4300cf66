#pragma once

#include "mmagent/executor.hpp"

namespace mmagent {

/// Decoding for visual sub-questions: temperature 0.1, top-p 0.9, at most 256 new tokens.
DecodingConfig perception_decoding(const DecodingConfig& base = DecodingConfig::preset_a());

/// Answers a focused visual sub-question by asking the backbone model again,
/// with the task image attached. Exactly one model call; no other subsystem.
ToolResult perceive(const std::optional<ImageRef>& image, std::string_view subquestion, Model& model,
                    const PromptAssets& prompts, const DecodingConfig& decoding = perception_decoding());

}  // namespace mmagent

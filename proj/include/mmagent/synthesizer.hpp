#pragma once

#include "mmagent/executor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mmagent {

struct FinalAnswer {
    std::string text;
    /// Option label ("A", "B", ...) when the reply mapped onto the task's options.
    std::optional<std::string> chosen_option;
    /// Cleaned reasoning path the synthesis prompt was built from.
    std::string trace_digest;
    /// The synthesizer's reply, verbatim.
    std::string raw;
    std::vector<std::string> warnings;
};

/// Trace with failed tool calls reduced to one-line notes: failed payloads
/// (including superseded code snippets) never appear, every successful result does.
std::string build_digest(const ReasoningTrace& trace);

/// Strips whitespace and a leading "Answer:"-style prefix.
std::string clean_reply(std::string_view reply);

/// Index of the option the reply names: exact label, then case-insensitive
/// value, then a unique value substring or unique standalone label. nullopt
/// when nothing or more than one option matches.
std::optional<std::size_t> map_option(std::string_view reply, const std::vector<std::string>& options);

/// One model call over the digest; option tasks are mapped onto their labels.
FinalAnswer synthesize(const TaskInput& task, const ReasoningTrace& trace, Model& model, const PromptAssets& prompts,
                       const DecodingConfig& decoding = DecodingConfig::preset_a());

}  // namespace mmagent

#pragma once

#include "mmagent/code/sandbox.hpp"
#include "mmagent/executor.hpp"

#include <utility>

namespace mmagent {

struct RevisionAttempt {
    std::string snippet;
    ExecutionResult result;
};

struct RevisionHistory {
    std::vector<RevisionAttempt> attempts;
    bool final_ok = false;  // last attempt ok
};

struct CodeContext {
    std::string_view question;
    std::string_view prior_reasoning;
};

struct CodeToolOptions {
    int max_retries = 3;
    ExecutionLimits limits;
    DecodingConfig decoding = DecodingConfig::preset_a();
};

/// Code from a revision reply: a <code> block (closed or not), else a fenced
/// block, else the whole reply.
std::string extract_code(std::string_view reply);

/// Error text fed back to the model for a failed execution.
std::string describe_failure(const ExecutionResult& result);

/// Executes `snippet`; on failure asks the model for a corrected snippet and
/// retries, at most `max_retries` times. A run counts as valid when it exits
/// cleanly and prints something; a clean run with no output gets a single
/// "print the result" revision. SandboxUnavailable propagates.
std::pair<ToolResult, RevisionHistory> run_with_feedback(std::string_view snippet, const CodeContext& context,
                                                         Model& model, CodeExecutor& executor,
                                                         const PromptAssets& prompts,
                                                         const CodeToolOptions& options = {});

}  // namespace mmagent

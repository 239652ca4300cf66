#pragma once

// Snippet execution in a child process.
//
// The orchestrator writes the snippet into a fresh scratch directory and runs
// the configured runner as `<runner...> <snippet path> <timeout seconds>`.
// The runner prints one JSON object as the last line of its stdout:
//   {"ok": bool, "stdout": str, "stderr": str, "duration_ms": int}
// The wall-clock limit is enforced here by killing the runner's process
// group; output caps are applied here as well.

#include "mmagent/types.hpp"

#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

namespace mmagent {

class SandboxUnavailable : public Error {
public:
    using Error::Error;
};

struct ExecutionLimits {
    Duration wall_timeout = std::chrono::seconds(10);
    std::size_t output_cap = 64 * 1024;
};

struct ExecutionResult {
    bool ok = false;  // exit_status == 0 && !killed_by_timeout
    std::string stdout_text;
    std::string stderr_text;
    int exit_status = 0;
    Duration duration{0};
    bool killed_by_timeout = false;
};

class CodeExecutor {
public:
    virtual ~CodeExecutor() = default;
    virtual ExecutionResult execute(std::string_view snippet, const ExecutionLimits& limits) = 0;
};

struct RunnerReport {
    bool ok = false;
    std::string stdout_text;
    std::string stderr_text;
    std::int64_t duration_ms = 0;
};

/// Parses the last non-empty line of the runner's stdout; nullopt if it is
/// not a well-formed report.
std::optional<RunnerReport> parse_runner_report(std::string_view runner_stdout);

/// Truncates to `cap` bytes and appends a marker naming the dropped size.
std::string cap_output(std::string text, std::size_t cap);

/// Landlock ABI version of the running kernel, 0 when unavailable.
int landlock_abi_version();

struct SandboxConfig {
    /// Runner command line before the two positional arguments.
    std::vector<std::string> runner_command;
    std::filesystem::path scratch_root = std::filesystem::temp_directory_path();
    std::string snippet_filename = "snippet.py";
    /// Deny writes outside the scratch directory (Landlock, when the kernel has it).
    bool restrict_filesystem = true;
    /// Deny TCP bind/connect (Landlock ABI >= 4).
    bool deny_network = true;
    /// Address-space limit for the runner; 0 disables.
    std::size_t memory_limit_bytes = std::size_t{2} << 30;
    int max_concurrent = 4;
};

class SandboxRunner final : public CodeExecutor {
public:
    explicit SandboxRunner(SandboxConfig config);

    /// Throws SandboxUnavailable when the runner cannot be started or exits
    /// without a report (a harness fault, not a failing snippet).
    ExecutionResult execute(std::string_view snippet, const ExecutionLimits& limits) override;

    const SandboxConfig& config() const { return config_; }

private:
    SandboxConfig config_;
    std::string runner_path_;
    std::counting_semaphore<256> slots_;
};

}  // namespace mmagent

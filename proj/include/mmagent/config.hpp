#pragma once

// Structured run configuration: one JSON file plus environment overrides for
// the endpoint and secrets.

#include "mmagent/code/sandbox.hpp"
#include "mmagent/gateway.hpp"
#include "mmagent/pipeline.hpp"

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>

namespace mmagent {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct AppConfig {
    HttpModelConfig model;
    std::string decoding_preset = "A";
    PipelineConfig pipeline;
    std::optional<std::filesystem::path> index_dir;
    std::optional<std::string> embedding_endpoint;
    std::optional<std::filesystem::path> prompts_dir;
    /// Runner command for the code tool; empty leaves Code unavailable.
    std::vector<std::string> runner_command;
    int sandbox_concurrency = 4;
};

/// Example file:
///   {"endpoint": "...", "model": "...", "api_key": "...", "decoding": "A",
///    "max_turns": 10, "tools": "search,perceive,code",
///    "retrieval": {"top_k": 8, "tau": 0.9, "k1": 1.2, "b": 0.75},
///    "index": "...", "embedding_endpoint": "...", "prompts": "...",
///    "code": {"runner": ["python3", "-m", "..."], "max_retries": 3,
///             "timeout_s": 10, "output_cap": 65536, "max_concurrent": 4},
///    "request_timeout_s": 120, "max_in_flight": 8}
/// Relative paths resolve against the file's directory. Unknown keys are errors.
AppConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);

using Environment = std::map<std::string, std::string>;
Environment process_environment();

/// MMAGENT_ENDPOINT, MMAGENT_MODEL and MMAGENT_API_KEY replace the file values.
void apply_environment(AppConfig& config, const Environment& env);

/// Everything that shapes a run, with the API key redacted.
nlohmann::ordered_json snapshot(const AppConfig& config);

}  // namespace mmagent

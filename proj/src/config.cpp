#include "mmagent/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

extern char** environ;

namespace mmagent {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
}

template <typename T>
T get_as(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

AppConfig parse_config(const json& j, const fs::path& base_dir) {
    check_keys(j,
               {"endpoint", "model", "api_key", "decoding", "max_turns", "tools", "retrieval", "index",
                "embedding_endpoint", "prompts", "code", "request_timeout_s", "max_in_flight"},
               "config");
    AppConfig c;
    if (j.contains("endpoint")) c.model.endpoint = get_as<std::string>(j, "endpoint");
    if (j.contains("model")) c.model.model = get_as<std::string>(j, "model");
    if (j.contains("api_key")) c.model.api_key = get_as<std::string>(j, "api_key");
    if (j.contains("request_timeout_s")) c.model.timeout = std::chrono::seconds(get_as<int>(j, "request_timeout_s"));
    if (j.contains("max_in_flight")) c.model.max_in_flight = get_as<int>(j, "max_in_flight");

    if (j.contains("decoding")) c.decoding_preset = get_as<std::string>(j, "decoding");
    try {
        c.pipeline.decoding = DecodingConfig::preset(c.decoding_preset);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    c.pipeline.code.decoding = c.pipeline.decoding;

    if (j.contains("max_turns")) c.pipeline.max_turns = get_as<int>(j, "max_turns");
    if (j.contains("tools")) {
        try {
            c.pipeline.pool = parse_tool_list(get_as<std::string>(j, "tools"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        check_keys(r, {"top_k", "tau", "k1", "b"}, "retrieval");
        if (r.contains("top_k")) c.pipeline.retrieval.top_k = get_as<int>(r, "top_k");
        if (r.contains("tau")) c.pipeline.retrieval.tau = get_as<double>(r, "tau");
        if (r.contains("k1")) c.pipeline.retrieval.bm25_k1 = get_as<double>(r, "k1");
        if (r.contains("b")) c.pipeline.retrieval.bm25_b = get_as<double>(r, "b");
    }
    if (j.contains("index")) c.index_dir = resolve(base_dir, get_as<std::string>(j, "index"));
    if (j.contains("embedding_endpoint")) c.embedding_endpoint = get_as<std::string>(j, "embedding_endpoint");
    if (j.contains("prompts")) c.prompts_dir = resolve(base_dir, get_as<std::string>(j, "prompts"));
    if (j.contains("code")) {
        const auto& k = j["code"];
        check_keys(k, {"runner", "max_retries", "timeout_s", "output_cap", "max_concurrent"}, "code");
        if (k.contains("runner")) c.runner_command = get_as<std::vector<std::string>>(k, "runner");
        if (k.contains("max_retries")) c.pipeline.code.max_retries = get_as<int>(k, "max_retries");
        if (k.contains("timeout_s"))
            c.pipeline.code.limits.wall_timeout =
                std::chrono::duration_cast<Duration>(std::chrono::duration<double>(get_as<double>(k, "timeout_s")));
        if (k.contains("output_cap")) c.pipeline.code.limits.output_cap = get_as<std::size_t>(k, "output_cap");
        if (k.contains("max_concurrent")) c.sandbox_concurrency = get_as<int>(k, "max_concurrent");
    }

    if (c.pipeline.max_turns < 1) throw ConfigError("max_turns must be >= 1");
    if (c.pipeline.code.max_retries < 0) throw ConfigError("code.max_retries must be >= 0");
    if (c.sandbox_concurrency < 1) throw ConfigError("code.max_concurrent must be >= 1");
    if (c.model.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    try {
        c.pipeline.retrieval.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

AppConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
    try {
        return parse_config(j, path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

Environment process_environment() {
    Environment env;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        auto eq = kv.find('=');
        if (eq != std::string_view::npos) env.emplace(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return env;
}

void apply_environment(AppConfig& config, const Environment& env) {
    auto set = [&](const char* name, std::string& field) {
        if (auto it = env.find(name); it != env.end() && !it->second.empty()) field = it->second;
    };
    set("MMAGENT_ENDPOINT", config.model.endpoint);
    set("MMAGENT_MODEL", config.model.model);
    set("MMAGENT_API_KEY", config.model.api_key);
}

ordered_json snapshot(const AppConfig& c) {
    const auto& d = c.pipeline.decoding;
    ordered_json j;
    j["endpoint"] = c.model.endpoint;
    j["model"] = c.model.model;
    j["api_key"] = c.model.api_key.empty() ? "" : "<redacted>";
    j["decoding"] = {{"preset", c.decoding_preset},
                     {"temperature", d.temperature},
                     {"top_p", d.top_p},
                     {"top_k", d.top_k},
                     {"repetition_penalty", d.repetition_penalty},
                     {"max_new_tokens", d.max_new_tokens}};
    j["max_turns"] = c.pipeline.max_turns;
    j["tools"] = format_tool_list(c.pipeline.pool);
    j["direct_prompting"] = c.pipeline.direct_prompting;
    j["retrieval"] = {{"top_k", c.pipeline.retrieval.top_k},
                      {"tau", c.pipeline.retrieval.tau},
                      {"k1", c.pipeline.retrieval.bm25_k1},
                      {"b", c.pipeline.retrieval.bm25_b}};
    j["index"] = c.index_dir ? ordered_json(c.index_dir->string()) : ordered_json(nullptr);
    j["embedding_endpoint"] = c.embedding_endpoint ? ordered_json(*c.embedding_endpoint) : ordered_json(nullptr);
    j["prompts"] = c.prompts_dir ? ordered_json(c.prompts_dir->string()) : ordered_json(nullptr);
    j["code"] = {{"runner", c.runner_command},
                 {"max_retries", c.pipeline.code.max_retries},
                 {"timeout_s", to_ms(c.pipeline.code.limits.wall_timeout) / 1000.0},
                 {"output_cap", c.pipeline.code.limits.output_cap},
                 {"max_concurrent", c.sandbox_concurrency}};
    j["request_timeout_s"] = c.model.timeout.count();
    j["max_in_flight"] = c.model.max_in_flight;
    return j;
}

}  // namespace mmagent

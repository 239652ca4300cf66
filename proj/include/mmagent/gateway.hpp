#pragma once

// Access to a backbone multimodal model over a chat-completions protocol.

#include "mmagent/clock.hpp"
#include "mmagent/types.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mmagent {

class TransportError : public Error {
public:
    using Error::Error;
};
class ProtocolError : public Error {
public:
    using Error::Error;
};
class BudgetExceeded : public Error {
public:
    using Error::Error;
};
class ScriptExhausted : public Error {
public:
    using Error::Error;
};
class ScriptMismatch : public Error {
public:
    using Error::Error;
};

struct DecodingConfig {
    double temperature = 0.7;
    double top_p = 0.9;
    int top_k = 50;
    double repetition_penalty = 1.05;
    std::vector<std::string> stop_sequences;
    int max_new_tokens = 2048;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;

    /// Qwen2.5-VL / MiMo-VL decoding: temperature 0.7, top-p 0.9, top-k 50, penalty 1.05.
    static DecodingConfig preset_a();
    /// InternVL3 decoding: temperature 0.8, top-p 0.8, top-k 40, penalty 1.05.
    static DecodingConfig preset_b();
    /// "A", "B", or a backbone family name (qwen2.5-vl, mimo-vl, internvl3).
    static DecodingConfig preset(std::string_view name);
};

enum class StopReason { StopSequence, EndOfSequence, LengthCap };
std::string_view stop_reason_name(StopReason r);

struct Completion {
    std::string text;
    StopReason stop_reason = StopReason::EndOfSequence;
    std::optional<std::string> matched_stop;
    Duration model_time{0};
};

struct TextPart {
    std::string text;
};
struct ImagePart {
    ImageRef image;
};
using Part = std::variant<TextPart, ImagePart>;

enum class Role { System, User, Assistant };
std::string_view role_name(Role r);

struct Message {
    Role role = Role::User;
    std::vector<Part> parts;

    /// User message with an optional leading image part.
    static Message user(std::string text, const std::optional<ImageRef>& image = std::nullopt);
    static Message assistant(std::string text);
};

/// Concatenated text parts of all messages, separated by newlines.
std::string prompt_text(std::span<const Message> messages);

class Model {
public:
    virtual ~Model() = default;
    virtual Completion complete(std::span<const Message> messages, const DecodingConfig& config) = 0;
};

struct StopMatch {
    std::size_t end = 0;  // text is cut to [0, end), stop retained
    std::string stop;
};

/// The stop sequence whose first occurrence ends earliest in `text`.
std::optional<StopMatch> find_first_stop(std::string_view text, std::span<const std::string> stops);

/// Deterministic test double replaying scripted replies in order.
struct ScriptedReply {
    /// When set, the joined prompt text must contain this substring.
    std::optional<std::string> predicate;
    std::string reply;
    /// Simulated model time reported for this reply.
    Duration latency{0};
};

std::vector<ScriptedReply> parse_script(std::string_view json_text);
/// Mock script file: a JSON array of {"predicate"?: str, "reply": str, "latency_ms"?: number}.
std::vector<ScriptedReply> load_script(const std::filesystem::path& path);

class ScriptedModel final : public Model {
public:
    /// `clock`, when given, is advanced by each reply's latency.
    explicit ScriptedModel(std::vector<ScriptedReply> script, std::shared_ptr<ManualClock> clock = nullptr);

    Completion complete(std::span<const Message> messages, const DecodingConfig& config) override;

    std::size_t calls() const;
    std::size_t remaining() const;
    /// Prompt text of every call so far, in order.
    std::vector<std::string> prompts() const;

private:
    std::vector<ScriptedReply> script_;
    std::shared_ptr<ManualClock> clock_;
    mutable std::mutex mu_;
    std::size_t next_ = 0;
    std::vector<std::string> prompts_;
};

struct HttpModelConfig {
    /// Full chat-completions URL, e.g. http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout{120};
    int max_in_flight = 8;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

class HttpChatModel final : public Model {
public:
    explicit HttpChatModel(HttpModelConfig config);
    ~HttpChatModel() override;

    Completion complete(std::span<const Message> messages, const DecodingConfig& config) override;

    /// Request body sent for `messages`; exposed for wire-format tests.
    std::string build_request(std::span<const Message> messages, const DecodingConfig& config) const;
    /// Interprets a response body, applying local stop verification.
    static Completion parse_response(std::string_view body, const DecodingConfig& config);

private:
    struct Target;
    HttpModelConfig config_;
    std::unique_ptr<Target> target_;
    std::counting_semaphore<1024> in_flight_;
};

/// Forwards to another model while summing reported model time. One per task.
class MeteredModel final : public Model {
public:
    explicit MeteredModel(Model& inner) : inner_(inner) {}
    Completion complete(std::span<const Message> messages, const DecodingConfig& config) override;

    Duration model_time() const { return Duration(total_.load()); }
    int calls() const { return calls_.load(); }

private:
    Model& inner_;
    std::atomic<Duration::rep> total_{0};
    std::atomic<int> calls_{0};
};

/// Data URL for local files, pass-through for http(s) and data URLs.
std::string image_url_for(const ImageRef& image);

}  // namespace mmagent

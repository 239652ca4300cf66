#include "mmagent/gateway.hpp"

#include "mmagent/protocol.hpp"
#include "mmagent/text.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <thread>

namespace mmagent {

using nlohmann::json;

const Clock& steady_clock() {
    static const SteadyClock clock;
    return clock;
}

// ---------------------------------------------------------------------------
// Decoding configuration

void DecodingConfig::validate() const {
    if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("top_p must be in (0, 1]");
    if (top_k < 1) throw std::invalid_argument("top_k must be positive");
    if (!(repetition_penalty >= 1.0)) throw std::invalid_argument("repetition_penalty must be >= 1");
    if (max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be positive");
}

DecodingConfig DecodingConfig::preset_a() { return DecodingConfig{0.7, 0.9, 50, 1.05, {}, 2048}; }
DecodingConfig DecodingConfig::preset_b() { return DecodingConfig{0.8, 0.8, 40, 1.05, {}, 2048}; }

DecodingConfig DecodingConfig::preset(std::string_view name) {
    const auto n = to_lower(trim(name));
    if (n == "a" || n == "qwen2.5-vl" || n == "qwen" || n == "mimo-vl" || n == "mimo") return preset_a();
    if (n == "b" || n == "internvl3" || n == "internvl") return preset_b();
    throw std::invalid_argument("unknown decoding preset '" + std::string(name) + "'");
}

std::string_view stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::StopSequence: return "stop_sequence";
        case StopReason::EndOfSequence: return "end_of_sequence";
        case StopReason::LengthCap: return "length_cap";
    }
    return "?";
}

std::string_view role_name(Role r) {
    switch (r) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "?";
}

Message Message::user(std::string text, const std::optional<ImageRef>& image) {
    Message m{Role::User, {}};
    if (image) m.parts.emplace_back(ImagePart{*image});
    m.parts.emplace_back(TextPart{std::move(text)});
    return m;
}

Message Message::assistant(std::string text) { return Message{Role::Assistant, {TextPart{std::move(text)}}}; }

std::string prompt_text(std::span<const Message> messages) {
    std::string out;
    for (const auto& m : messages) {
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                if (!out.empty()) out += "\n";
                out += t->text;
            }
        }
    }
    return out;
}

std::optional<StopMatch> find_first_stop(std::string_view text, std::span<const std::string> stops) {
    std::optional<StopMatch> best;
    for (const auto& stop : stops) {
        if (stop.empty()) continue;
        auto pos = text.find(stop);
        if (pos == std::string_view::npos) continue;
        const auto end = pos + stop.size();
        if (!best || end < best->end) best = StopMatch{end, stop};
    }
    return best;
}

namespace {

/// Applies stop semantics to a raw continuation: truncate after the earliest
/// stop and keep it.
Completion apply_stops(std::string raw, const DecodingConfig& config) {
    Completion c;
    if (auto m = find_first_stop(raw, config.stop_sequences)) {
        raw.resize(m->end);
        c.stop_reason = StopReason::StopSequence;
        c.matched_stop = m->stop;
    } else {
        c.stop_reason = StopReason::EndOfSequence;
    }
    c.text = std::move(raw);
    return c;
}

bool contains_stop(const DecodingConfig& config, std::string_view s) {
    for (const auto& stop : config.stop_sequences)
        if (stop == s) return true;
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scripted mock

std::vector<ScriptedReply> parse_script(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("mock script is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw std::invalid_argument("mock script must be a JSON array");
    std::vector<ScriptedReply> out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("reply") || !item["reply"].is_string())
            throw std::invalid_argument("mock script entries need a string 'reply'");
        ScriptedReply r;
        r.reply = item["reply"].get<std::string>();
        if (item.contains("predicate") && !item["predicate"].is_null())
            r.predicate = item["predicate"].get<std::string>();
        if (item.contains("latency_ms")) r.latency = from_ms(item["latency_ms"].get<double>());
        out.push_back(std::move(r));
    }
    if (out.empty()) throw std::invalid_argument("mock script is empty");
    return out;
}

std::vector<ScriptedReply> load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read mock script " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

ScriptedModel::ScriptedModel(std::vector<ScriptedReply> script, std::shared_ptr<ManualClock> clock)
    : script_(std::move(script)), clock_(std::move(clock)) {
    if (script_.empty()) throw std::invalid_argument("mock script is empty");
}

Completion ScriptedModel::complete(std::span<const Message> messages, const DecodingConfig& config) {
    std::lock_guard lock(mu_);
    const std::string prompt = prompt_text(messages);
    if (next_ >= script_.size()) {
        throw ScriptExhausted("mock script exhausted after " + std::to_string(script_.size()) + " replies");
    }
    const auto& entry = script_[next_];
    if (entry.predicate && prompt.find(*entry.predicate) == std::string::npos) {
        constexpr std::size_t kContext = 240;
        const std::string tail = prompt.size() > kContext ? "..." + prompt.substr(prompt.size() - kContext) : prompt;
        throw ScriptMismatch("mock reply #" + std::to_string(next_ + 1) + " expected the prompt to contain\n  \"" +
                             *entry.predicate + "\"\nbut the prompt ends with\n  \"" + tail + "\"");
    }
    ++next_;
    prompts_.push_back(prompt);
    Completion c = apply_stops(entry.reply, config);
    c.model_time = entry.latency;
    if (clock_) clock_->advance(entry.latency);
    return c;
}

std::size_t ScriptedModel::calls() const {
    std::lock_guard lock(mu_);
    return next_;
}

std::size_t ScriptedModel::remaining() const {
    std::lock_guard lock(mu_);
    return script_.size() - next_;
}

std::vector<std::string> ScriptedModel::prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
}

// ---------------------------------------------------------------------------
// Metering

Completion MeteredModel::complete(std::span<const Message> messages, const DecodingConfig& config) {
    Completion c = inner_.complete(messages, config);
    total_.fetch_add(c.model_time.count());
    calls_.fetch_add(1);
    return c;
}

// ---------------------------------------------------------------------------
// Images

namespace {

std::string base64_encode(std::string_view data) {
    static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        const auto n = (static_cast<unsigned char>(data[i]) << 16) | (static_cast<unsigned char>(data[i + 1]) << 8) |
                       static_cast<unsigned char>(data[i + 2]);
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += kAlphabet[(n >> 6) & 63];
        out += kAlphabet[n & 63];
    }
    if (i < data.size()) {
        unsigned n = static_cast<unsigned char>(data[i]) << 16;
        if (i + 1 < data.size()) n |= static_cast<unsigned char>(data[i + 1]) << 8;
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += i + 1 < data.size() ? kAlphabet[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::string mime_for(const std::filesystem::path& p) {
    const auto ext = to_lower(p.extension().string());
    if (ext == ".png") return "image/png";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "image/jpeg";
}

}  // namespace

std::string image_url_for(const ImageRef& image) {
    const auto& uri = image.uri;
    if (starts_with_icase(uri, "http://") || starts_with_icase(uri, "https://") || starts_with_icase(uri, "data:"))
        return uri;
    std::ifstream in(uri, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read image " + uri);
    std::stringstream ss;
    ss << in.rdbuf();
    return "data:" + mime_for(uri) + ";base64," + base64_encode(ss.str());
}

// ---------------------------------------------------------------------------
// HTTP chat-completions client

struct HttpChatModel::Target {
    std::string scheme_host_port;
    std::string path;
};

HttpChatModel::HttpChatModel(HttpModelConfig config)
    : config_(std::move(config)), target_(std::make_unique<Target>()), in_flight_(std::max(1, config_.max_in_flight)) {
    const auto& url = config_.endpoint;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an absolute URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    target_->scheme_host_port = url.substr(0, path_start);
    target_->path = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
    if (config_.max_attempts < 1) config_.max_attempts = 1;
}

HttpChatModel::~HttpChatModel() = default;

std::string HttpChatModel::build_request(std::span<const Message> messages, const DecodingConfig& config) const {
    json msgs = json::array();
    for (const auto& m : messages) {
        json content = json::array();
        for (const auto& p : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&p)) {
                content.push_back({{"type", "text"}, {"text", t->text}});
            } else {
                const auto& img = std::get<ImagePart>(p).image;
                content.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url_for(img)}}}});
            }
        }
        msgs.push_back({{"role", role_name(m.role)}, {"content", std::move(content)}});
    }
    json body = {
        {"model", config_.model},
        {"messages", std::move(msgs)},
        {"temperature", config.temperature},
        {"top_p", config.top_p},
        {"top_k", config.top_k},
        {"repetition_penalty", config.repetition_penalty},
        {"max_tokens", config.max_new_tokens},
        {"stream", false},
    };
    if (!config.stop_sequences.empty()) body["stop"] = config.stop_sequences;
    return body.dump();
}

Completion HttpChatModel::parse_response(std::string_view body, const DecodingConfig& config) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
        throw ProtocolError("response has no choices");
    const auto& choice = doc["choices"][0];
    std::string raw;
    if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
        raw = choice["message"]["content"].get<std::string>();
    } else if (choice.contains("text") && choice["text"].is_string()) {
        raw = choice["text"].get<std::string>();
    } else {
        throw ProtocolError("response choice has no text content");
    }
    const std::string finish = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                                   ? choice["finish_reason"].get<std::string>()
                                   : std::string();

    // Servers may ignore, strip, or report the stop string; normalize all three
    // to "text ends with the matched stop".
    Completion c = apply_stops(std::move(raw), config);
    if (c.stop_reason == StopReason::StopSequence) return c;
    if (finish == "length") {
        c.stop_reason = StopReason::LengthCap;
        return c;
    }
    if (finish != "stop") return c;

    std::optional<std::string> stripped;
    if (choice.contains("stop_reason") && choice["stop_reason"].is_string()) {
        auto s = choice["stop_reason"].get<std::string>();
        if (contains_stop(config, s)) stripped = s;
    }
    if (!stripped) {
        auto segments = scan(c.text);
        if (!segments.empty() && segments.back().kind == SegmentKind::UnterminatedInvocation) {
            auto closer = close_tag(*segments.back().tool);
            if (contains_stop(config, closer)) stripped = closer;
        }
    }
    if (stripped) {
        c.text += *stripped;
        c.stop_reason = StopReason::StopSequence;
        c.matched_stop = stripped;
    }
    return c;
}

namespace {

bool looks_like_context_overflow(std::string_view body) {
    const auto lowered = to_lower(body);
    return lowered.find("context length") != std::string::npos ||
           lowered.find("context_length_exceeded") != std::string::npos ||
           lowered.find("maximum context") != std::string::npos;
}

}  // namespace

Completion HttpChatModel::complete(std::span<const Message> messages, const DecodingConfig& config) {
    if (messages.empty()) throw std::invalid_argument("complete() needs at least one message");
    config.validate();
    const std::string body = build_request(messages, config);

    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    Duration spent{0};
    auto backoff = config_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        httplib::Client client(target_->scheme_host_port);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(target_->path, body, "application/json");
        spent += std::chrono::steady_clock::now() - start;

        std::string failure;
        if (!res) {
            failure = "transport failure: " + httplib::to_string(res.error());
        } else if (res->status == 408 || res->status == 429 || res->status >= 500) {
            failure = "server returned HTTP " + std::to_string(res->status);
        } else if (res->status != 200) {
            if (looks_like_context_overflow(res->body))
                throw BudgetExceeded("token budget exceeded: " + res->body.substr(0, 300));
            throw ProtocolError("server returned HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 300));
        } else {
            Completion c = parse_response(res->body, config);
            c.model_time = spent;
            return c;
        }
        if (attempt >= config_.max_attempts)
            throw TransportError(failure + " (after " + std::to_string(attempt) + " attempts)");
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

}  // namespace mmagent

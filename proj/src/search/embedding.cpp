#include "mmagent/search/embedding.hpp"

#include "mmagent/gateway.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

namespace mmagent {

void normalize(std::vector<float>& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (sq <= 0.0 || !std::isfinite(sq)) throw EmbeddingUnavailable("cannot normalize a zero or non-finite vector");
    const double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw EmbeddingUnavailable("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<float> HashEmbeddingProvider::hashed(std::string_view domain, std::string_view key) const {
    // FNV-1a over domain + key seeds the generator.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    mix(domain);
    mix(std::string_view("\0", 1));
    mix(key);
    std::mt19937_64 rng(h);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    std::vector<float> v(dimension_);
    for (auto& x : v) x = dist(rng);
    normalize(v);
    return v;
}

std::vector<float> HashEmbeddingProvider::embed_image(const ImageRef& image) {
    {
        std::lock_guard lock(mu_);
        if (auto it = images_.find(image.uri); it != images_.end()) return it->second;
    }
    return hashed("image", image.uri);
}

std::vector<float> HashEmbeddingProvider::embed_text(std::string_view text) {
    {
        std::lock_guard lock(mu_);
        if (auto it = texts_.find(text); it != texts_.end()) return it->second;
    }
    return hashed("text", text);
}

void HashEmbeddingProvider::pin_image(const std::string& uri, std::vector<float> v) {
    normalize(v);
    std::lock_guard lock(mu_);
    images_[uri] = std::move(v);
}

void HashEmbeddingProvider::pin_text(const std::string& text, std::vector<float> v) {
    normalize(v);
    std::lock_guard lock(mu_);
    texts_[text] = std::move(v);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint, std::chrono::seconds timeout)
    : timeout_(timeout) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("embedding endpoint must be a URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/embed" : endpoint.substr(path_start);
}

std::vector<float> HttpEmbeddingProvider::request(const std::string& body) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Post(path_, body, "application/json");
    if (!res) throw EmbeddingUnavailable("embedding service unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw EmbeddingUnavailable("embedding service returned HTTP " + std::to_string(res->status));
    try {
        auto doc = nlohmann::json::parse(res->body);
        auto v = doc.at("embedding").get<std::vector<float>>();
        normalize(v);
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw EmbeddingUnavailable(std::string("malformed embedding response: ") + e.what());
    }
}

std::vector<float> HttpEmbeddingProvider::embed_image(const ImageRef& image) {
    return request(nlohmann::json{{"image", image_url_for(image)}}.dump());
}

std::vector<float> HttpEmbeddingProvider::embed_text(std::string_view text) {
    return request(nlohmann::json{{"text", std::string(text)}}.dump());
}

}  // namespace mmagent

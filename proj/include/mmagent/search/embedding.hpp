#pragma once

#include "mmagent/types.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace mmagent {

class EmbeddingUnavailable : public Error {
public:
    using Error::Error;
};

/// Maps images and text into a shared space of unit-norm vectors.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<float> embed_image(const ImageRef& image) = 0;
    virtual std::vector<float> embed_text(std::string_view text) = 0;
};

/// Scales `v` to unit length. Throws EmbeddingUnavailable for zero vectors.
void normalize(std::vector<float>& v);
double cosine(std::span<const float> a, std::span<const float> b);

/// Deterministic stand-in: vectors are seeded from a hash of the input.
/// Individual inputs can be pinned to fixed vectors.
class HashEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashEmbeddingProvider(std::size_t dimension = 64) : dimension_(dimension) {}

    std::vector<float> embed_image(const ImageRef& image) override;
    std::vector<float> embed_text(std::string_view text) override;

    void pin_image(const std::string& uri, std::vector<float> v);
    void pin_text(const std::string& text, std::vector<float> v);
    std::size_t dimension() const { return dimension_; }

private:
    std::vector<float> hashed(std::string_view domain, std::string_view key) const;

    std::size_t dimension_;
    std::mutex mu_;
    std::map<std::string, std::vector<float>, std::less<>> images_;
    std::map<std::string, std::vector<float>, std::less<>> texts_;
};

/// HTTP binding: POST {"image": url} or {"text": str}, reply {"embedding": [..]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(std::string endpoint, std::chrono::seconds timeout = std::chrono::seconds(30));
    std::vector<float> embed_image(const ImageRef& image) override;
    std::vector<float> embed_text(std::string_view text) override;

private:
    std::vector<float> request(const std::string& body);
    std::string scheme_host_port_;
    std::string path_;
    std::chrono::seconds timeout_;
};

}  // namespace mmagent

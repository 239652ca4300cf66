#pragma once

// Corpus preparation: short-page filtering and fixed-size overlapping chunks.
// Lengths here are whitespace token counts.

#include "mmagent/types.hpp"

#include <cstdint>
#include <functional>
#include <istream>
#include <string>
#include <vector>

namespace mmagent {

struct Document {
    std::string id;
    std::string title;
    std::string text;
};

struct TokenSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Passage {
    std::uint32_t id = 0;  // ordinal in ingestion order; stable for a given dump
    std::string key;       // "<doc id>#<chunk index>"
    std::string source_doc;
    std::string title;
    TokenSpan token_span;
    std::string text;
    std::vector<float> embedding;  // empty when no provider was configured
};

inline constexpr std::size_t kDefaultMinWords = 32;
inline constexpr std::size_t kDefaultChunkSize = 256;
inline constexpr std::size_t kDefaultChunkOverlap = 32;

std::size_t word_count(std::string_view text);

/// Pages with fewer than `min_words` whitespace-delimited words are dropped.
bool keep_page(const Document& doc, std::size_t min_words = kDefaultMinWords);

struct FilterCounts {
    std::size_t kept = 0;
    std::size_t dropped = 0;
};

std::vector<Document> filter_pages(std::vector<Document> docs, FilterCounts* counts = nullptr,
                                   std::size_t min_words = kDefaultMinWords);

/// Spans [i*stride, min(i*stride + size, n)) with stride = size - overlap,
/// stopping once a span reaches n. Requires size > overlap.
std::vector<TokenSpan> chunk_spans(std::size_t n_tokens, std::size_t size = kDefaultChunkSize,
                                   std::size_t overlap = kDefaultChunkOverlap);

/// Passages for one document; ids start at `first_id`.
std::vector<Passage> chunk(const Document& doc, std::size_t size = kDefaultChunkSize,
                           std::size_t overlap = kDefaultChunkOverlap, std::uint32_t first_id = 0);

/// Reads newline-delimited JSON documents {id, title, text}. Blank lines are
/// skipped; malformed lines throw std::runtime_error naming the line number.
void read_dump(std::istream& in, const std::function<void(Document)>& sink);

}  // namespace mmagent

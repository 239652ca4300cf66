#pragma once

// Passage store with a BM25 inverted index and optional embeddings.
//
// Scoring for query q over passage d (query terms deduplicated):
//   sum_t idf(t) * tf(t,d) * (k1 + 1) / (tf(t,d) + k1 * (1 - b + b * |d| / avgdl))
//   idf(t) = ln((N - n_t + 0.5) / (n_t + 0.5) + 1)
// |d| and avgdl count analyzer tokens (lowercased alphanumeric runs).

#include "mmagent/search/embedding.hpp"
#include "mmagent/search/ingest.hpp"

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace mmagent {

class IndexMissing : public Error {
public:
    using Error::Error;
};
class IndexFormatError : public Error {
public:
    using Error::Error;
};

inline constexpr int kIndexFormatVersion = 1;

/// Lowercases ASCII and splits on non-alphanumeric bytes. Bytes >= 0x80 count
/// as word characters so UTF-8 words stay whole.
std::vector<std::string> analyze(std::string_view text);

/// Distinct analyzer terms in first-occurrence order.
std::vector<std::string> query_terms(std::string_view query);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct IndexStats {
    std::size_t doc_count = 0;
    std::size_t passage_count = 0;
    double avg_passage_len = 0.0;
    std::size_t vocabulary_size = 0;
    friend bool operator==(const IndexStats&, const IndexStats&) = default;
};

struct ScoredPassage {
    const Passage* passage = nullptr;
    double score = 0.0;
};

class PassageIndex {
public:
    PassageIndex() = default;
    /// Builds postings over `passages`, whose ids must equal their positions.
    explicit PassageIndex(std::vector<Passage> passages);

    /// Top-k passages containing at least one query term, by score descending,
    /// ties by ascending id. Terms absent from the index contribute nothing.
    std::vector<ScoredPassage> bm25_search(std::string_view query, std::size_t k, const Bm25Params& params = {}) const;

    /// Passages with cosine similarity strictly above `tau` to `image`, top-k
    /// by similarity. Throws EmbeddingUnavailable without provider or embeddings.
    std::vector<ScoredPassage> image_search(EmbeddingProvider* provider, const ImageRef& image, std::size_t k,
                                            double tau) const;

    const std::vector<Passage>& passages() const { return passages_; }
    const IndexStats& stats() const { return stats_; }
    bool has_embeddings() const;
    std::size_t passage_length(std::uint32_t id) const { return lengths_.at(id); }

    /// Directory layout: manifest.json, passages.jsonl, postings.bin, and
    /// embeddings.f32 when embeddings exist.
    void save(const std::filesystem::path& dir) const;
    /// Throws IndexMissing for an absent directory and IndexFormatError for a
    /// manifest with another format version.
    static PassageIndex load(const std::filesystem::path& dir);

private:
    struct Posting {
        std::uint32_t passage;
        std::uint32_t tf;
    };
    void finish_build();

    std::vector<Passage> passages_;
    std::vector<std::uint32_t> lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double total_length_ = 0.0;
    IndexStats stats_;
};

/// Thresholded cosine retrieval over candidates carrying embeddings:
/// {c : sim(c) > tau}, by similarity descending (ties by id), truncated to k.
std::vector<ScoredPassage> threshold_search(std::span<const float> query, std::span<const Passage> candidates,
                                            std::size_t k, double tau);

struct IngestOptions {
    std::size_t min_words = kDefaultMinWords;
    std::size_t chunk_size = kDefaultChunkSize;
    std::size_t chunk_overlap = kDefaultChunkOverlap;
};

struct IngestReport {
    FilterCounts pages;
    IndexStats stats;
};

/// filter -> chunk -> index (-> embed passages when `provider` is set).
PassageIndex build_index(std::istream& dump, const IngestOptions& options, EmbeddingProvider* provider,
                         IngestReport* report = nullptr);

}  // namespace mmagent

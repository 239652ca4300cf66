#pragma once

#include "mmagent/executor.hpp"
#include "mmagent/search/index.hpp"

namespace mmagent {

struct RetrievalConfig {
    int top_k = 8;
    double tau = 0.9;  // cross-modal path only
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;

    void validate() const;
    Bm25Params bm25() const { return {bm25_k1, bm25_b}; }
};

inline constexpr std::string_view kNoDocuments = "no relevant documents found";

/// "Passage 1: \n<text>" blocks, as in the refiner's worked example.
std::string format_documents(std::span<const ScoredPassage> docs);

/// Rewrites retrieved passages into a fluent snippet for the reasoning chain.
/// One model call. `docs` must be non-empty.
std::string refine(std::string_view question, std::string_view prior_reasoning, std::string_view query,
                   std::span<const ScoredPassage> docs, Model& model, const PromptAssets& prompts,
                   const DecodingConfig& decoding);

/// True for the literal "image" query (case-insensitive, trimmed).
bool is_image_query(std::string_view payload);

/// Routes a search payload: "image" goes to thresholded cross-modal retrieval
/// with the task image (results passed through), anything else goes to BM25
/// followed by the refiner.
class SearchTool {
public:
    SearchTool(const PassageIndex* index, EmbeddingProvider* embeddings, RetrievalConfig config,
               const PromptAssets& prompts, DecodingConfig decoding = DecodingConfig::preset_a());

    ToolResult dispatch(std::string_view payload, const TaskInput& task, std::string_view prior_reasoning,
                        Model& model) const;

    const RetrievalConfig& config() const { return config_; }

private:
    const PassageIndex* index_;
    EmbeddingProvider* embeddings_;
    RetrievalConfig config_;
    const PromptAssets& prompts_;
    DecodingConfig decoding_;
};

}  // namespace mmagent

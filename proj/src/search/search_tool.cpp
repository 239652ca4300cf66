#include "mmagent/search/search_tool.hpp"

#include "mmagent/text.hpp"

#include <cstdio>

namespace mmagent {

void RetrievalConfig::validate() const {
    if (top_k < 1) throw std::invalid_argument("top_k must be positive");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in [0, 1]");
    if (!(bm25_b >= 0.0 && bm25_b <= 1.0)) throw std::invalid_argument("bm25_b must be in [0, 1]");
    if (!(bm25_k1 >= 0.0)) throw std::invalid_argument("bm25_k1 must be non-negative");
}

std::string format_documents(std::span<const ScoredPassage> docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out += "\n\n";
        out += "Passage " + std::to_string(i + 1) + ": \n";
        if (!docs[i].passage->title.empty()) out += "(" + docs[i].passage->title + ") ";
        out += docs[i].passage->text;
    }
    return out;
}

std::string refine(std::string_view question, std::string_view prior_reasoning, std::string_view query,
                   std::span<const ScoredPassage> docs, Model& model, const PromptAssets& prompts,
                   const DecodingConfig& decoding) {
    if (docs.empty()) throw std::invalid_argument("refine() needs at least one document");
    const auto prompt = prompts.render("refiner", {{"question", std::string(question)},
                                                   {"previous_reasoning", std::string(prior_reasoning)},
                                                   {"calling", std::string(query)},
                                                   {"raw_result", format_documents(docs)}});
    const std::vector<Message> messages{Message::user(prompt)};
    return std::string(trim(model.complete(messages, decoding).text));
}

bool is_image_query(std::string_view payload) { return iequals(trim(payload), "image"); }

SearchTool::SearchTool(const PassageIndex* index, EmbeddingProvider* embeddings, RetrievalConfig config,
                       const PromptAssets& prompts, DecodingConfig decoding)
    : index_(index), embeddings_(embeddings), config_(config), prompts_(prompts), decoding_(std::move(decoding)) {
    config_.validate();
    decoding_.stop_sequences.clear();
}

ToolResult SearchTool::dispatch(std::string_view payload, const TaskInput& task, std::string_view prior_reasoning,
                                Model& model) const {
    const auto query = trim(payload);
    if (query.empty()) return ToolResult::failure(ToolKind::Search, "empty tool query");
    if (index_ == nullptr) return ToolResult::failure(ToolKind::Search, "no search index is configured");
    const auto k = static_cast<std::size_t>(config_.top_k);

    try {
        if (is_image_query(query)) {
            if (!task.image) return ToolResult::failure(ToolKind::Search, "image search requires an image");
            const auto hits = index_->image_search(embeddings_, *task.image, k, config_.tau);
            if (hits.empty()) return ToolResult::success(ToolKind::Search, std::string(kNoDocuments));
            std::string content;
            for (std::size_t i = 0; i < hits.size(); ++i) {
                char sim[32];
                std::snprintf(sim, sizeof sim, "%.4f", hits[i].score);
                if (i) content += "\n";
                content += "Passage " + std::to_string(i + 1) + " (similarity " + sim + "): " + hits[i].passage->text;
            }
            return ToolResult::success(ToolKind::Search, std::move(content));
        }

        const auto hits = index_->bm25_search(query, k, config_.bm25());
        if (hits.empty()) return ToolResult::success(ToolKind::Search, std::string(kNoDocuments));
        auto snippet = refine(task.prompt_text(), prior_reasoning, query, hits, model, prompts_, decoding_);
        if (snippet.empty()) return ToolResult::failure(ToolKind::Search, "refiner returned an empty snippet");
        return ToolResult::success(ToolKind::Search, std::move(snippet));
    } catch (const Error& e) {
        return ToolResult::failure(ToolKind::Search, e.what());
    }
}

}  // namespace mmagent

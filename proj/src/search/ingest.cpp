#include "mmagent/search/ingest.hpp"

#include "mmagent/text.hpp"

#include <nlohmann/json.hpp>

namespace mmagent {

std::size_t word_count(std::string_view text) { return split_whitespace(text).size(); }

bool keep_page(const Document& doc, std::size_t min_words) { return word_count(doc.text) >= min_words; }

std::vector<Document> filter_pages(std::vector<Document> docs, FilterCounts* counts, std::size_t min_words) {
    std::vector<Document> kept;
    FilterCounts local;
    for (auto& d : docs) {
        if (keep_page(d, min_words)) {
            kept.push_back(std::move(d));
            ++local.kept;
        } else {
            ++local.dropped;
        }
    }
    if (counts) *counts = local;
    return kept;
}

std::vector<TokenSpan> chunk_spans(std::size_t n_tokens, std::size_t size, std::size_t overlap) {
    if (size == 0 || overlap >= size) throw std::invalid_argument("chunk size must exceed overlap");
    const std::size_t stride = size - overlap;
    std::vector<TokenSpan> spans;
    for (std::size_t start = 0; start < n_tokens; start += stride) {
        const std::size_t end = std::min(start + size, n_tokens);
        spans.push_back({start, end});
        if (end == n_tokens) break;
    }
    return spans;
}

std::vector<Passage> chunk(const Document& doc, std::size_t size, std::size_t overlap, std::uint32_t first_id) {
    const auto tokens = split_whitespace(doc.text);
    std::vector<Passage> out;
    std::uint32_t i = 0;
    for (const auto& span : chunk_spans(tokens.size(), size, overlap)) {
        Passage p;
        p.id = first_id + i;
        p.key = doc.id + "#" + std::to_string(i);
        p.source_doc = doc.id;
        p.title = doc.title;
        p.token_span = span;
        for (std::size_t t = span.start; t < span.end; ++t) {
            if (t > span.start) p.text += ' ';
            p.text += tokens[t];
        }
        out.push_back(std::move(p));
        ++i;
    }
    return out;
}

void read_dump(std::istream& in, const std::function<void(Document)>& sink) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("dump line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
            throw std::runtime_error("dump line " + std::to_string(line_no) + ": missing string field 'text'");
        Document d;
        if (j.contains("id")) d.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        if (d.id.empty()) d.id = std::to_string(line_no);
        if (j.contains("title") && j["title"].is_string()) d.title = j["title"].get<std::string>();
        d.text = j["text"].get<std::string>();
        sink(std::move(d));
    }
}

}  // namespace mmagent

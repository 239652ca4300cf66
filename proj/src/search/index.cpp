#include "mmagent/search/index.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

namespace mmagent {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kFormatName[] = "mmagent-passage-index";
constexpr char kPostingsMagic[4] = {'M', 'M', 'P', 'I'};

bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage->id < b.passage->id;
}

void keep_top(std::vector<ScoredPassage>& hits, std::size_t k) {
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), ranks_before);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), ranks_before);
    }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IndexFormatError("postings file is truncated");
    return v;
}

}  // namespace

std::vector<std::string> analyze(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> query_terms(std::string_view query) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (auto& t : analyze(query)) {
        if (seen.insert(t).second) out.push_back(std::move(t));
    }
    return out;
}

PassageIndex::PassageIndex(std::vector<Passage> passages) : passages_(std::move(passages)) {
    lengths_.assign(passages_.size(), 0);
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        if (passages_[i].id != i) throw std::invalid_argument("passage ids must equal their positions");
        std::unordered_map<std::string, std::uint32_t> tf;
        const auto tokens = analyze(passages_[i].text);
        for (const auto& t : tokens) ++tf[t];
        lengths_[i] = static_cast<std::uint32_t>(tokens.size());
        for (auto& [term, count] : tf) postings_[term].push_back({static_cast<std::uint32_t>(i), count});
    }
    finish_build();
}

void PassageIndex::finish_build() {
    total_length_ = 0.0;
    for (auto len : lengths_) total_length_ += len;
    std::set<std::string_view> docs;
    for (const auto& p : passages_) docs.insert(p.source_doc);
    stats_.doc_count = docs.size();
    stats_.passage_count = passages_.size();
    stats_.avg_passage_len = passages_.empty() ? 0.0 : total_length_ / static_cast<double>(passages_.size());
    stats_.vocabulary_size = postings_.size();
}

bool PassageIndex::has_embeddings() const {
    return !passages_.empty() &&
           std::all_of(passages_.begin(), passages_.end(), [](const Passage& p) { return !p.embedding.empty(); });
}

std::vector<ScoredPassage> PassageIndex::bm25_search(std::string_view query, std::size_t k,
                                                     const Bm25Params& params) const {
    if (k == 0) throw std::invalid_argument("k must be positive");
    if (passages_.empty()) return {};
    const double n_passages = static_cast<double>(passages_.size());
    const double avgdl = stats_.avg_passage_len;
    const double k1 = params.k1;
    const double b = params.b;

    std::vector<double> scores(passages_.size(), 0.0);
    std::vector<char> hit(passages_.size(), 0);
    for (const auto& term : query_terms(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log((n_passages - df + 0.5) / (df + 0.5) + 1.0);
        for (const auto& posting : it->second) {
            const double tf = posting.tf;
            const double dl = lengths_[posting.passage];
            scores[posting.passage] += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
            hit[posting.passage] = 1;
        }
    }
    std::vector<ScoredPassage> out;
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        if (hit[i]) out.push_back({&passages_[i], scores[i]});
    }
    keep_top(out, k);
    return out;
}

std::vector<ScoredPassage> threshold_search(std::span<const float> query, std::span<const Passage> candidates,
                                            std::size_t k, double tau) {
    if (k == 0) throw std::invalid_argument("k must be positive");
    std::vector<ScoredPassage> out;
    for (const auto& c : candidates) {
        if (c.embedding.empty()) continue;
        const double sim = cosine(query, c.embedding);
        if (sim > tau) out.push_back({&c, sim});
    }
    keep_top(out, k);
    return out;
}

std::vector<ScoredPassage> PassageIndex::image_search(EmbeddingProvider* provider, const ImageRef& image,
                                                      std::size_t k, double tau) const {
    if (provider == nullptr) throw EmbeddingUnavailable("no embedding provider is configured");
    if (!has_embeddings()) throw EmbeddingUnavailable("the index has no passage embeddings");
    const auto query = provider->embed_image(image);
    return threshold_search(query, passages_, k, tau);
}

// ---------------------------------------------------------------------------
// Persistence

void PassageIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    const std::size_t dim = has_embeddings() ? passages_.front().embedding.size() : 0;

    {
        std::ofstream out(dir / "passages.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& p : passages_) {
            json j = {{"id", p.id},
                      {"key", p.key},
                      {"doc", p.source_doc},
                      {"title", p.title},
                      {"start", p.token_span.start},
                      {"end", p.token_span.end},
                      {"text", p.text}};
            out << j.dump() << '\n';
        }
        if (!out) throw std::runtime_error("cannot write " + (dir / "passages.jsonl").string());
    }
    {
        std::ofstream out(dir / "postings.bin", std::ios::binary | std::ios::trunc);
        out.write(kPostingsMagic, 4);
        write_pod<std::uint32_t>(out, kIndexFormatVersion);
        std::vector<const std::string*> terms;
        for (const auto& [term, _] : postings_) terms.push_back(&term);
        std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
        write_pod<std::uint64_t>(out, terms.size());
        for (const auto* term : terms) {
            const auto& list = postings_.at(*term);
            write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(term->size()));
            out.write(term->data(), static_cast<std::streamsize>(term->size()));
            write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
            std::vector<Posting> sorted = list;
            std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.passage < b.passage; });
            for (const auto& p : sorted) {
                write_pod(out, p.passage);
                write_pod(out, p.tf);
            }
        }
        if (!out) throw std::runtime_error("cannot write " + (dir / "postings.bin").string());
    }
    if (dim > 0) {
        std::ofstream out(dir / "embeddings.f32", std::ios::binary | std::ios::trunc);
        for (const auto& p : passages_)
            out.write(reinterpret_cast<const char*>(p.embedding.data()),
                      static_cast<std::streamsize>(dim * sizeof(float)));
    } else {
        fs::remove(dir / "embeddings.f32");
    }
    json manifest = {{"format", kFormatName},
                     {"version", kIndexFormatVersion},
                     {"embedding_dim", dim},
                     {"stats",
                      {{"doc_count", stats_.doc_count},
                       {"passage_count", stats_.passage_count},
                       {"avg_passage_len", stats_.avg_passage_len},
                       {"vocabulary_size", stats_.vocabulary_size}}}};
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
}

PassageIndex PassageIndex::load(const fs::path& dir) {
    if (!fs::is_directory(dir) || !fs::exists(dir / "manifest.json"))
        throw IndexMissing("no passage index at " + dir.string());
    json manifest;
    try {
        std::ifstream in(dir / "manifest.json");
        manifest = json::parse(in);
    } catch (const json::exception& e) {
        throw IndexFormatError(std::string("unreadable index manifest: ") + e.what());
    }
    if (manifest.value("format", "") != kFormatName)
        throw IndexFormatError("not a passage index: " + dir.string());
    if (manifest.value("version", -1) != kIndexFormatVersion)
        throw IndexFormatError("index format version " + manifest["version"].dump() + " is not supported (expected " +
                               std::to_string(kIndexFormatVersion) + ")");

    PassageIndex index;
    {
        std::ifstream in(dir / "passages.jsonl");
        if (!in) throw IndexFormatError("missing passages.jsonl");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = json::parse(line);
            Passage p;
            p.id = j.at("id").get<std::uint32_t>();
            p.key = j.at("key").get<std::string>();
            p.source_doc = j.at("doc").get<std::string>();
            p.title = j.at("title").get<std::string>();
            p.token_span = {j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
            p.text = j.at("text").get<std::string>();
            if (p.id != index.passages_.size()) throw IndexFormatError("passage ids are not sequential");
            index.passages_.push_back(std::move(p));
        }
    }
    index.lengths_.assign(index.passages_.size(), 0);
    {
        std::ifstream in(dir / "postings.bin", std::ios::binary);
        if (!in) throw IndexFormatError("missing postings.bin");
        char magic[4];
        in.read(magic, 4);
        if (!in || !std::equal(magic, magic + 4, kPostingsMagic)) throw IndexFormatError("bad postings header");
        if (read_pod<std::uint32_t>(in) != kIndexFormatVersion) throw IndexFormatError("postings version mismatch");
        const auto n_terms = read_pod<std::uint64_t>(in);
        for (std::uint64_t t = 0; t < n_terms; ++t) {
            std::string term(read_pod<std::uint32_t>(in), '\0');
            in.read(term.data(), static_cast<std::streamsize>(term.size()));
            auto& list = index.postings_[term];
            list.resize(read_pod<std::uint32_t>(in));
            for (auto& p : list) {
                p.passage = read_pod<std::uint32_t>(in);
                p.tf = read_pod<std::uint32_t>(in);
                if (p.passage >= index.passages_.size()) throw IndexFormatError("posting refers to unknown passage");
                index.lengths_[p.passage] += p.tf;
            }
        }
    }
    const std::size_t dim = manifest.value("embedding_dim", std::size_t{0});
    if (dim > 0) {
        std::ifstream in(dir / "embeddings.f32", std::ios::binary);
        if (!in) throw IndexFormatError("missing embeddings.f32");
        for (auto& p : index.passages_) {
            p.embedding.resize(dim);
            in.read(reinterpret_cast<char*>(p.embedding.data()), static_cast<std::streamsize>(dim * sizeof(float)));
            if (!in) throw IndexFormatError("embeddings.f32 is truncated");
        }
    }
    index.finish_build();
    const auto& s = manifest.at("stats");
    if (s.at("passage_count").get<std::size_t>() != index.stats_.passage_count ||
        s.at("vocabulary_size").get<std::size_t>() != index.stats_.vocabulary_size)
        throw IndexFormatError("index files disagree with the manifest");
    return index;
}

PassageIndex build_index(std::istream& dump, const IngestOptions& options, EmbeddingProvider* provider,
                         IngestReport* report) {
    std::vector<Passage> passages;
    FilterCounts counts;
    read_dump(dump, [&](Document doc) {
        if (!keep_page(doc, options.min_words)) {
            ++counts.dropped;
            return;
        }
        ++counts.kept;
        for (auto& p : chunk(doc, options.chunk_size, options.chunk_overlap,
                             static_cast<std::uint32_t>(passages.size()))) {
            if (provider) p.embedding = provider->embed_text(p.text);
            passages.push_back(std::move(p));
        }
    });
    PassageIndex index(std::move(passages));
    if (report) *report = {counts, index.stats()};
    return index;
}

}  // namespace mmagent

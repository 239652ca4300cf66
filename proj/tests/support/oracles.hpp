#pragma once

// Reference implementations written independently of the library, used to
// cross-check it on randomized inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Lowercased runs of [A-Za-z0-9] and any byte >= 0x80.
inline std::vector<std::string> tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        bool word = c >= 0x80 || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (word) {
            cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

struct Ranked {
    std::uint32_t id;
    double score;
};

// Scores every passage from scratch: no postings, no caching.
inline std::vector<Ranked> bm25(const std::vector<std::string>& passages, const std::string& query, std::size_t k,
                                double k1 = 1.2, double b = 0.75) {
    const std::size_t n = passages.size();
    std::vector<std::vector<std::string>> docs;
    double total = 0;
    for (const auto& p : passages) {
        docs.push_back(tokens(p));
        total += static_cast<double>(docs.back().size());
    }
    const double avgdl = n ? total / static_cast<double>(n) : 0.0;

    std::vector<std::string> terms;
    for (const auto& t : tokens(query))
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);

    std::vector<Ranked> out;
    for (std::size_t d = 0; d < n; ++d) {
        double score = 0;
        bool matched = false;
        for (const auto& t : terms) {
            const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
            if (tf == 0) continue;
            matched = true;
            double df = 0;
            for (const auto& other : docs)
                if (std::find(other.begin(), other.end(), t) != other.end()) df += 1;
            const double idf = std::log((static_cast<double>(n) - df + 0.5) / (df + 0.5) + 1.0);
            const double dl = static_cast<double>(docs[d].size());
            score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if (matched) out.push_back({static_cast<std::uint32_t>(d), score});
    }
    std::sort(out.begin(), out.end(), [](const Ranked& x, const Ranked& y) {
        return x.score != y.score ? x.score > y.score : x.id < y.id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

// Closed form for (size, overlap) chunking: stride = size - overlap.
inline std::vector<std::pair<std::size_t, std::size_t>> chunk_spans(std::size_t n, std::size_t size,
                                                                    std::size_t overlap) {
    const std::size_t stride = size - overlap;
    std::size_t count = n == 0 ? 0 : (n <= size ? 1 : (n - size + stride - 1) / stride + 1);
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < count; ++i) out.emplace_back(i * stride, std::min(i * stride + size, n));
    return out;
}

inline double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0 || nb == 0) return 0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// {i : sim_i > tau}, by similarity descending then id ascending, first k.
inline std::vector<std::uint32_t> threshold(const std::vector<double>& sims, double tau, std::size_t k) {
    std::vector<std::uint32_t> keep;
    for (std::uint32_t i = 0; i < sims.size(); ++i)
        if (sims[i] > tau) keep.push_back(i);
    std::sort(keep.begin(), keep.end(), [&](std::uint32_t x, std::uint32_t y) {
        return sims[x] != sims[y] ? sims[x] > sims[y] : x < y;
    });
    if (keep.size() > k) keep.resize(k);
    return keep;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// Random text mixing reasoning, well-formed and broken tags, stray closers,
// near-miss spellings and multibyte characters.
inline std::string tag_soup(std::mt19937_64& rng) {
    static const std::vector<std::string> pieces = {
        "<search>", "</search>", "<perceive>", "</perceive>", "<code>", "</code>", "<Search>", "</CODE>",
        "<search", "search>", "</", "<", ">", " ", "\n", "\t", "the answer", "print(1)", "x < y", "a>b",
        "caf\xc3\xa9", "\xe2\x9c\x93", "<result>", "</result>", "<<code>>", "  ", "42", "<perceive >",
    };
    std::uniform_int_distribution<int> len(0, 40);
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    std::string out;
    for (int i = len(rng); i > 0; --i) out += pieces[pick(rng)];
    return out;
}

}  // namespace oracle

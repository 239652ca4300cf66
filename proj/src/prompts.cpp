#include "mmagent/prompts.hpp"

#include <fstream>
#include <sstream>

namespace mmagent {

namespace {

struct BuiltinPrompt {
    const char* name;
    const char* text;
};

// Generated at configure time from assets/prompts/*.txt.
#include "builtin_prompts.inc"

std::string normalize(std::string text) {
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

bool is_slot_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

}  // namespace

std::string render_template(std::string_view tmpl, const Slots& slots) {
    std::string out;
    out.reserve(tmpl.size());
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        const char c = tmpl[i];
        if (c == '{' && i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
            out += '{';
            ++i;
            continue;
        }
        if (c == '}' && i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
            out += '}';
            ++i;
            continue;
        }
        if (c == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && is_slot_char(tmpl[j])) ++j;
            if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
                const auto name = tmpl.substr(i + 1, j - i - 1);
                auto it = slots.find(name);
                if (it == slots.end()) throw TemplateError("no value for template slot {" + std::string(name) + "}");
                out += it->second;
                i = j;
                continue;
            }
        }
        out += c;
    }
    return out;
}

PromptAssets PromptAssets::builtin() {
    PromptAssets assets;
    for (const auto& p : kBuiltinPrompts) assets.texts_[p.name] = normalize(p.text);
    return assets;
}

PromptAssets PromptAssets::from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw MissingAsset("prompt directory not found: " + dir.string());
    PromptAssets assets;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        assets.texts_[entry.path().stem().string()] = normalize(ss.str());
    }
    return assets;
}

PromptAssets PromptAssets::with_overrides(const std::filesystem::path& dir) {
    PromptAssets assets = builtin();
    for (auto& [name, text] : from_directory(dir).texts_) assets.texts_[name] = text;
    return assets;
}

const std::string& PromptAssets::get(std::string_view name) const {
    auto it = texts_.find(name);
    if (it == texts_.end()) throw MissingAsset("prompt asset '" + std::string(name) + ".txt' is missing");
    return it->second;
}

}  // namespace mmagent

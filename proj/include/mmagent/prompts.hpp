#pragma once

#include "mmagent/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace mmagent {

class MissingAsset : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

using Slots = std::map<std::string, std::string, std::less<>>;

/// Fills `{name}` placeholders from `slots`; `{{` and `}}` are literal braces.
/// Throws TemplateError for placeholders with no slot.
std::string render_template(std::string_view tmpl, const Slots& slots);

/// Named prompt texts (file stem -> contents).
class PromptAssets {
public:
    /// The prompts compiled into the library from assets/prompts/.
    static PromptAssets builtin();
    /// Only the *.txt files present in `dir`.
    static PromptAssets from_directory(const std::filesystem::path& dir);
    /// Builtins, with each file in `dir` replacing the builtin of the same name.
    static PromptAssets with_overrides(const std::filesystem::path& dir);

    /// Throws MissingAsset when absent.
    const std::string& get(std::string_view name) const;
    bool has(std::string_view name) const { return texts_.find(name) != texts_.end(); }
    void set(std::string name, std::string text) { texts_[std::move(name)] = std::move(text); }
    std::string render(std::string_view name, const Slots& slots) const { return render_template(get(name), slots); }

    const std::map<std::string, std::string, std::less<>>& all() const { return texts_; }

private:
    std::map<std::string, std::string, std::less<>> texts_;
};

}  // namespace mmagent

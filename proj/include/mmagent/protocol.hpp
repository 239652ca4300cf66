#pragma once

// Control-token grammar for executor output.
//
// The grammar is regular: text is a sequence of free reasoning and
// invocations of the form <tag> payload </tag> with tag one of search,
// perceive, code. Tags are exact and case-sensitive. There is no nesting: an
// opening tag inside a payload is payload text, and a closing tag with no
// opener is reasoning text.

#include "mmagent/types.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mmagent {

std::string open_tag(ToolKind kind);
std::string close_tag(ToolKind kind);

/// Half-open byte interval [begin, end) into the scanned text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    friend bool operator==(const Span&, const Span&) = default;
};

enum class SegmentKind {
    Reasoning,
    Invocation,
    /// An opening tag with no closer before end of text. Always the last segment.
    UnterminatedInvocation,
};

struct Segment {
    SegmentKind kind = SegmentKind::Reasoning;
    /// Reasoning: the raw slice. Invocations: the payload with ASCII whitespace trimmed.
    std::string text;
    std::optional<ToolKind> tool;
    Span span;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Splits `text` into reasoning and invocation segments. The spans are
/// contiguous and cover the whole input.
std::vector<Segment> scan(std::string_view text);

struct Invocation {
    ToolKind tool;
    std::string payload;
    Span span;
    friend bool operator==(const Invocation&, const Invocation&) = default;
};

/// Earliest complete invocation by opening-tag position, if any.
std::optional<Invocation> first_invocation(std::string_view text);

/// Canonical rendering "<tag> payload </tag>".
std::string render_invocation(ToolKind kind, std::string_view payload);

}  // namespace mmagent

#include "mmagent/protocol.hpp"

#include "mmagent/text.hpp"

namespace mmagent {

std::string open_tag(ToolKind kind) { return "<" + std::string(tool_tag(kind)) + ">"; }
std::string close_tag(ToolKind kind) { return "</" + std::string(tool_tag(kind)) + ">"; }

std::string render_invocation(ToolKind kind, std::string_view payload) {
    return open_tag(kind) + " " + std::string(payload) + " " + close_tag(kind);
}

namespace {

struct OpenMatch {
    std::size_t pos = std::string_view::npos;
    ToolKind kind = ToolKind::Search;
};

OpenMatch find_open(std::string_view text, std::size_t from) {
    OpenMatch best;
    for (auto kind : kAllTools) {
        auto pos = text.find(open_tag(kind), from);
        if (pos < best.pos) {
            best.pos = pos;
            best.kind = kind;
        }
    }
    return best;
}

}  // namespace

std::vector<Segment> scan(std::string_view text) {
    std::vector<Segment> out;
    std::size_t cursor = 0;

    auto emit_reasoning = [&](std::size_t end) {
        if (end > cursor) {
            out.push_back({SegmentKind::Reasoning, std::string(text.substr(cursor, end - cursor)),
                           std::nullopt, {cursor, end}});
        }
    };

    while (cursor < text.size()) {
        auto open = find_open(text, cursor);
        if (open.pos == std::string_view::npos) break;

        const auto opener = open_tag(open.kind);
        const auto closer = close_tag(open.kind);
        const std::size_t body_begin = open.pos + opener.size();
        const auto close_pos = text.find(closer, body_begin);

        emit_reasoning(open.pos);
        if (close_pos == std::string_view::npos) {
            out.push_back({SegmentKind::UnterminatedInvocation, std::string(trim(text.substr(body_begin))),
                           open.kind, {open.pos, text.size()}});
            cursor = text.size();
            return out;
        }
        const std::size_t end = close_pos + closer.size();
        out.push_back({SegmentKind::Invocation,
                       std::string(trim(text.substr(body_begin, close_pos - body_begin))), open.kind,
                       {open.pos, end}});
        cursor = end;
    }
    emit_reasoning(text.size());
    return out;
}

std::optional<Invocation> first_invocation(std::string_view text) {
    // Only the earliest opener matters: if it is unterminated, nothing after it
    // can be a complete invocation (later openers are part of its payload).
    for (const auto& seg : scan(text)) {
        if (seg.kind == SegmentKind::Invocation) return Invocation{*seg.tool, seg.text, seg.span};
        if (seg.kind == SegmentKind::UnterminatedInvocation) return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace mmagent

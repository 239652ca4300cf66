#include "mmagent/protocol.hpp"
#include "mmagent/text.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mmagent;

namespace {

std::string concat_spans(std::string_view text, const std::vector<Segment>& segs) {
    std::string out;
    for (const auto& s : segs) out += text.substr(s.span.begin, s.span.size());
    return out;
}

}  // namespace

TEST_CASE("types: tool names and lists") {
    CHECK(tool_name(ToolKind::Search) == "Search");
    CHECK(tool_tag(ToolKind::Code) == "code");
    CHECK(parse_tool_name("PERCEIVE") == ToolKind::Perceive);
    CHECK_FALSE(parse_tool_name("OCR").has_value());

    const auto set = parse_tool_list("search, code");
    CHECK(set.contains(ToolKind::Search));
    CHECK(set.contains(ToolKind::Code));
    CHECK_FALSE(set.contains(ToolKind::Perceive));
    CHECK(set.size() == 2);
    CHECK(set.is_subset_of(ToolSet::all()));
    CHECK_THROWS_AS(parse_tool_list("search,ocr"), std::invalid_argument);
    CHECK(parse_tool_list(format_tool_list(set)) == set);
}

TEST_CASE("types: option labels and prompt text") {
    CHECK(option_label(0) == "A");
    CHECK(option_label(3) == "D");
    TaskInput t{"x", std::nullopt, "Which?", {"red", "green"}};
    CHECK(t.prompt_text() == "Which?\nOptions:\nA. red\nB. green");
    TaskInput plain{"y", std::nullopt, "Why?", {}};
    CHECK(plain.prompt_text() == "Why?");
}

TEST_CASE("text helpers") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(to_lower("AbC") == "abc");
    CHECK(split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
    CHECK(iequals("Search", "sEARCH"));
    CHECK(starts_with_icase("Answer: x", "answer:"));
}

TEST_CASE("grammar: the four prompt forms") {
    struct Case {
        const char* text;
        ToolKind kind;
        const char* payload;
    };
    for (const auto& c : {Case{"<search> q </search>", ToolKind::Search, "q"},
                          Case{"<search> image </search>", ToolKind::Search, "image"},
                          Case{"<perceive> q </perceive>", ToolKind::Perceive, "q"},
                          Case{"<code> c </code>", ToolKind::Code, "c"}}) {
        CAPTURE(c.text);
        auto inv = first_invocation(c.text);
        REQUIRE(inv);
        CHECK(inv->tool == c.kind);
        CHECK(inv->payload == c.payload);
        CHECK(inv->span == Span{0, std::string_view(c.text).size()});
    }
}

TEST_CASE("scan: reasoning around one invocation") {
    const std::string text = "I should look it up. <search> capital of France </search> trailing";
    auto segs = scan(text);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].kind == SegmentKind::Reasoning);
    CHECK(segs[0].text == "I should look it up. ");
    CHECK(segs[1].kind == SegmentKind::Invocation);
    CHECK(segs[1].tool == ToolKind::Search);
    CHECK(segs[1].text == "capital of France");
    CHECK(segs[2].text == " trailing");
}

TEST_CASE("scan: edge cases") {
    SUBCASE("empty input") { CHECK(scan("").empty()); }
    SUBCASE("tags are case-sensitive") {
        auto segs = scan("<Search> q </Search>");
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].kind == SegmentKind::Reasoning);
    }
    SUBCASE("stray closer is reasoning") {
        auto segs = scan("done </code> really");
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].kind == SegmentKind::Reasoning);
    }
    SUBCASE("no nesting: inner opener is payload") {
        auto segs = scan("<code> a <search> b </code>");
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].tool == ToolKind::Code);
        CHECK(segs[0].text == "a <search> b");
    }
    SUBCASE("mismatched closer does not close") {
        auto segs = scan("<code> x </search> y");
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].kind == SegmentKind::UnterminatedInvocation);
        CHECK(segs[0].text == "x </search> y");
    }
    SUBCASE("unterminated opener is last") {
        auto segs = scan("think <perceive> what colour");
        REQUIRE(segs.size() == 2);
        CHECK(segs[1].kind == SegmentKind::UnterminatedInvocation);
        CHECK(segs[1].tool == ToolKind::Perceive);
        CHECK(segs[1].span.end == std::string_view("think <perceive> what colour").size());
        CHECK_FALSE(first_invocation("think <perceive> what colour").has_value());
    }
    SUBCASE("empty payload") {
        auto inv = first_invocation("<search>   </search>");
        REQUIRE(inv);
        CHECK(inv->payload.empty());
    }
    SUBCASE("multiple invocations keep order") {
        auto segs = scan("<search>a</search><code>b</code>");
        REQUIRE(segs.size() == 2);
        CHECK(segs[0].tool == ToolKind::Search);
        CHECK(segs[1].tool == ToolKind::Code);
        CHECK(first_invocation("<search>a</search><code>b</code>")->payload == "a");
    }
}

TEST_CASE("render_invocation is canonical") {
    CHECK(render_invocation(ToolKind::Code, "print(1)") == "<code> print(1) </code>");
    auto inv = first_invocation(render_invocation(ToolKind::Perceive, "what is it?"));
    REQUIRE(inv);
    CHECK(inv->payload == "what is it?");
}

TEST_CASE("scan properties on random tag soup") {
    std::mt19937_64 rng(20240611);
    for (int i = 0; i < 500; ++i) {
        const auto text = oracle::tag_soup(rng);
        CAPTURE(text);
        const auto segs = scan(text);

        // spans tile the input
        CHECK(concat_spans(text, segs) == text);
        std::size_t pos = 0;
        for (const auto& s : segs) {
            CHECK(s.span.begin == pos);
            CHECK(s.span.end > s.span.begin);
            pos = s.span.end;
        }
        for (std::size_t j = 0; j + 1 < segs.size(); ++j)
            CHECK(segs[j].kind != SegmentKind::UnterminatedInvocation);
        for (std::size_t j = 0; j + 1 < segs.size(); ++j)
            if (segs[j].kind == SegmentKind::Reasoning) CHECK(segs[j + 1].kind != SegmentKind::Reasoning);

        // first_invocation agrees with scan
        std::optional<Invocation> expected;
        for (const auto& s : segs) {
            if (s.kind == SegmentKind::Invocation) {
                expected = Invocation{*s.tool, s.text, s.span};
                break;
            }
            if (s.kind == SegmentKind::UnterminatedInvocation) break;
        }
        CHECK(first_invocation(text) == expected);

        // completed invocations of a prefix stay completed in the full text
        const std::size_t cut = text.size() / 2;
        for (const auto& s : scan(std::string_view(text).substr(0, cut))) {
            if (s.kind != SegmentKind::Invocation) continue;
            bool found = false;
            for (const auto& f : segs) found = found || (f.kind == SegmentKind::Invocation && f.span == s.span);
            CHECK(found);
        }
    }
}

#include "mmagent/eval.hpp"
#include "mmagent/pipeline.hpp"
#include "mmagent/protocol.hpp"
#include "mmagent/search/index.hpp"
#include "mmagent/search/ingest.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

namespace py = pybind11;
using namespace mmagent;

namespace {

std::string_view segment_kind_name(SegmentKind k) {
    switch (k) {
        case SegmentKind::Reasoning: return "reasoning";
        case SegmentKind::Invocation: return "invocation";
        case SegmentKind::UnterminatedInvocation: return "unterminated";
    }
    return "reasoning";
}

ToolKind tool_from_name(std::string_view name) {
    if (auto k = parse_tool_name(name)) return *k;
    throw py::value_error("unknown tool: " + std::string(name));
}

py::dict segment_dict(const Segment& s) {
    py::dict d;
    d["kind"] = segment_kind_name(s.kind);
    d["text"] = s.text;
    d["tool"] = s.tool ? py::cast(std::string(tool_name(*s.tool))) : py::none();
    d["span"] = py::make_tuple(s.span.begin, s.span.end);
    return d;
}

py::list hits(const std::vector<ScoredPassage>& v) {
    py::list out;
    for (const auto& h : v) out.append(py::make_tuple(h.passage->id, h.passage->key, h.score));
    return out;
}

PassageIndex from_texts(const std::vector<std::string>& texts) {
    std::vector<Passage> ps;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        Passage p;
        p.id = static_cast<std::uint32_t>(i);
        p.key = std::to_string(i);
        p.text = texts[i];
        ps.push_back(std::move(p));
    }
    return PassageIndex(std::move(ps));
}

PassageIndex ingest_dump(const std::filesystem::path& path, std::size_t min_words, std::size_t chunk_size,
                         std::size_t overlap) {
    std::ifstream in(path);
    if (!in) throw py::value_error("dump not found: " + path.string());
    return build_index(in, IngestOptions{min_words, chunk_size, overlap}, nullptr);
}

/// Runs one task against a replay script and returns the trace log as JSON text.
std::string run_scripted(const std::string& task_json, const std::string& script_json, const PassageIndex* index,
                         int max_turns, const std::string& tools) {
    const auto j = nlohmann::json::parse(task_json);
    TaskInput task;
    task.id = j.value("id", "task");
    task.question = j.at("question").get<std::string>();
    if (j.contains("image") && j["image"].is_string()) task.image = ImageRef{j["image"].get<std::string>()};
    task.options = j.value("options", std::vector<std::string>{});

    auto clock = std::make_shared<ManualClock>();
    ScriptedModel model(parse_script(script_json), clock);
    const auto prompts = PromptAssets::builtin();
    PipelineServices services;
    services.prompts = &prompts;
    services.index = index;
    services.clock = clock.get();
    PipelineConfig config;
    config.max_turns = max_turns;
    config.pool = parse_tool_list(tools);
    py::gil_scoped_release release;
    return trace_log(run_pipeline(task, model, config, services)).dump();
}

}  // namespace

PYBIND11_MODULE(_mmagent, m) {
    m.doc() = "Bindings for the mmagent runtime core.";
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("scan", [](std::string_view text) {
        py::list out;
        for (const auto& s : scan(text)) out.append(segment_dict(s));
        return out;
    }, py::arg("text"));
    m.def("first_invocation", [](std::string_view text) -> py::object {
        auto inv = first_invocation(text);
        if (!inv) return py::none();
        return py::make_tuple(std::string(tool_name(inv->tool)), inv->payload);
    }, py::arg("text"));
    m.def("render_invocation", [](std::string_view tool, std::string_view payload) {
        return render_invocation(tool_from_name(tool), payload);
    }, py::arg("tool"), py::arg("payload"));

    m.def("chunk_spans", [](std::size_t n, std::size_t size, std::size_t overlap) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& s : chunk_spans(n, size, overlap)) out.emplace_back(s.start, s.end);
        return out;
    }, py::arg("n_tokens"), py::arg("size") = kDefaultChunkSize, py::arg("overlap") = kDefaultChunkOverlap);
    m.def("word_count", &word_count, py::arg("text"));
    m.def("keep_page", [](const std::string& text, std::size_t min_words) {
        return keep_page(Document{"", "", text}, min_words);
    }, py::arg("text"), py::arg("min_words") = kDefaultMinWords);
    m.def("analyze", &analyze, py::arg("text"));

    py::class_<PassageIndex>(m, "PassageIndex")
        .def_static("from_texts", &from_texts, py::arg("texts"))
        .def_static("from_dump", &ingest_dump, py::arg("path"), py::arg("min_words") = kDefaultMinWords,
                    py::arg("chunk_size") = kDefaultChunkSize, py::arg("overlap") = kDefaultChunkOverlap)
        .def_static("load", &PassageIndex::load, py::arg("dir"))
        .def("save", &PassageIndex::save, py::arg("dir"))
        .def("bm25_search", [](const PassageIndex& idx, std::string_view query, std::size_t k, double k1, double b) {
            return hits(idx.bm25_search(query, k, Bm25Params{k1, b}));
        }, py::arg("query"), py::arg("k") = 8, py::arg("k1") = 1.2, py::arg("b") = 0.75)
        .def("__len__", [](const PassageIndex& idx) { return idx.passages().size(); })
        .def_property_readonly("stats", [](const PassageIndex& idx) {
            const auto& s = idx.stats();
            py::dict d;
            d["doc_count"] = s.doc_count;
            d["passage_count"] = s.passage_count;
            d["avg_passage_len"] = s.avg_passage_len;
            d["vocabulary_size"] = s.vocabulary_size;
            return d;
        });

    m.def("normalize_answer", &normalize_answer, py::arg("text"));
    m.def("exact_match", &exact_match, py::arg("prediction"), py::arg("gold"));
    m.def("p50", [](std::vector<double> v) { return p50(std::move(v)); }, py::arg("samples"));

    m.def("decoding_preset", [](const std::string& name) {
        const auto d = DecodingConfig::preset(name);
        py::dict out;
        out["temperature"] = d.temperature;
        out["top_p"] = d.top_p;
        out["top_k"] = d.top_k;
        out["repetition_penalty"] = d.repetition_penalty;
        out["max_new_tokens"] = d.max_new_tokens;
        return out;
    }, py::arg("name"));

    m.def("run_scripted", &run_scripted, py::arg("task_json"), py::arg("script_json"), py::arg("index") = nullptr,
          py::arg("max_turns") = kDefaultMaxTurns, py::arg("tools") = "search,perceive,code");
}

#include "mmagent/eval.hpp"

#include "mmagent/text.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace mmagent {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

TaskInput Example::task() const { return TaskInput{id, image, question, options}; }

namespace {

std::string required_string(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw DatasetError("line " + std::to_string(line) + ": missing string field '" + key + "'");
    return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array()) throw DatasetError("line " + std::to_string(line) + ": '" + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string())
            throw DatasetError("line " + std::to_string(line) + ": '" + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

bool gold_in_options(const Example& ex) {
    for (std::size_t i = 0; i < ex.options.size(); ++i) {
        if (iequals(trim(ex.gold), option_label(i))) return true;
        if (exact_match(ex.options[i], ex.gold)) return true;
    }
    return false;
}

ordered_json tool_times_json(const std::map<ToolKind, ToolTiming>& times) {
    ordered_json out = ordered_json::object();
    for (const auto& [kind, t] : times)
        out[std::string(tool_name(kind))] = {{"calls", t.calls}, {"wall_time_ms", to_ms(t.wall_time)}};
    return out;
}

std::map<ToolKind, ToolTiming> tool_times_from_json(const json& j) {
    std::map<ToolKind, ToolTiming> out;
    if (!j.is_object()) return out;
    for (const auto& [name, v] : j.items()) {
        auto kind = parse_tool_name(name);
        if (!kind) throw Error("unknown tool '" + name + "' in run record");
        out[*kind] = ToolTiming{v.value("calls", 0), from_ms(v.value("wall_time_ms", 0.0))};
    }
    return out;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
    if (!out) throw Error("write failed: " + path.string());
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

RunRecord run_one(const Example& ex, const PipelineConfig& config, const PipelineServices& services,
                  const ModelFactory& models, ordered_json* trace_out) {
    RunRecord rec;
    rec.example_id = ex.id;
    try {
        ModelBinding binding = models(ex);
        if (!binding.model) throw Error("model factory returned no model");
        PipelineServices local = services;
        if (binding.clock) local.clock = binding.clock.get();
        PipelineResult result = run_pipeline(ex.task(), *binding.model, config, local);
        rec.prediction = result.answer;
        rec.correct = score(ex, result.answer);
        rec.turns_used = result.trace.turns_used;
        rec.total_latency = result.total_latency;
        rec.model_time = result.model_time;
        rec.model_calls = result.model_calls;
        rec.tool_time = result.tool_time;
        if (trace_out) *trace_out = trace_log(result);
    } catch (const std::exception& e) {
        rec.correct = false;
        rec.error = e.what();
    }
    return rec;
}

}  // namespace

std::vector<Example> parse_dataset(std::istream& in, const fs::path& base_dir) {
    std::vector<Example> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DatasetError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object()) throw DatasetError("line " + std::to_string(lineno) + ": expected an object");

        Example ex;
        ex.id = required_string(j, "id", lineno);
        ex.question = required_string(j, "question", lineno);
        ex.gold = required_string(j, "gold", lineno);
        if (auto it = j.find("image"); it != j.end() && !it->is_null()) {
            if (!it->is_string()) throw DatasetError("line " + std::to_string(lineno) + ": 'image' must be a string");
            std::string uri = it->get<std::string>();
            const bool remote = uri.find("://") != std::string::npos || starts_with_icase(uri, "data:");
            if (!remote && !base_dir.empty() && fs::path(uri).is_relative()) uri = (base_dir / uri).string();
            ex.image = ImageRef{uri};
        }
        ex.options = string_list(j, "options", lineno);
        ex.tags = string_list(j, "tags", lineno);
        if (auto it = j.find("split"); it != j.end() && it->is_string()) ex.split = it->get<std::string>();

        if (ex.id.empty()) throw DatasetError("line " + std::to_string(lineno) + ": empty id");
        if (trim(ex.gold).empty()) throw DatasetError("line " + std::to_string(lineno) + ": empty gold answer");
        if (!ex.options.empty() && !gold_in_options(ex))
            throw DatasetError("line " + std::to_string(lineno) + ": gold '" + ex.gold +
                               "' is neither an option nor an option label");
        if (!ids.insert(ex.id).second) throw DatasetError("line " + std::to_string(lineno) + ": duplicate id " + ex.id);
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<Example> load_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot read dataset " + path.string());
    try {
        return parse_dataset(in, path.parent_path());
    } catch (const DatasetError& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
}

std::string normalize_answer(std::string_view s) {
    std::string lowered = to_lower(trim(s));
    std::string_view v = lowered;
    while (!v.empty()) {
        const char c = v.back();
        if (c == '.' || c == ',' || c == '!' || c == '?' || is_ascii_space(c))
            v.remove_suffix(1);
        else
            break;
    }
    std::string out;
    bool pending_space = false;
    for (char c : v) {
        if (is_ascii_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += c;
    }
    return out;
}

bool exact_match(std::string_view prediction, std::string_view gold) {
    return normalize_answer(prediction) == normalize_answer(gold);
}

double p50(std::vector<double> samples) {
    if (samples.empty()) throw EmptySamples();
    const std::size_t n = samples.size();
    const auto mid = samples.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(samples.begin(), mid, samples.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(samples.begin(), mid);
    return (lower + upper) / 2.0;
}

Duration p50(const std::vector<Duration>& samples) {
    if (samples.empty()) throw EmptySamples();
    std::vector<Duration::rep> v;
    v.reserve(samples.size());
    for (auto d : samples) v.push_back(d.count());
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (n % 2 == 1) return Duration(*mid);
    const auto upper = *mid;
    const auto lower = *std::max_element(v.begin(), mid);
    return Duration(lower + (upper - lower) / 2);
}

bool score(const Example& example, const FinalAnswer& answer) {
    if (!example.options.empty() && answer.chosen_option) {
        const auto& label = *answer.chosen_option;
        if (iequals(trim(example.gold), label)) return true;
        for (std::size_t i = 0; i < example.options.size(); ++i)
            if (option_label(i) == label) return exact_match(example.options[i], example.gold);
        return false;
    }
    return exact_match(answer.text, example.gold);
}

ordered_json to_json(const RunRecord& r) {
    ordered_json j;
    j["example_id"] = r.example_id;
    j["prediction"] = {{"text", r.prediction.text},
                       {"chosen_option", r.prediction.chosen_option ? ordered_json(*r.prediction.chosen_option)
                                                                    : ordered_json(nullptr)},
                       {"raw", r.prediction.raw},
                       {"warnings", r.prediction.warnings}};
    j["correct"] = r.correct;
    j["turns_used"] = r.turns_used;
    j["total_latency_ms"] = to_ms(r.total_latency);
    j["model_time_ms"] = to_ms(r.model_time);
    j["model_calls"] = r.model_calls;
    j["tools"] = tool_times_json(r.tool_time);
    j["error"] = r.error ? ordered_json(*r.error) : ordered_json(nullptr);
    return j;
}

RunRecord record_from_json(const json& j) {
    RunRecord r;
    try {
        r.example_id = j.at("example_id").get<std::string>();
        const auto& p = j.at("prediction");
        r.prediction.text = p.value("text", "");
        if (p.contains("chosen_option") && p["chosen_option"].is_string())
            r.prediction.chosen_option = p["chosen_option"].get<std::string>();
        r.prediction.raw = p.value("raw", "");
        r.prediction.warnings = p.value("warnings", std::vector<std::string>{});
        r.correct = j.at("correct").get<bool>();
        r.turns_used = j.at("turns_used").get<int>();
        r.total_latency = from_ms(j.at("total_latency_ms").get<double>());
        r.model_time = from_ms(j.at("model_time_ms").get<double>());
        r.model_calls = j.value("model_calls", 0);
        r.tool_time = tool_times_from_json(j.value("tools", json::object()));
        if (j.contains("error") && j["error"].is_string()) r.error = j["error"].get<std::string>();
    } catch (const json::exception& e) {
        throw Error(std::string("malformed run record: ") + e.what());
    }
    return r;
}

Report aggregate(const std::vector<RunRecord>& records, ordered_json config) {
    Report rep;
    rep.config = std::move(config);
    rep.examples = records.size();
    if (records.empty()) return rep;
    std::vector<Duration> latency, model;
    long long turns = 0;
    for (const auto& r : records) {
        if (r.correct) ++rep.correct;
        if (r.error) ++rep.errors;
        turns += r.turns_used;
        latency.push_back(r.total_latency);
        model.push_back(r.model_time);
        for (const auto& [kind, t] : r.tool_time) {
            auto& total = rep.tool_totals[kind];
            total.calls += t.calls;
            total.wall_time += t.wall_time;
        }
    }
    rep.accuracy = static_cast<double>(rep.correct) / static_cast<double>(rep.examples);
    rep.avg_turns = static_cast<double>(turns) / static_cast<double>(rep.examples);
    rep.latency_p50 = p50(latency);
    rep.model_time_p50 = p50(model);
    return rep;
}

ordered_json to_json(const Report& r) {
    ordered_json j;
    j["examples"] = r.examples;
    j["correct"] = r.correct;
    j["errors"] = r.errors;
    j["accuracy"] = r.accuracy;
    j["avg_turns"] = r.avg_turns;
    j["latency_p50_ms"] = to_ms(r.latency_p50);
    j["model_time_p50_ms"] = to_ms(r.model_time_p50);
    j["tools"] = tool_times_json(r.tool_totals);
    j["config"] = r.config;
    return j;
}

std::string render_table(const std::vector<std::pair<std::string, Report>>& rows) {
    std::size_t name_width = 7;
    for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-*s  %6s  %11s  %13s  %8s\n", static_cast<int>(name_width), "Dataset", "Turns",
                  "Latency (s)", "MLLM Time (s)", "Accuracy");
    out += buf;
    out += std::string(name_width + 2 + 6 + 2 + 11 + 2 + 13 + 2 + 8, '-') + "\n";
    for (const auto& [name, r] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s  %6s  %11s  %13s  %8s\n", static_cast<int>(name_width), name.c_str(),
                      fixed(r.avg_turns, 2).c_str(), fixed(to_ms(r.latency_p50) / 1000.0, 1).c_str(),
                      fixed(to_ms(r.model_time_p50) / 1000.0, 1).c_str(), fixed(r.accuracy, 3).c_str());
        out += buf;
    }
    return out;
}

std::vector<RunRecord> load_records(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw NoRecords("no run records found in " + dir.string());
    fs::path root = fs::is_directory(dir / "records") ? dir / "records" : dir;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<RunRecord> out;
    for (const auto& f : files) {
        std::ifstream in(f);
        json j = json::parse(in, nullptr, false);
        // report.json and config.json share the directory layout; skip anything that is not a record
        if (j.is_discarded() || !j.is_object() || !j.contains("example_id")) continue;
        out.push_back(record_from_json(j));
    }
    if (out.empty()) throw NoRecords("no run records found in " + dir.string());
    return out;
}

std::string safe_file_stem(std::string_view id) {
    std::string out;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                        c == '_' || c == '-';
        out += ok ? c : '_';
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

BenchmarkResult run_benchmark(const std::vector<Example>& dataset, const PipelineConfig& config,
                              const PipelineServices& services, const ModelFactory& models,
                              const BenchmarkOptions& options) {
    if (dataset.empty()) throw EmptyDataset();
    if (options.concurrency < 1) throw std::invalid_argument("concurrency must be positive");

    std::optional<fs::path> records_dir, traces_dir;
    if (options.out_dir) {
        records_dir = *options.out_dir / "records";
        traces_dir = *options.out_dir / "traces";
        fs::create_directories(*records_dir);
        fs::create_directories(*traces_dir);
        write_file(*options.out_dir / "config.json", options.config_snapshot.dump(2) + "\n");
    }

    std::vector<RunRecord> records(dataset.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
            ordered_json trace;
            records[i] = run_one(dataset[i], config, services, models, options.out_dir ? &trace : nullptr);
            if (!options.out_dir) continue;
            const auto stem = safe_file_stem(dataset[i].id);
            try {
                write_file(*records_dir / (stem + ".json"), to_json(records[i]).dump(2) + "\n");
                if (!trace.is_null()) write_file(*traces_dir / (stem + ".json"), trace.dump(2) + "\n");
            } catch (const std::exception& e) {
                if (!records[i].error) records[i].error = e.what();
            }
        }
    };

    const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.concurrency), dataset.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
        worker();
    }

    BenchmarkResult result;
    result.report = aggregate(records, options.config_snapshot);
    result.records = std::move(records);
    if (options.out_dir) write_file(*options.out_dir / "report.json", to_json(result.report).dump(2) + "\n");
    return result;
}

std::string_view sweep_parameter_name(SweepParameter p) {
    return p == SweepParameter::TopK ? "top_k" : "max_turns";
}

SweepParameter parse_sweep_parameter(std::string_view name) {
    if (iequals(name, "top_k") || iequals(name, "top-k")) return SweepParameter::TopK;
    if (iequals(name, "max_turns") || iequals(name, "max-turns")) return SweepParameter::MaxTurns;
    throw std::invalid_argument("unknown sweep parameter '" + std::string(name) + "' (expected top_k or max_turns)");
}

std::vector<std::pair<int, Report>> sweep(SweepParameter parameter, const std::vector<int>& values,
                                          const std::vector<Example>& dataset, const PipelineConfig& config,
                                          const PipelineServices& services, const ModelFactory& models,
                                          const BenchmarkOptions& options) {
    if (values.empty()) throw std::invalid_argument("sweep needs at least one value");
    std::vector<std::pair<int, Report>> out;
    for (int v : values) {
        PipelineConfig c = config;
        if (parameter == SweepParameter::TopK) {
            c.retrieval.top_k = v;
            c.retrieval.validate();
        } else {
            if (v < 1) throw std::invalid_argument("max_turns must be >= 1");
            c.max_turns = v;
        }
        BenchmarkOptions o = options;
        o.config_snapshot[std::string(sweep_parameter_name(parameter))] = v;
        if (options.out_dir)
            o.out_dir = *options.out_dir / (std::string(sweep_parameter_name(parameter)) + "=" + std::to_string(v));
        out.emplace_back(v, run_benchmark(dataset, c, services, models, o).report);
    }
    return out;
}

std::string sweep_csv(const std::vector<std::pair<int, Report>>& results) {
    std::string out = "value,accuracy,avg_turns,latency_p50\n";
    for (const auto& [v, r] : results)
        out += std::to_string(v) + "," + fixed(r.accuracy, 4) + "," + fixed(r.avg_turns, 4) + "," +
               fixed(to_ms(r.latency_p50) / 1000.0, 4) + "\n";
    return out;
}

}  // namespace mmagent

#pragma once

// Dataset loading, scoring and latency accounting for benchmark runs.

#include "mmagent/pipeline.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>

namespace mmagent {

class DatasetError : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    EmptyDataset() : Error("dataset is empty") {}
};

class EmptySamples : public Error {
public:
    EmptySamples() : Error("p50 of an empty sample set") {}
};

class NoRecords : public Error {
public:
    using Error::Error;
};

struct Example {
    std::string id;
    std::optional<ImageRef> image;
    std::string question;
    std::vector<std::string> options;
    std::string gold;
    std::string split;
    std::vector<std::string> tags;

    TaskInput task() const;
};

/// One Example per line: {"id", "question", "gold", "image"?, "options"?, "split"?, "tags"?}.
/// Relative image paths resolve against `base_dir`. Blank lines are skipped.
std::vector<Example> parse_dataset(std::istream& in, const std::filesystem::path& base_dir = {});
std::vector<Example> load_dataset(const std::filesystem::path& path);

/// Lowercase, trim, drop trailing . , ! ? and collapse internal whitespace.
std::string normalize_answer(std::string_view s);
bool exact_match(std::string_view prediction, std::string_view gold);

/// Median; the mean of the two middle values for even sizes.
double p50(std::vector<double> samples);
Duration p50(const std::vector<Duration>& samples);

/// Option tasks compare the chosen option against the gold label or value;
/// everything else is exact match on the answer text.
bool score(const Example& example, const FinalAnswer& answer);

struct RunRecord {
    std::string example_id;
    FinalAnswer prediction;
    bool correct = false;
    int turns_used = 0;
    Duration total_latency{0};
    Duration model_time{0};
    int model_calls = 0;
    std::map<ToolKind, ToolTiming> tool_time;
    /// Set when the pipeline threw; the example then counts as incorrect.
    std::optional<std::string> error;
};

nlohmann::ordered_json to_json(const RunRecord& record);
RunRecord record_from_json(const nlohmann::json& j);

struct Report {
    std::size_t examples = 0;
    std::size_t correct = 0;
    std::size_t errors = 0;
    double accuracy = 0.0;
    double avg_turns = 0.0;
    Duration latency_p50{0};
    Duration model_time_p50{0};
    std::map<ToolKind, ToolTiming> tool_totals;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// Records are aggregated in the order given; equal inputs give equal reports.
Report aggregate(const std::vector<RunRecord>& records, nlohmann::ordered_json config = nlohmann::ordered_json::object());
nlohmann::ordered_json to_json(const Report& report);

/// Dataset | Turns | Latency (s) | MLLM Time (s) | Accuracy
std::string render_table(const std::vector<std::pair<std::string, Report>>& rows);

/// Reads every *.json record under `dir` (or `dir`/records), sorted by file name.
std::vector<RunRecord> load_records(const std::filesystem::path& dir);

/// Model (and optional simulated clock) bound to one example.
struct ModelBinding {
    std::unique_ptr<Model> model;
    std::shared_ptr<const Clock> clock;
};
using ModelFactory = std::function<ModelBinding(const Example&)>;

struct BenchmarkOptions {
    int concurrency = 1;
    /// When set: records/<id>.json, traces/<id>.json, report.json and config.json.
    std::optional<std::filesystem::path> out_dir;
    nlohmann::ordered_json config_snapshot = nlohmann::ordered_json::object();
};

struct BenchmarkResult {
    std::vector<RunRecord> records;  // dataset order
    Report report;
};

BenchmarkResult run_benchmark(const std::vector<Example>& dataset, const PipelineConfig& config,
                              const PipelineServices& services, const ModelFactory& models,
                              const BenchmarkOptions& options = {});

enum class SweepParameter { TopK, MaxTurns };
std::string_view sweep_parameter_name(SweepParameter p);
SweepParameter parse_sweep_parameter(std::string_view name);

/// One benchmark per value with everything else held fixed. With an out_dir,
/// each run goes to <out_dir>/<param>=<value>.
std::vector<std::pair<int, Report>> sweep(SweepParameter parameter, const std::vector<int>& values,
                                          const std::vector<Example>& dataset, const PipelineConfig& config,
                                          const PipelineServices& services, const ModelFactory& models,
                                          const BenchmarkOptions& options = {});

/// value,accuracy,avg_turns,latency_p50 (seconds)
std::string sweep_csv(const std::vector<std::pair<int, Report>>& results);

/// Example ids double as file names; anything outside [A-Za-z0-9._-] becomes '_'.
std::string safe_file_stem(std::string_view id);

}  // namespace mmagent

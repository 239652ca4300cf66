#include "mmagent/config.hpp"
#include "mmagent/eval.hpp"

#include "../support/mocks.hpp"
#include "../support/oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <iterator>
#include <random>
#include <sstream>

using namespace mmagent;
namespace fs = std::filesystem;

namespace {

ModelFactory scripted_factory() {
    return [](const Example& ex) {
        auto clock = std::make_shared<ManualClock>();
        auto script = load_script(testing::fixture("bench/scripts/" + ex.id + ".json"));
        return ModelBinding{std::make_unique<ScriptedModel>(std::move(script), clock), clock};
    };
}

RunRecord record(std::string id, bool correct, int turns, double latency_ms, double model_ms) {
    RunRecord r;
    r.example_id = std::move(id);
    r.correct = correct;
    r.turns_used = turns;
    r.total_latency = from_ms(latency_ms);
    r.model_time = from_ms(model_ms);
    return r;
}

}  // namespace

TEST_CASE("exact match normalization") {
    CHECK(exact_match("Paris.", "paris"));
    CHECK(exact_match("42", "42"));
    CHECK_FALSE(exact_match("New York", "York"));
    CHECK(exact_match("  New   York\tCity! ", "new york city"));
    CHECK(exact_match("yes?!", "Yes"));
    CHECK_FALSE(exact_match("3.5", "35"));
    CHECK(normalize_answer(" A.B. ") == "a.b");
    CHECK(normalize_answer("") == "");
}

TEST_CASE("p50") {
    CHECK(p50(std::vector<double>{2.3, 3.4, 5.9}) == 3.4);
    CHECK(p50(std::vector<double>{5.9, 2.3, 5.1, 3.4}) == doctest::Approx(4.25));
    CHECK(p50(std::vector<double>{7.0}) == 7.0);
    CHECK_THROWS_AS(p50(std::vector<double>{}), EmptySamples);
    CHECK(p50(std::vector<Duration>{from_ms(1), from_ms(3)}) == from_ms(2));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> v(0, 100);
    std::uniform_int_distribution<int> n(1, 40);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> s(n(rng));
        for (auto& x : s) x = v(rng);
        CHECK(p50(s) == oracle::median(s));
    }
}

TEST_CASE("dataset loading") {
    auto ds = load_dataset(testing::fixture("bench/dataset.jsonl"));
    REQUIRE(ds.size() == 10);
    CHECK(ds[0].id == "b01");
    CHECK(ds[0].image->uri == (testing::fixture("bench") / "images/b01.jpg").string());
    CHECK(ds[1].options.size() == 3);

    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_dataset(in);
    };
    CHECK_THROWS_AS(parse(R"({"id": "a", "question": "q"})"), DatasetError);
    CHECK_THROWS_AS(parse(R"({"id": "a", "question": "q", "gold": "  "})"), DatasetError);
    CHECK_THROWS_AS(parse(R"({"id": "a", "question": "q", "gold": "z", "options": ["x", "y"]})"), DatasetError);
    CHECK_NOTHROW(parse(R"({"id": "a", "question": "q", "gold": "b", "options": ["x", "y"]})"));
    CHECK_NOTHROW(parse(R"({"id": "a", "question": "q", "gold": "Y", "options": ["x", "y"]})"));
    CHECK_THROWS_AS(parse("{\"id\": \"a\", \"question\": \"q\", \"gold\": \"g\"}\n{\"id\": \"a\", \"question\": "
                          "\"q\", \"gold\": \"g\"}"),
                    DatasetError);
    CHECK_THROWS_AS(parse("{oops"), DatasetError);
    CHECK(parse("\n\n").empty());
    CHECK_THROWS_AS(load_dataset("/nonexistent.jsonl"), DatasetError);
}

TEST_CASE("scoring") {
    Example ex;
    ex.options = {"red", "green", "blue"};
    ex.gold = "B";
    FinalAnswer a;
    a.chosen_option = "B";
    CHECK(score(ex, a));
    ex.gold = "green";
    CHECK(score(ex, a));
    a.chosen_option = "A";
    CHECK_FALSE(score(ex, a));

    Example free;
    free.gold = "Paris";
    FinalAnswer b;
    b.text = "paris.";
    CHECK(score(free, b));
}

TEST_CASE("aggregate") {
    const std::vector<RunRecord> rs{record("a", true, 3, 2300, 1500), record("b", false, 4, 3400, 2300),
                                    record("c", true, 2, 5900, 4200)};
    auto rep = aggregate(rs);
    CHECK(rep.examples == 3);
    CHECK(rep.correct == 2);
    CHECK(rep.accuracy == doctest::Approx(2.0 / 3.0));
    CHECK(rep.avg_turns == 3.0);
    CHECK(rep.latency_p50 == from_ms(3400));
    CHECK(rep.model_time_p50 == from_ms(2300));
    CHECK(to_json(aggregate(rs)).dump() == to_json(rep).dump());

    const auto table = render_table({{"toy", rep}});
    CHECK(table.find("Dataset") != std::string::npos);
    CHECK(table.find("Turns") != std::string::npos);
    CHECK(table.find("Latency (s)") != std::string::npos);
    CHECK(table.find("MLLM Time (s)") != std::string::npos);
    CHECK(table.find("Accuracy") != std::string::npos);
    std::istringstream lines(table);
    std::string header, rule, row;
    std::getline(lines, header);
    std::getline(lines, rule);
    std::getline(lines, row);
    CHECK(rule.find_first_not_of('-') == std::string::npos);
    CHECK(rule.size() == header.size());
    std::istringstream cells(row);
    std::vector<std::string> got{std::istream_iterator<std::string>(cells), {}};
    CHECK(got == std::vector<std::string>{"toy", "3.00", "3.4", "2.3", "0.667"});
}

TEST_CASE("run records round-trip") {
    auto r = record("x", true, 2, 10, 5);
    r.prediction.text = "B";
    r.prediction.chosen_option = "B";
    r.tool_time[ToolKind::Search] = {2, from_ms(7)};
    r.error = "oops";
    auto back = record_from_json(nlohmann::json::parse(to_json(r).dump()));
    CHECK(back.example_id == "x");
    CHECK(back.prediction.chosen_option == "B");
    CHECK(back.tool_time.at(ToolKind::Search).calls == 2);
    CHECK(back.error == "oops");
    CHECK(to_json(back).dump() == to_json(r).dump());
}

TEST_CASE("scripted benchmark") {
    const auto ds = load_dataset(testing::fixture("bench/dataset.jsonl"));
    const auto prompts = PromptAssets::builtin();
    PipelineServices services;
    services.prompts = &prompts;

    BenchmarkOptions one;
    auto serial = run_benchmark(ds, PipelineConfig{}, services, scripted_factory(), one);
    CHECK(serial.report.accuracy == 0.7);
    CHECK(serial.report.correct == 7);
    CHECK(serial.report.errors == 1);
    CHECK(serial.records[9].error.has_value());
    for (const auto& r : serial.records) CHECK(r.model_time <= r.total_latency);

    BenchmarkOptions four;
    four.concurrency = 4;
    const auto dir = fs::temp_directory_path() / "mmagent_bench_test";
    fs::remove_all(dir);
    four.out_dir = dir;
    auto parallel = run_benchmark(ds, PipelineConfig{}, services, scripted_factory(), four);
    CHECK(parallel.report.accuracy == serial.report.accuracy);
    CHECK(parallel.report.avg_turns == serial.report.avg_turns);
    CHECK(to_json(parallel.report).dump() == to_json(serial.report).dump());
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "config.json"));
    CHECK(fs::exists(dir / "traces" / "b01.json"));
    CHECK_FALSE(fs::exists(dir / "traces" / "b10.json"));

    auto reloaded = aggregate(load_records(dir));
    CHECK(reloaded.accuracy == 0.7);
    CHECK(reloaded.examples == 10);
    fs::remove_all(dir);

    CHECK_THROWS_AS(run_benchmark({}, PipelineConfig{}, services, scripted_factory()), EmptyDataset);
    BenchmarkOptions zero;
    zero.concurrency = 0;
    CHECK_THROWS_AS(run_benchmark(ds, PipelineConfig{}, services, scripted_factory(), zero), std::invalid_argument);
}

TEST_CASE("sweep") {
    const auto ds = load_dataset(testing::fixture("bench/dataset.jsonl"));
    const auto prompts = PromptAssets::builtin();
    PipelineServices services;
    services.prompts = &prompts;

    auto turns = sweep(SweepParameter::MaxTurns, {1, 2, 4, 6, 8, 10}, ds, PipelineConfig{}, services,
                       scripted_factory());
    CHECK(turns.size() == 6);
    auto k = sweep(SweepParameter::TopK, {2, 4, 8, 16}, ds, PipelineConfig{}, services, scripted_factory());
    REQUIRE(k.size() == 4);
    for (const auto& [v, r] : k) CHECK(r.accuracy == 0.7);

    const auto csv = sweep_csv(k);
    CHECK(csv.rfind("value,accuracy,avg_turns,latency_p50\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("\n8,0.7000,") != std::string::npos);

    CHECK_THROWS_AS(sweep(SweepParameter::TopK, {}, ds, PipelineConfig{}, services, scripted_factory()),
                    std::invalid_argument);
    CHECK(parse_sweep_parameter("max-turns") == SweepParameter::MaxTurns);
    CHECK_THROWS_AS(parse_sweep_parameter("tau"), std::invalid_argument);
}

TEST_CASE("records directory errors") {
    const auto dir = fs::temp_directory_path() / "mmagent_empty_records";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK_THROWS_WITH_AS(load_records(dir), doctest::Contains("no run records found"), NoRecords);
    fs::remove_all(dir);
    CHECK_THROWS_AS(load_records(dir), NoRecords);
}

TEST_CASE("config file and environment") {
    auto c = parse_config(nlohmann::json::parse(R"({
        "endpoint": "http://x/v1/chat/completions", "model": "m", "api_key": "k", "decoding": "internvl3",
        "max_turns": 4, "tools": "search,code", "retrieval": {"top_k": 5, "tau": 0.8},
        "index": "idx", "code": {"runner": ["python3", "-m", "runner"], "max_retries": 2, "timeout_s": 3}})"),
                          "/base");
    CHECK(c.pipeline.decoding.top_k == 40);
    CHECK(c.pipeline.max_turns == 4);
    CHECK(c.pipeline.pool == ToolSet{ToolKind::Search, ToolKind::Code});
    CHECK(c.pipeline.retrieval.top_k == 5);
    CHECK(c.index_dir == fs::path("/base/idx"));
    CHECK(c.pipeline.code.max_retries == 2);
    CHECK(c.pipeline.code.limits.wall_timeout == std::chrono::seconds(3));

    apply_environment(c, {{"MMAGENT_API_KEY", "from-env"}, {"MMAGENT_MODEL", ""}});
    CHECK(c.model.api_key == "from-env");
    CHECK(c.model.model == "m");
    const auto snap = snapshot(c);
    CHECK(snap["api_key"] == "<redacted>");
    CHECK(snap.dump().find("from-env") == std::string::npos);

    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"endpont": "x"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"max_turns": 0})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"decoding": "Z"})")), ConfigError);
    CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"retrieval": {"tau": 2}})")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent.json"), ConfigError);
}

#include "mmagent/code/code_tool.hpp"
#include "mmagent/code/sandbox.hpp"
#include "mmagent/text.hpp"

#include "../support/mocks.hpp"

#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>

using namespace mmagent;
using testing::exec_fail;
using testing::exec_ok;

namespace {

CodeContext ctx() { return CodeContext{"What is 6 times 7?", "prior"}; }

std::string python() {
    const char* p = std::getenv("MMAGENT_TEST_PYTHON");
    return p ? p : "python3";
}

SandboxRunner stub_runner() {
    SandboxConfig cfg;
    cfg.runner_command = {python(), (testing::fixture("stub_runner.py")).string()};
    return SandboxRunner(cfg);
}

ExecutionLimits limits(double seconds, std::size_t cap = 64 * 1024) {
    ExecutionLimits l;
    l.wall_timeout = std::chrono::duration_cast<Duration>(std::chrono::duration<double>(seconds));
    l.output_cap = cap;
    return l;
}

}  // namespace

TEST_CASE("runner report parsing") {
    auto r = parse_runner_report("noise\n{\"ok\": true, \"stdout\": \"2\\n\", \"stderr\": \"\", \"duration_ms\": 3}\n\n");
    REQUIRE(r);
    CHECK(r->ok);
    CHECK(r->stdout_text == "2\n");
    CHECK(r->duration_ms == 3);
    CHECK_FALSE(parse_runner_report(""));
    CHECK_FALSE(parse_runner_report("{\"ok\": true}\ntrailing garbage"));
    CHECK_FALSE(parse_runner_report("{\"stdout\": \"x\"}"));
}

TEST_CASE("output cap") {
    CHECK(cap_output("short", 10) == "short");
    const auto capped = cap_output(std::string(100, 'x'), 10);
    CHECK(capped.rfind(std::string(10, 'x'), 0) == 0);
    CHECK(capped.find("[output truncated: 90 bytes omitted]") != std::string::npos);
}

TEST_CASE("extract_code") {
    CHECK(extract_code("<code> print(1) </code>") == "print(1)");
    CHECK(extract_code("Fixed:\n<code>\nx = 1\nprint(x)\n") == "x = 1\nprint(x)");
    CHECK(extract_code("```python\nprint(2)\n```\nthat should work") == "print(2)");
    CHECK(extract_code("  print(3)  ") == "print(3)");
}

TEST_CASE("code loop: first attempt succeeds") {
    testing::FnModel m([](const std::string&, const DecodingConfig&) -> std::string { throw Error("unused"); });
    testing::FakeExecutor ex([](std::string_view) { return exec_ok("42\n"); });
    auto [r, h] = run_with_feedback("print(6*7)", ctx(), m, ex, PromptAssets::builtin(), {});
    CHECK(r.ok);
    CHECK(r.content == "42");
    CHECK(r.failed_attempts == 0);
    CHECK_FALSE(r.effective_payload);
    CHECK(h.attempts.size() == 1);
    CHECK(h.final_ok);
}

TEST_CASE("code loop: always failing snippets stop after max_retries + 1 attempts") {
    for (int retries = 0; retries <= 5; ++retries) {
        testing::FnModel m([](const std::string&, const DecodingConfig&) { return "<code> raise ValueError() </code>"; });
        testing::FakeExecutor ex([](std::string_view) { return exec_fail("Traceback: ValueError"); });
        CodeToolOptions opts;
        opts.max_retries = retries;
        auto [r, h] = run_with_feedback("raise ValueError()", ctx(), m, ex, PromptAssets::builtin(), opts);
        CHECK_FALSE(r.ok);
        CHECK(h.attempts.size() == static_cast<std::size_t>(retries + 1));
        CHECK(ex.snippets.size() == static_cast<std::size_t>(retries + 1));
        CHECK(m.prompts.size() == static_cast<std::size_t>(retries));
        CHECK_FALSE(h.final_ok);
        CHECK(r.content.find("ValueError") != std::string::npos);
    }
    CHECK(CodeToolOptions{}.max_retries == 3);
}

TEST_CASE("code loop: revision fixes the snippet") {
    testing::FnModel m([](const std::string& prompt, const DecodingConfig& d) {
        CHECK(d.stop_sequences == std::vector<std::string>{"</code>"});
        CHECK(prompt.find("NameError: x") != std::string::npos);
        CHECK(prompt.find("print(x)") != std::string::npos);
        CHECK(prompt.find("What is 6 times 7?") != std::string::npos);
        return "<code>\nprint(6 * 7)\n</code>";
    });
    testing::FakeExecutor ex([](std::string_view s) {
        return s == "print(x)" ? exec_fail("NameError: x") : exec_ok("42\n");
    });
    auto [r, h] = run_with_feedback("print(x)", ctx(), m, ex, PromptAssets::builtin(), {});
    CHECK(r.ok);
    CHECK(r.failed_attempts == 1);
    CHECK(r.effective_payload == "print(6 * 7)");
    CHECK(h.attempts.size() == 2);
}

TEST_CASE("code loop: silent success gets one nudge") {
    SUBCASE("nudge works") {
        testing::FnModel m([](const std::string& prompt, const DecodingConfig&) {
            CHECK(prompt.find("printed nothing") != std::string::npos);
            return "<code> print(42) </code>";
        });
        testing::FakeExecutor ex([](std::string_view s) { return exec_ok(s == "x = 42" ? "" : "42"); });
        auto [r, h] = run_with_feedback("x = 42", ctx(), m, ex, PromptAssets::builtin(), {});
        CHECK(r.ok);
        CHECK(h.attempts.size() == 2);
    }
    SUBCASE("only once") {
        testing::FnModel m([](const std::string&, const DecodingConfig&) { return "<code> y = 1 </code>"; });
        testing::FakeExecutor ex([](std::string_view) { return exec_ok("   \n"); });
        auto [r, h] = run_with_feedback("x = 42", ctx(), m, ex, PromptAssets::builtin(), {});
        CHECK_FALSE(r.ok);
        CHECK(h.attempts.size() == 2);
        CHECK(m.prompts.size() == 1);
    }
}

TEST_CASE("code loop: edge cases") {
    testing::FakeExecutor ex([](std::string_view) { return exec_fail("boom"); });
    SUBCASE("empty snippet") {
        testing::FnModel m([](const std::string&, const DecodingConfig&) { return ""; });
        auto [r, h] = run_with_feedback("   ", ctx(), m, ex, PromptAssets::builtin(), {});
        CHECK(r.content == "empty tool query");
        CHECK(ex.snippets.empty());
    }
    SUBCASE("revision call fails") {
        testing::FnModel m([](const std::string&, const DecodingConfig&) -> std::string {
            throw TransportError("down");
        });
        auto [r, h] = run_with_feedback("x", ctx(), m, ex, PromptAssets::builtin(), {});
        CHECK_FALSE(r.ok);
        CHECK(h.attempts.size() == 1);
        CHECK(r.content.find("revision request failed") != std::string::npos);
    }
    SUBCASE("sandbox faults propagate") {
        testing::FakeExecutor broken([](std::string_view) -> ExecutionResult { throw SandboxUnavailable("no runner"); });
        testing::FnModel m([](const std::string&, const DecodingConfig&) { return ""; });
        CHECK_THROWS_AS(run_with_feedback("x", ctx(), m, broken, PromptAssets::builtin(), {}), SandboxUnavailable);
    }
    SUBCASE("negative retries") {
        testing::FnModel m([](const std::string&, const DecodingConfig&) { return ""; });
        CodeToolOptions opts;
        opts.max_retries = -1;
        CHECK_THROWS_AS(run_with_feedback("x", ctx(), m, ex, PromptAssets::builtin(), opts), std::invalid_argument);
    }
}

TEST_CASE("sandbox runner with the stub runner") {
    auto runner = stub_runner();

    SUBCASE("prints") {
        auto r = runner.execute("print(1+1)", limits(10));
        CHECK(r.ok);
        CHECK(r.stdout_text == "2\n");
        CHECK(r.exit_status == 0);
        CHECK_FALSE(r.killed_by_timeout);
    }
    SUBCASE("uncaught exception") {
        auto r = runner.execute("raise ValueError('bad value')", limits(10));
        CHECK_FALSE(r.ok);
        CHECK(r.stderr_text.find("Traceback") != std::string::npos);
        CHECK(r.stderr_text.find("ValueError: bad value") != std::string::npos);
    }
    SUBCASE("infinite loop is killed") {
        const auto start = std::chrono::steady_clock::now();
        auto r = runner.execute("while True:\n    pass\n", limits(5));
        const auto wall = std::chrono::steady_clock::now() - start;
        CHECK(r.killed_by_timeout);
        CHECK_FALSE(r.ok);
        CHECK(r.exit_status == 137);
        CHECK(r.stderr_text == "execution timed out after 5 s");
        CHECK(wall >= std::chrono::seconds(5));
        CHECK(wall <= std::chrono::seconds(6));
    }
    SUBCASE("fresh namespace per execution") {
        CHECK(runner.execute("leak = 1\nprint('set')", limits(10)).ok);
        auto r = runner.execute("print('leak' in globals())", limits(10));
        CHECK(r.stdout_text == "False\n");
    }
    SUBCASE("output is capped") {
        auto r = runner.execute("print('x' * 100000)", limits(10, 1000));
        CHECK(r.ok);
        CHECK(r.stdout_text.size() < 1100);
        CHECK(r.stdout_text.find("[output truncated:") != std::string::npos);
    }
    SUBCASE("scratch directory is the working directory and is removed") {
        auto r = runner.execute("import os\nprint(os.getcwd())", limits(10));
        REQUIRE(r.ok);
        const std::string cwd(trim(r.stdout_text));
        CHECK_FALSE(std::filesystem::exists(cwd));
        auto w = runner.execute("open('out.txt', 'w').write('hi')\nprint(open('out.txt').read())", limits(10));
        CHECK(w.stdout_text == "hi\n");
    }
    SUBCASE("writes outside the scratch directory are denied") {
        if (landlock_abi_version() < 1) {
            MESSAGE("landlock unavailable; skipping filesystem isolation check");
            return;
        }
        const auto target = std::filesystem::temp_directory_path() / "mmagent_escape_probe";
        std::filesystem::remove(target);
        auto r = runner.execute("open('" + target.string() + "', 'w').write('x')\nprint('wrote')", limits(10));
        CHECK_FALSE(r.ok);
        CHECK(r.stderr_text.find("PermissionError") != std::string::npos);
        CHECK_FALSE(std::filesystem::exists(target));
    }
    SUBCASE("network connections are denied") {
        if (landlock_abi_version() < 4) {
            MESSAGE("landlock network rules unavailable; skipping");
            return;
        }
        auto r = runner.execute(
            "import socket\ns = socket.socket()\ns.settimeout(1)\ns.connect(('127.0.0.1', 9))\nprint('connected')",
            limits(10));
        CHECK_FALSE(r.ok);
        CHECK(r.stdout_text.find("connected") == std::string::npos);
    }
}

TEST_CASE("sandbox runner faults") {
    SUBCASE("missing runner executable") {
        SandboxConfig cfg;
        cfg.runner_command = {"/nonexistent/runner"};
        CHECK_THROWS_AS(SandboxRunner(cfg).execute("print(1)", limits(5)), SandboxUnavailable);
    }
    SUBCASE("runner without a report") {
        SandboxConfig cfg;
        cfg.runner_command = {"/bin/true"};
        CHECK_THROWS_AS(SandboxRunner(cfg).execute("print(1)", limits(5)), SandboxUnavailable);
    }
    SUBCASE("empty snippet") {
        auto runner = stub_runner();
        CHECK_THROWS_AS(runner.execute("  ", limits(5)), std::invalid_argument);
    }
}

import csv
import io
import json
import os
import shutil
import subprocess
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parents[1]
FIXTURES = TESTS / "fixtures"
BIN = os.environ.get("MMAGENT_BIN") or shutil.which("mmagent")

pytestmark = pytest.mark.skipif(not BIN, reason="MMAGENT_BIN not set")


def run(*args, cwd=None):
    env = {k: v for k, v in os.environ.items() if not k.startswith("MMAGENT_")}
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, cwd=cwd, env=env, timeout=120)


@pytest.fixture
def index_dir(tmp_path):
    out = tmp_path / "index"
    r = run("ingest", FIXTURES / "corpus.jsonl", out)
    assert r.returncode == 0, r.stderr
    return out


def test_ingest_filters_and_is_idempotent(tmp_path, index_dir):
    again = tmp_path / "again"
    r = run("ingest", FIXTURES / "corpus.jsonl", again)
    assert r.returncode == 0
    assert "pages kept: 4" in r.stdout and "pages dropped: 1" in r.stdout
    for name in ("manifest.json", "passages.jsonl", "postings.bin"):
        assert (index_dir / name).read_bytes() == (again / name).read_bytes()
    assert (again / "config.json").exists()


def test_missing_paths_exit_2(tmp_path):
    r = run("ingest", tmp_path / "nope.jsonl", tmp_path / "out")
    assert r.returncode == 2
    assert "nope.jsonl" in r.stderr
    r = run("--mock-script", tmp_path / "missing.json", "ask", "q")
    assert r.returncode == 2
    assert "missing.json" in r.stderr


def test_ask_without_endpoint_is_a_usage_error():
    r = run("ask", "What is this?")
    assert r.returncode == 2


def test_ask_with_mock_script(tmp_path, index_dir):
    task = json.loads((FIXTURES / "golden_search" / "task.json").read_text())
    image = tmp_path / "tower.jpg"
    image.write_bytes(b"\xff\xd8\xff\xd9")
    r = run("--mock-script", FIXTURES / "golden_search" / "script.json", "--index", index_dir,
            "ask", task["question"], "--image", image, "--trace-dir", tmp_path / "traces")
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "1889"
    assert "turns: 2" in r.stderr
    trace_path = Path(r.stderr.split("trace: ")[1].split()[0])
    log = json.loads(trace_path.read_text())
    assert log["steps"][0]["invocation"] == {"tool": "Search", "payload": "Eiffel Tower completed year"}
    assert log["config"]["max_turns"] == 10


def test_max_turns_flag(tmp_path):
    script = tmp_path / "loop.json"
    script.write_text(json.dumps(
        [{"reply": "{\"selected_tools\": [\"Search\"], \"global_plan\": \"\"}"}]
        + [{"reply": "again <search> more </search>"}] * 3
        + [{"reply": "none"}]))
    r = run("--mock-script", script, "--max-turns", "3", "ask", "q", "--trace-dir", tmp_path)
    assert r.returncode == 0, r.stderr
    assert "turns: 3 (budget_exhausted)" in r.stderr


def test_tools_flag_restricts_pool(tmp_path):
    script = tmp_path / "s.json"
    script.write_text(json.dumps([
        {"reply": "{\"selected_tools\": [\"Perceive\", \"Code\"], \"global_plan\": \"\"}"},
        {"reply": "It is fine."},
        {"reply": "fine"},
    ]))
    r = run("--mock-script", script, "--tools", "code", "ask", "q", "--trace-dir", tmp_path)
    assert r.returncode == 0, r.stderr
    log = json.loads(Path(r.stderr.split("trace: ")[1].split()[0]).read_text())
    assert log["plan"]["selected_tools"] == ["Code"]


def test_bench_report_and_sweep(tmp_path):
    out = tmp_path / "bench"
    r = run("--mock-script", FIXTURES / "bench" / "scripts", "--concurrency", "4",
            "bench", FIXTURES / "bench" / "dataset.jsonl", "--out", out)
    assert r.returncode == 0, r.stderr
    assert "0.700" in r.stdout
    assert "MLLM Time (s)" in r.stdout
    report = json.loads((out / "report.json").read_text())
    assert report["accuracy"] == 0.7
    assert (out / "config.json").exists()

    r = run("report", out)
    assert r.returncode == 0
    assert "0.700" in r.stdout

    sweep_out = tmp_path / "sweep"
    r = run("--mock-script", FIXTURES / "bench" / "scripts", "sweep", FIXTURES / "bench" / "dataset.jsonl",
            "--param", "max_turns", "--values", "1..10", "--out", sweep_out)
    assert r.returncode == 0, r.stderr
    rows = list(csv.DictReader(io.StringIO((sweep_out / "sweep.csv").read_text())))
    assert [int(row["value"]) for row in rows] == list(range(1, 11))


def test_report_on_empty_directory(tmp_path):
    r = run("report", tmp_path)
    assert r.returncode != 0
    assert "no run records found" in r.stderr


def test_direct_mode(tmp_path):
    script = tmp_path / "d.json"
    script.write_text(json.dumps([{"reply": "Answer: B"}]))
    r = run("--mock-script", script, "--direct", "ask", "Which?", "--options", "x", "y", "--trace-dir", tmp_path)
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "B"

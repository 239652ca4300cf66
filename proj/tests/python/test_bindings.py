import json
import os
import random
import statistics
from pathlib import Path

import pytest

import mmagent

DATA = Path(os.environ.get("MMAGENT_TEST_DATA_DIR", Path(__file__).resolve().parents[1]))
FIXTURES = DATA / "fixtures"


def test_scan_tiles_input():
    rng = random.Random(4)
    pieces = ["<search>", "</search>", "<code>", "</code>", "<perceive>", "x", " ", "café", "<", ">"]
    for _ in range(200):
        text = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 30)))
        segs = mmagent.scan(text)
        data = text.encode()
        assert b"".join(data[a:b] for a, b in (s["span"] for s in segs)) == data


def test_invocation_forms():
    assert mmagent.first_invocation("look <search> image </search>") == ("Search", "image")
    assert mmagent.first_invocation("<perceive> q </perceive>") == ("Perceive", "q")
    assert mmagent.first_invocation("no tools here") is None
    assert mmagent.render_invocation("code", "print(1)") == "<code> print(1) </code>"
    assert mmagent.scan("a <code> x")[-1]["kind"] == "unterminated"


def test_chunk_spans_closed_form():
    for n in (1, 255, 256, 257, 480, 481, 2000):
        spans = mmagent.chunk_spans(n)
        assert spans[0][0] == 0 and spans[-1][1] == n
        assert all(s == i * 224 for i, (s, _) in enumerate(spans))
        assert all(a[1] - b[0] == 32 for a, b in zip(spans, spans[1:]))


def test_page_filter():
    assert mmagent.keep_page(" ".join(["w"] * 32))
    assert not mmagent.keep_page(" ".join(["w"] * 31))


def test_bm25_ranking():
    idx = mmagent.PassageIndex.from_texts(["the eiffel tower", "a tower of iron", "a river"])
    hits = idx.bm25_search("tower", 10)
    assert [h[0] for h in hits] == [0, 1]
    assert len(idx) == 3
    assert idx.stats["passage_count"] == 3


def test_dump_index_round_trip(tmp_path):
    idx = mmagent.PassageIndex.from_dump(FIXTURES / "corpus.jsonl")
    assert idx.stats["doc_count"] == 4
    idx.save(tmp_path / "idx")
    again = mmagent.PassageIndex.load(tmp_path / "idx")
    assert again.bm25_search("Eiffel", 3) == idx.bm25_search("Eiffel", 3)
    with pytest.raises(mmagent.Error):
        mmagent.PassageIndex.load(tmp_path / "missing")


def test_metrics():
    assert mmagent.exact_match("Paris.", "paris")
    assert not mmagent.exact_match("New York", "York")
    assert mmagent.p50([2.3, 3.4, 5.9]) == 3.4
    rng = random.Random(1)
    for _ in range(100):
        xs = [rng.random() for _ in range(rng.randint(1, 20))]
        assert mmagent.p50(xs) == statistics.median(xs)


def test_presets():
    assert mmagent.decoding_preset("A") == {
        "temperature": 0.7, "top_p": 0.9, "top_k": 50, "repetition_penalty": 1.05, "max_new_tokens": 2048}
    assert mmagent.decoding_preset("internvl3")["top_k"] == 40


def test_scripted_golden_run():
    idx = mmagent.PassageIndex.from_dump(FIXTURES / "corpus.jsonl")
    task = json.loads((FIXTURES / "golden_search" / "task.json").read_text())
    script = (FIXTURES / "golden_search" / "script.json").read_text()
    log = mmagent.run_scripted(task, script, idx)
    golden = json.loads((DATA / "golden" / "search_trace.json").read_text())
    assert log == golden
    assert log["answer"]["text"] == "1889"


def test_scripted_run_errors():
    with pytest.raises(mmagent.Error):
        mmagent.run_scripted({"question": "q"}, [{"reply": "{\"selected_tools\": [], \"global_plan\": \"\"}"}])

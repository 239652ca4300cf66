"""Python bindings for the mmagent runtime core."""

import json

from ._mmagent import (
    Error,
    PassageIndex,
    analyze,
    chunk_spans,
    decoding_preset,
    exact_match,
    first_invocation,
    keep_page,
    normalize_answer,
    p50,
    render_invocation,
    scan,
    word_count,
)
from ._mmagent import run_scripted as _run_scripted

__all__ = [
    "Error",
    "PassageIndex",
    "analyze",
    "chunk_spans",
    "decoding_preset",
    "exact_match",
    "first_invocation",
    "keep_page",
    "normalize_answer",
    "p50",
    "render_invocation",
    "run_scripted",
    "scan",
    "word_count",
]


def run_scripted(task, script, index=None, max_turns=10, tools="search,perceive,code"):
    """Run one task against a replay script; returns the trace log as a dict.

    `task` and `script` may be dicts/lists or JSON text.
    """
    task_json = task if isinstance(task, str) else json.dumps(task)
    script_json = script if isinstance(script, str) else json.dumps(script)
    return json.loads(_run_scripted(task_json, script_json, index, max_turns, tools))

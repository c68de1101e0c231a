"""In-process chat-completions endpoints for offline runs and tests.

``rules``
    Reads the [DATA] block of the prompt back and answers the way a perfectly
    compliant model would: the oracle winner for winner selection, a
    cluster number between the limits for parameter tuning.
``echo``
    Returns the user message unchanged.
"""

from __future__ import annotations

import json
import re
from typing import Callable, Iterable

import httpx

from .evaluation import FAR_FROM_MAX, expected_label
from .features import AlgorithmFeatures
from .trajectory_io import MAXIMIZE, MINIMIZE

_COUNT = re.compile(r"^(\S+) has (\d+) nodes pointing to nodes with the best fitness\.$", re.M)
_CONN = re.compile(r"^(\S+) has ([\d.]+) connectivity among all the nodes\.$", re.M)
_AVG = re.compile(r"^(\S+) has an average fitness of (-?[\d.]+) across (\d+) trajectories\.$", re.M)
_LIMIT_MIN = re.compile(r"minimum possible number of clusters: (\d+)")
_LIMIT_MAX = re.compile(r"maximum possible number of clusters: (\d+)")
_CURRENT = re.compile(r"- cluster number: (\d+)")


def envelope(text: str, model: str = "stub") -> dict:
    return {
        "id": "stub-0",
        "object": "chat.completion",
        "model": model,
        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
    }


def _user_content(request: httpx.Request) -> tuple[str, str]:
    body = json.loads(request.content)
    return body["messages"][-1]["content"], body.get("model", "stub")


def features_from_prompt(text: str) -> tuple[list[AlgorithmFeatures], str]:
    counts = {m.group(1): int(m.group(2)) for m in _COUNT.finditer(text)}
    conns = {m.group(1): float(m.group(2)) for m in _CONN.finditer(text)}
    avgs = {m.group(1): (float(m.group(2)), int(m.group(3))) for m in _AVG.finditer(text)}
    feats = [
        AlgorithmFeatures(name, counts[name], conns[name], avgs[name][0], avgs[name][1], avgs[name][0])
        for name in counts
    ]
    sense = MAXIMIZE if "This is a maximization problem." in text else MINIMIZE
    return feats, sense


def suggest_cluster_number(lo: int, hi: int, current: int) -> int:
    """A value above ``lo`` and well below ``hi``, or ``current`` if none exists."""
    ceiling = FAR_FROM_MAX * hi
    candidate = lo + max(1, int((ceiling - lo) / 2))
    return candidate if lo < candidate < ceiling else current


def rules_answer(content: str) -> str:
    if "nodes pointing to nodes with the best fitness" in content:
        feats, sense = features_from_prompt(content)
        verdict = expected_label(feats, sense)
        if verdict.winner_name:
            return f"[winner={verdict.winner_name}]\n\n{verdict.winner_name} reaches the best fitness most often.\n"
        return "[draw]\n\nThe algorithms show similar values for all features.\n"
    lo, hi = _LIMIT_MIN.search(content), _LIMIT_MAX.search(content)
    if lo and hi:
        current = int(_CURRENT.search(content).group(1))
        n = suggest_cluster_number(int(lo.group(1)), int(hi.group(1)), current)
        return f"[cluster_number={n}]\n\nThis keeps the partitioning above the minimum and far from the maximum.\n"
    if "grouped bar plot" in content:
        return "The grouped bar plot is rendered from the attached CSV columns.\n"
    return content


def handler_for(answer: Callable[[str], str]) -> Callable[[httpx.Request], httpx.Response]:
    def handle(request: httpx.Request) -> httpx.Response:
        content, model = _user_content(request)
        return httpx.Response(200, json=envelope(answer(content), model))

    return handle


def stub_transport(kind: str = "rules") -> httpx.MockTransport:
    if kind == "rules":
        return httpx.MockTransport(handler_for(rules_answer))
    if kind == "echo":
        return httpx.MockTransport(handler_for(lambda content: content))
    raise ValueError(f"unknown stub {kind!r}; expected 'rules' or 'echo'")


class ScriptedTransport(httpx.MockTransport):
    """Replays ``(status, text)`` pairs in order; records every request."""

    def __init__(self, script: Iterable[tuple[int, str]]):
        self.script = list(script)
        self.requests: list[httpx.Request] = []
        super().__init__(self._handle)

    def _handle(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        if not self.script:
            raise AssertionError("scripted transport ran out of responses")
        status, text = self.script.pop(0)
        if status == 200:
            return httpx.Response(200, json=envelope(text))
        return httpx.Response(status, text=text)

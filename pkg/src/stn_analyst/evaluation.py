"""Checking LLM replies against the expected output formats, and scoring them.

Two strict grammars are recognised:

* winner selection: ``[winner=<name>]`` or ``[draw]``
* parameter suggestions: one ``[<parameter>=<value>]`` token per change

Anything that looks like an attempt at these forms but deviates from them
(``name: value``, extra parenthesised names after the winner, ...) parses to
a ``format_violation`` verdict instead of raising.
"""

from __future__ import annotations

import csv
import io
import json
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .features import AlgorithmFeatures
from .llm_client import ChatClient, LLMConfig, LLMError
from .partitioning import MEASURES, ClusterLimits
from .prompt_engine import TASK_A, TASK_B, RenderedPrompt
from .trajectory_io import MINIMIZE

WINNER = "winner"
DRAW = "draw"
PARAMETER_UPDATES = "parameter_updates"
FORMAT_VIOLATION = "format_violation"

EASY, HARD = "easy", "hard"
DEFAULT_TRIALS = 5
SIMILARITY_RTOL = 0.01
# suggested cluster numbers must stay below this fraction of the maximum
FAR_FROM_MAX = 0.9

PARAMETERS = ("cluster_size", "volume_size", "distance_measure", "cluster_number")

NAME_RE = r"[A-Za-z0-9_.\-]+"
_BRACKET = re.compile(r"\[([^\[\]\n]*)\]")
_WINNER_TOKEN = re.compile(rf"^winner=({NAME_RE})$")
_NUMBER = re.compile(r"^[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?$")
_PARAM_ALT = "|".join(PARAMETERS)
_LOOSE_ASSIGN = re.compile(rf"(?<![\w\[])({_PARAM_ALT})\s*[:=]", re.IGNORECASE)


@dataclass(frozen=True)
class Verdict:
    kind: str
    winner_name: str | None = None
    updates: tuple[tuple[str, object], ...] = ()
    violation_reason: str | None = None

    def __post_init__(self):
        if (self.kind == WINNER) != (self.winner_name is not None):
            raise ValueError("winner_name is required for, and only for, winner verdicts")
        if (self.kind == PARAMETER_UPDATES) != bool(self.updates):
            raise ValueError("updates are required for, and only for, parameter_updates verdicts")

    @classmethod
    def winner(cls, name: str) -> "Verdict":
        return cls(WINNER, winner_name=name)

    @classmethod
    def draw(cls) -> "Verdict":
        return cls(DRAW)

    @classmethod
    def violation(cls, reason: str) -> "Verdict":
        return cls(FORMAT_VIOLATION, violation_reason=reason)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.winner_name is not None:
            out["winner_name"] = self.winner_name
        if self.updates:
            out["updates"] = [list(u) for u in self.updates]
        if self.violation_reason is not None:
            out["violation_reason"] = self.violation_reason
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Verdict":
        return cls(
            data["kind"],
            winner_name=data.get("winner_name"),
            updates=tuple(tuple(u) for u in data.get("updates", ())),
            violation_reason=data.get("violation_reason"),
        )

    def render(self) -> str:
        if self.kind == WINNER:
            return f"[winner={self.winner_name}]"
        if self.kind == DRAW:
            return "[draw]"
        if self.kind == PARAMETER_UPDATES:
            return " ".join(f"[{k}={v}]" for k, v in self.updates)
        return ""


def parse_winner(text: str, algorithm_names: Sequence[str] | None = None) -> Verdict:
    """Find the winner declaration in a reply.

    With ``algorithm_names``, a bare ``[algo_2]`` is reported as a violation
    rather than ignored.
    """
    declared: list[tuple[str, int]] = []  # (winner name or "" for draw, end offset)
    for m in _BRACKET.finditer(text):
        body = m.group(1)
        stripped = body.strip()
        if stripped.lower() == "draw":
            if stripped != "draw" or body != stripped:
                return Verdict.violation(f"draw token must be written exactly as [draw], got [{body}]")
            declared.append(("", m.end()))
            continue
        w = _WINNER_TOKEN.match(body)
        if w:
            declared.append((w.group(1), m.end()))
            continue
        if "winner" in body.lower():
            return Verdict.violation(f"malformed winner declaration [{body}]; expected [winner=name]")
        if algorithm_names and stripped in algorithm_names:
            return Verdict.violation(f"bare [{stripped}] is not a winner declaration; expected [winner={stripped}]")

    if not declared:
        return Verdict.violation("no [winner=name] or [draw] declaration found")

    for name, end in declared:
        if name and text[end:].lstrip(" \t").startswith("("):
            return Verdict.violation(
                f"[winner={name}] is followed by a parenthetical; the brackets must hold only the winner"
            )
    names = {name for name, _ in declared}
    if len(names) > 1:
        shown = ", ".join(f"[winner={n}]" if n else "[draw]" for n in sorted(names))
        return Verdict.violation(f"conflicting declarations: {shown}")
    name = declared[0][0]
    return Verdict.winner(name) if name else Verdict.draw()


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name == "distance_measure":
        for measure in MEASURES:
            if raw.lower() == measure.lower():
                return measure
        raise ValueError(f"unknown distance measure {raw!r}")
    value = raw.rstrip("%").strip()
    if not _NUMBER.match(value):
        raise ValueError(f"{name} value {raw!r} is not a number")
    number = float(value)
    return int(number) if number.is_integer() and name == "cluster_number" else number


def parse_parameter_updates(text: str) -> Verdict:
    """Collect ``[parameter=value]`` tokens for the known clustering parameters."""
    updates: dict[str, object] = {}
    remainder = []
    last = 0
    for m in _BRACKET.finditer(text):
        body = m.group(1)
        key, sep, raw = body.partition("=")
        key = key.strip()
        if sep and key in PARAMETERS:
            if not body.startswith(key + "=") or "=" in raw:
                return Verdict.violation(f"malformed parameter token [{body}]")
            try:
                value = _parse_value(key, raw)
            except ValueError as exc:
                return Verdict.violation(str(exc))
            if key in updates and updates[key] != value:
                return Verdict.violation(f"conflicting values for {key}")
            updates[key] = value
            remainder.append(text[last : m.start()])
            last = m.end()
        elif any(p in body.lower() for p in PARAMETERS):
            return Verdict.violation(f"malformed parameter token [{body}]; expected [name_parameter=new_value]")
    remainder.append(text[last:])
    loose = _LOOSE_ASSIGN.search(" ".join(remainder))
    if loose:
        return Verdict.violation(
            f"parameter {loose.group(1)!r} given outside the [name_parameter=new_value] format"
        )
    if not updates:
        return Verdict.violation("no [name_parameter=new_value] tokens found")
    ordered = tuple((k, updates[k]) for k in PARAMETERS if k in updates)
    return Verdict(PARAMETER_UPDATES, updates=ordered)


def _similar(a: float, b: float, rtol: float = SIMILARITY_RTOL) -> bool:
    scale = max(abs(a), abs(b))
    return scale == 0 or abs(a - b) / scale < rtol


def expected_label(
    features: Sequence[AlgorithmFeatures],
    sense: str = MINIMIZE,
    rtol: float = SIMILARITY_RTOL,
) -> Verdict:
    """Deterministic pre-label for a winner-selection case.

    Precedence: most trajectories reaching the global best; then average
    fitness (ties within ``rtol`` relative difference); then connectivity,
    only among algorithms that reach the global best at all; otherwise draw.
    """
    if len(features) < 2:
        raise ValueError("need at least 2 algorithms to label a comparison")
    top = max(f.total_best_global_fitness for f in features)
    pool = [f for f in features if f.total_best_global_fitness == top]
    if len(pool) == 1:
        return Verdict.winner(pool[0].algorithm)

    pick = min if sense == MINIMIZE else max
    best_avg = pick(f.avg_fitness for f in pool)
    pool = [f for f in pool if _similar(f.avg_fitness, best_avg, rtol)]
    if len(pool) == 1:
        return Verdict.winner(pool[0].algorithm)

    if top > 0:
        best_conn = max(f.connectivity for f in pool)
        pool = [f for f in pool if _similar(f.connectivity, best_conn, rtol)]
        if len(pool) == 1:
            return Verdict.winner(pool[0].algorithm)
    return Verdict.draw()


def updates_valid(verdict: Verdict, limits: ClusterLimits) -> bool:
    """Parameter suggestions stay within the ranges the definitions allow."""
    if verdict.kind != PARAMETER_UPDATES:
        return False
    for name, value in verdict.updates:
        if name in ("cluster_size", "volume_size"):
            if not 0 < value <= 100:
                return False
        elif name == "cluster_number":
            if value != int(value) or not limits.min_clusters < value < FAR_FROM_MAX * limits.max_clusters:
                return False
        elif name == "distance_measure" and value not in MEASURES:
            return False
    return True


@dataclass(frozen=True)
class PromptCase:
    case_id: str
    task: str
    difficulty: str
    prompt: RenderedPrompt
    expected: Verdict | None = None
    limits: ClusterLimits | None = None
    algorithms: tuple[str, ...] = ()
    prompt_type: str | None = None

    def __post_init__(self):
        if self.task not in (TASK_A, TASK_B):
            raise ValueError(f"cases are defined for tasks A and B, got {self.task!r}")
        if self.difficulty not in (EASY, HARD):
            raise ValueError(f"difficulty must be easy or hard, got {self.difficulty!r}")
        if self.task == TASK_A and (self.expected is None or self.expected.kind not in (WINNER, DRAW)):
            raise ValueError("task A cases need an expected winner or draw")
        if self.task == TASK_B and self.limits is None:
            raise ValueError("task B cases need cluster limits")

    @property
    def label(self) -> str:
        return self.prompt_type or self.difficulty.capitalize()

    def parse(self, text: str) -> Verdict:
        if self.task == TASK_A:
            return parse_winner(text, self.algorithms or None)
        return parse_parameter_updates(text)

    def is_correct(self, verdict: Verdict) -> bool:
        if self.task == TASK_A:
            return verdict == self.expected
        return updates_valid(verdict, self.limits)

    def to_dict(self) -> dict:
        out = {
            "case_id": self.case_id,
            "task": self.task,
            "difficulty": self.difficulty,
            "prompt": self.prompt.text,
        }
        if self.prompt_type:
            out["prompt_type"] = self.prompt_type
        if self.expected is not None:
            out["expected"] = self.expected.to_dict()
        if self.limits is not None:
            out["limits"] = {"min": self.limits.min_clusters, "max": self.limits.max_clusters}
        if self.algorithms:
            out["algorithms"] = list(self.algorithms)
        return out

    @classmethod
    def from_dict(cls, data: dict, base: str | os.PathLike | None = None) -> "PromptCase":
        if "prompt" in data:
            text = data["prompt"]
        else:
            path = Path(data["prompt_file"])
            if base is not None and not path.is_absolute():
                path = Path(base) / path
            text = path.read_text(encoding="utf-8")
        limits = data.get("limits")
        return cls(
            case_id=str(data["case_id"]),
            task=data["task"],
            difficulty=data["difficulty"],
            prompt=RenderedPrompt(data["task"], text),
            expected=Verdict.from_dict(data["expected"]) if "expected" in data else None,
            limits=ClusterLimits(int(limits["min"]), int(limits["max"])) if limits else None,
            algorithms=tuple(data.get("algorithms", ())),
            prompt_type=data.get("prompt_type"),
        )


def load_cases(directory: str | os.PathLike) -> list[PromptCase]:
    """Read every ``*.json`` case in ``directory``, sorted by file name."""
    directory = Path(directory)
    files = sorted(directory.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no *.json case files in {directory}")
    return [PromptCase.from_dict(json.loads(f.read_text(encoding="utf-8")), base=directory) for f in files]


@dataclass(frozen=True)
class Trial:
    index: int
    reply: str
    verdict: Verdict
    correct: bool


@dataclass
class ScoreCard:
    model_id: str
    case: PromptCase
    n: int = DEFAULT_TRIALS
    trials: list[Trial] = field(default_factory=list)
    human_score: float | None = None
    error: str | None = None

    @property
    def corrects(self) -> int:
        return sum(t.correct for t in self.trials)

    @property
    def system_score(self) -> float:
        return self.corrects / self.n


def run_trials(
    case: PromptCase,
    config: LLMConfig | None = None,
    n: int = DEFAULT_TRIALS,
    client: ChatClient | None = None,
    parallel: bool = False,
) -> ScoreCard:
    """Send ``case.prompt`` ``n`` times and score each parsed reply.

    A fatal endpoint error stops the card early; completed trials are kept and
    the error is recorded on the card.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    own = client is None
    if own:
        if config is None:
            raise ValueError("pass an LLMConfig or a ChatClient")
        client = ChatClient(config)
    card = ScoreCard(client.config.model_id, case, n)

    def one(i: int) -> Trial:
        reply = client.complete(case.prompt)
        verdict = case.parse(reply.text)
        return Trial(i, reply.text, verdict, case.is_correct(verdict))

    try:
        if parallel:
            with ThreadPoolExecutor(max_workers=min(n, 8)) as pool:
                futures = [pool.submit(one, i) for i in range(n)]
                for fut in futures:
                    try:
                        card.trials.append(fut.result())
                    except LLMError as exc:
                        card.error = card.error or str(exc)
        else:
            for i in range(n):
                try:
                    card.trials.append(one(i))
                except LLMError as exc:
                    card.error = str(exc)
                    break
    finally:
        if own:
            client.close()
    card.trials.sort(key=lambda t: t.index)
    return card


class VotesError(ValueError):
    pass


VOTE_COLUMNS = ("evaluator", "case_id", "repetition", "winning_model")


def human_score(
    votes: str | os.PathLike | io.TextIOBase,
    model_ids: Sequence[str],
    case_id: str | None = None,
    repetitions: int = DEFAULT_TRIALS,
) -> dict[str, float]:
    """Wins per model divided by ``repetitions``; one winner per repetition."""
    if hasattr(votes, "read"):
        text = votes.read()
    else:
        text = Path(votes).read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in VOTE_COLUMNS if c not in (reader.fieldnames or [])]
    if missing:
        raise VotesError(f"votes file is missing column(s): {', '.join(missing)}")
    winners: dict[tuple[str, int], str] = {}
    for lineno, row in enumerate(reader, start=2):
        if case_id is not None and row["case_id"] != case_id:
            continue
        model = row["winning_model"].strip()
        if model not in model_ids:
            raise VotesError(f"line {lineno}: unknown model {model!r}")
        try:
            rep = int(row["repetition"])
        except ValueError:
            raise VotesError(f"line {lineno}: repetition {row['repetition']!r} is not an integer") from None
        if not 1 <= rep <= repetitions:
            raise VotesError(f"line {lineno}: repetition {rep} outside 1..{repetitions}")
        key = (row["case_id"], rep)
        if key in winners and winners[key] != model:
            raise VotesError(
                f"line {lineno}: repetition {rep} of case {row['case_id']} already won by {winners[key]!r}"
            )
        winners[key] = model
    cases = {c for c, _ in winners} or {None}
    per_case = len(cases)
    wins = {m: 0 for m in model_ids}
    for model in winners.values():
        wins[model] += 1
    return {m: wins[m] / (repetitions * per_case) for m in model_ids}


SCORECARD_COLUMNS = ("task", "prompt_type", "model", "system_score", "human_score")


def scorecards_csv(cards: Sequence[ScoreCard]) -> str:
    """Table-style summary, one row per (case, model)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORECARD_COLUMNS)
    for card in cards:
        human = "" if card.human_score is None else f"{card.human_score:g}"
        writer.writerow([card.case.task, card.case.label, card.model_id, f"{card.system_score:g}", human])
    return buf.getvalue()

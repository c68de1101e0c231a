import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stn_analyst.evaluation import (
    DRAW,
    FORMAT_VIOLATION,
    PARAMETER_UPDATES,
    WINNER,
    PromptCase,
    Verdict,
    VotesError,
    expected_label,
    human_score,
    load_cases,
    parse_parameter_updates,
    parse_winner,
    run_trials,
    scorecards_csv,
    updates_valid,
)
from stn_analyst.features import AlgorithmFeatures
from stn_analyst.llm_client import ChatClient, LLMConfig
from stn_analyst.partitioning import ClusterLimits
from stn_analyst.prompt_engine import RenderedPrompt
from stn_analyst.stubs import ScriptedTransport

LIMITS = ClusterLimits(207, 574)


def feat(name, count, conn, avg):
    return AlgorithmFeatures(name, count, conn, avg, 10, avg)


# winner grammar

@pytest.mark.parametrize(
    "text, expected",
    [
        ("[winner=algo_2]", Verdict.winner("algo_2")),
        ("Looking at the data...\n[winner=algo_1]\nbecause it wins.", Verdict.winner("algo_1")),
        ("[draw]", Verdict.draw()),
        ("[winner=algo_2] and again [winner=algo_2]", Verdict.winner("algo_2")),
        ("[winner=GA-2.1]", Verdict.winner("GA-2.1")),
    ],
)
def test_winner_accepted(text, expected):
    assert parse_winner(text) == expected


@pytest.mark.parametrize(
    "text",
    [
        "[winner=algo_2] (algo_1, algo_3)",
        "[winner=algo_2](algo_1)",
        "winner: algo_2",
        "[winner: algo_2]",
        "[winner = algo_2]",
        "[Winner=algo_2]",
        "[ draw ]",
        "[DRAW]",
        "[winner=algo_1] [winner=algo_2]",
        "[winner=algo_1] [draw]",
        "I cannot decide.",
        "",
    ],
)
def test_winner_violations(text):
    verdict = parse_winner(text)
    assert verdict.kind == FORMAT_VIOLATION
    assert verdict.violation_reason


def test_bare_name_is_violation_when_names_known():
    assert parse_winner("[algo_2]", ["algo_1", "algo_2"]).kind == FORMAT_VIOLATION
    assert parse_winner("[algo_2] [winner=algo_2]", None) == Verdict.winner("algo_2")


@settings(max_examples=1000, deadline=None)
@given(name=st.from_regex(r"[A-Za-z0-9_.\-]{1,24}", fullmatch=True))
def test_winner_round_trip(name):
    verdict = Verdict.winner(name)
    assert parse_winner(verdict.render()) == verdict
    assert parse_winner(f"Answer:\n{verdict.render()}\nreasoning follows.") == verdict


# parameter grammar

@pytest.mark.parametrize(
    "text, updates",
    [
        ("[cluster_number=350]", (("cluster_number", 350),)),
        ("[cluster_size=10%] [volume_size=2.5]", (("cluster_size", 10.0), ("volume_size", 2.5))),
        ("[distance_measure=manhattan]", (("distance_measure", "Manhattan"),)),
        ("[cluster_number=300]\n[cluster_size=7]", (("cluster_size", 7.0), ("cluster_number", 300))),
        ("Keep the rest. [cluster_number=3.0e2]", (("cluster_number", 300),)),
    ],
)
def test_parameter_updates_accepted(text, updates):
    verdict = parse_parameter_updates(text)
    assert verdict.kind == PARAMETER_UPDATES
    assert verdict.updates == updates


@pytest.mark.parametrize(
    "text",
    [
        "cluster_number: 350",
        "[cluster_number: 350]",
        "[cluster_number = 350]",
        "[cluster_number=350] and also cluster_size: 4",
        "[cluster_number=many]",
        "[distance_measure=cosine]",
        "[cluster_number=3] [cluster_number=4]",
        "Set the number of clusters to 350.",
    ],
)
def test_parameter_updates_violations(text):
    assert parse_parameter_updates(text).kind == FORMAT_VIOLATION


@settings(max_examples=200, deadline=None)
@given(
    size=st.integers(1, 100),
    volume=st.floats(0.1, 100, allow_nan=False).map(lambda v: round(v, 3)),
    measure=st.sampled_from(["Euclidean", "Manhattan", "Hamming"]),
    number=st.integers(1, 10**6),
    subset=st.sets(st.sampled_from(["cluster_size", "volume_size", "distance_measure", "cluster_number"]), min_size=1),
)
def test_parameter_round_trip(size, volume, measure, number, subset):
    values = {"cluster_size": float(size), "volume_size": volume, "distance_measure": measure, "cluster_number": number}
    ordered = tuple((k, values[k]) for k in ("cluster_size", "volume_size", "distance_measure", "cluster_number") if k in subset)
    verdict = Verdict(PARAMETER_UPDATES, updates=ordered)
    assert parse_parameter_updates(verdict.render()) == verdict


def test_updates_valid():
    ok = parse_parameter_updates("[cluster_number=350]")
    assert updates_valid(ok, LIMITS)
    assert not updates_valid(parse_parameter_updates("[cluster_number=207]"), LIMITS)
    assert not updates_valid(parse_parameter_updates("[cluster_number=520]"), LIMITS)
    assert not updates_valid(parse_parameter_updates("[cluster_size=0]"), LIMITS)
    assert not updates_valid(parse_parameter_updates("[volume_size=150]"), LIMITS)
    assert not updates_valid(Verdict.violation("x"), LIMITS)


# pre-labelling

def test_label_by_best_count():
    assert expected_label([feat("a", 0, 0.9, 1.0), feat("b", 2, 0.1, 9.0)]) == Verdict.winner("b")


def test_label_by_average_then_connectivity():
    assert expected_label([feat("a", 1, 0.9, 10.0), feat("b", 1, 0.1, 5.0)]) == Verdict.winner("b")
    assert expected_label([feat("a", 1, 0.9, 10.0), feat("b", 1, 0.1, 5.0)], "maximize") == Verdict.winner("a")
    assert expected_label([feat("a", 1, 0.9, 10.0), feat("b", 1, 0.1, 10.05)]) == Verdict.winner("a")


def test_label_draw():
    assert expected_label([feat("a", 1, 0.5, 10.0), feat("b", 1, 0.5, 10.0)]) == Verdict.draw()
    # nobody reaches the optimum: connectivity does not break the tie
    assert expected_label([feat("a", 0, 0.9, 10.0), feat("b", 0, 0.1, 10.0)]) == Verdict.draw()


def test_label_needs_two():
    with pytest.raises(ValueError):
        expected_label([feat("a", 1, 0.5, 1.0)])


# trials and scoring

CASE_A = PromptCase("a1", "A", "easy", RenderedPrompt("A", "p"), Verdict.winner("algo_2"), algorithms=("algo_1", "algo_2"))
CASE_B = PromptCase("b1", "B", "hard", RenderedPrompt("B", "p"), limits=LIMITS, prompt_type="Complex")


def scripted(texts):
    transport = ScriptedTransport([(200, t) for t in texts])
    return ChatClient(LLMConfig("http://stub", "m"), transport=transport, sleep=lambda s: None)


@pytest.mark.parametrize("correct", range(6))
def test_system_score(correct):
    replies = ["[winner=algo_2]"] * correct + ["[winner=algo_1]"] * (5 - correct)
    card = run_trials(CASE_A, client=scripted(replies))
    assert card.corrects == correct
    assert card.system_score == correct / 5
    assert [t.index for t in card.trials] == list(range(5))


def test_task_b_scoring():
    card = run_trials(CASE_B, client=scripted(["[cluster_number=350]", "cluster_number: 350", "[cluster_number=560]"]), n=3)
    assert [t.correct for t in card.trials] == [True, False, False]
    assert card.trials[1].verdict.kind == FORMAT_VIOLATION


def test_parallel_trials():
    card = run_trials(CASE_A, client=scripted(["[winner=algo_2]"] * 5), parallel=True)
    assert card.corrects == 5


def test_fatal_error_stops_card():
    transport = ScriptedTransport([(200, "[winner=algo_2]"), (401, "")])
    card = run_trials(CASE_A, client=ChatClient(LLMConfig("http://stub", "m"), transport=transport))
    assert len(card.trials) == 1
    assert "401" in card.error
    assert card.system_score == 0.2


def test_case_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        PromptCase("x", "A", "easy", RenderedPrompt("A", "p"))
    with pytest.raises(ValueError):
        PromptCase("x", "B", "easy", RenderedPrompt("B", "p"))
    with pytest.raises(ValueError):
        PromptCase("x", "C", "easy", RenderedPrompt("C", "p"), Verdict.draw())
    import json

    for case in (CASE_A, CASE_B):
        (tmp_path / f"{case.case_id}.json").write_text(json.dumps(case.to_dict()))
    assert load_cases(tmp_path) == [CASE_A, CASE_B]


def test_case_prompt_file(tmp_path):
    (tmp_path / "p.txt").write_text("prompt body\n")
    case = PromptCase.from_dict(
        {"case_id": "c", "task": "B", "difficulty": "easy", "prompt_file": "p.txt", "limits": {"min": 1, "max": 9}},
        base=tmp_path,
    )
    assert case.prompt.text == "prompt body\n"


VOTES = """evaluator,case_id,repetition,winning_model
e1,a1,1,gpt
e2,a1,1,gpt
e1,a1,2,claude
e1,a1,3,gpt
e1,a1,4,gpt
e1,a1,5,gemini
"""


def test_human_score():
    scores = human_score(io.StringIO(VOTES), ["gpt", "claude", "gemini"])
    assert scores == {"gpt": 0.6, "claude": 0.2, "gemini": 0.2}


@pytest.mark.parametrize(
    "extra, message",
    [
        ("e2,a1,2,gpt\n", "already won"),
        ("e1,a1,6,gpt\n", "outside"),
        ("e1,a1,x,gpt\n", "not an integer"),
        ("e1,a1,1,llama\n", "unknown model"),
    ],
)
def test_human_score_errors(extra, message):
    with pytest.raises(VotesError, match=message):
        human_score(io.StringIO(VOTES + extra), ["gpt", "claude", "gemini"])


def test_human_score_missing_column():
    with pytest.raises(VotesError, match="winning_model"):
        human_score(io.StringIO("evaluator,case_id,repetition\n"), ["gpt"])


def test_scorecards_csv():
    cards = [run_trials(CASE_A, client=scripted(["[winner=algo_2]"] * 4 + ["[draw]"]))]
    cards[0].human_score = 0.6
    assert scorecards_csv(cards) == "task,prompt_type,model,system_score,human_score\nA,Easy,m,0.8,0.6\n"


def test_verdict_dict_round_trip():
    for v in (Verdict.winner("x"), Verdict.draw(), Verdict.violation("why"), parse_parameter_updates("[cluster_number=3]")):
        assert Verdict.from_dict(v.to_dict()) == v
    with pytest.raises(ValueError):
        Verdict(WINNER)
    with pytest.raises(ValueError):
        Verdict(DRAW, winner_name="x")

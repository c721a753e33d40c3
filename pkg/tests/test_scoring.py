import io
import math
import shlex
import sys
from pathlib import Path

import pytest

from app.exceptions import (
    EmptyTrainingSet, MalformedRecord, MixedKinds, ProtocolError, ScorerUnavailable, UsageError,
)
from app.config import settings
from app.models import CodeKind, Level, Segment, TaxCode, segments_from_digits
from app.services.scoring_engine import (
    ExternalScorer, ScoreRequest, ScoringEngine, TableScorer, UniformScorer,
)


STUBS = Path(__file__).parent / "stubs"


def stub_command(name: str, *args: str) -> str:
    return " ".join(shlex.quote(part) for part in (sys.executable, str(STUBS / name), *args))


def chapters(*values: str):
    return tuple(Segment(value, Level.chapter) for value in values)


def request(text: str, prefix_digits: str, *candidates: str, kind: CodeKind = CodeKind.HSN) -> ScoreRequest:
    prefix = segments_from_digits(prefix_digits)
    level = [Level.chapter, Level.heading, Level.sub_heading, Level.product_tariff][len(prefix)]
    return ScoreRequest(text, kind, prefix, tuple(Segment(value, level) for value in candidates))


def hsn(digits: str) -> TaxCode:
    return TaxCode.from_digits(CodeKind.HSN, digits)


def test_request_needs_candidates():
    with pytest.raises(ValueError):
        ScoreRequest("x", CodeKind.HSN, (), ())


def test_request_candidates_are_distinct():
    with pytest.raises(ValueError):
        ScoreRequest("x", CodeKind.HSN, (), chapters("84", "84"))


def test_request_candidates_follow_the_prefix_level():
    with pytest.raises(ValueError):
        ScoreRequest("x", CodeKind.HSN, segments_from_digits("84"), chapters("71"))


def test_uniform_weights():
    assert UniformScorer().score(request("x", "", "84", "85", "90")).weights == (1.0, 1.0, 1.0)


def test_table_lookup():
    scorer = TableScorer({((), "84"): 0.6, ((), "85"): 0.4})
    assert scorer.score(request("x", "", "84", "85")).weights == (0.6, 0.4)


def test_table_missing_entry_weighs_zero():
    scorer = TableScorer({((), "84"): 0.6})
    response = scorer.score(request("x", "", "84", "85"))
    assert response.weights == (0.6, 0.0)
    assert not response.degenerate


def test_table_from_jsonl():
    stream = io.StringIO(
        '{"prefix": [], "candidate": "84", "weight": 0.6}\n'
        '{"prefix": ["84"], "candidate": "71", "weight": 1.0}\n'
    )
    scorer = TableScorer.from_jsonl(stream)
    assert scorer.score(request("x", "84", "71")).weights == (1.0,)


@pytest.mark.parametrize("row", [
    '{"prefix": [], "candidate": "84", "weight": -1}',
    '{"prefix": ["8"], "candidate": "84", "weight": 1}',
    '{"prefix": [], "candidate": "84"}',
    'not json',
])
def test_table_from_jsonl_rejects_bad_rows(row):
    with pytest.raises(MalformedRecord) as excinfo:
        TableScorer.from_jsonl(io.StringIO(row + "\n"))
    assert excinfo.value.line == 1


def test_table_from_jsonl_rejects_duplicates():
    row = '{"prefix": [], "candidate": "84", "weight": 1}\n'
    with pytest.raises(MalformedRecord):
        TableScorer.from_jsonl(io.StringIO(row + row))


@pytest.mark.parametrize("weights", [
    [1.0], [1.0, -0.1], [1.0, math.inf], [1.0, "x"], [1.0, True], [1.0, 10 ** 400],
])
def test_validate_weights_rejects(weights):
    with pytest.raises(ProtocolError):
        ScoringEngine.validate_weights(weights, 2)


def test_similarity_single_exact_neighbour():
    scorer = ScoringEngine.fit_similarity_scorer([("red apple", hsn("08081000"))], k_neighbors=1)
    assert scorer.score(request("red apple", "", "08", "84")).weights == (1.0, 0.0)


def test_similarity_falls_back_to_uniform_off_the_training_paths():
    scorer = ScoringEngine.fit_similarity_scorer([("red apple", hsn("08081000"))], k_neighbors=1)
    assert scorer.score(request("red apple", "84", "71", "72")).weights == (1.0, 1.0)


def test_similarity_sums_equally_similar_neighbours():
    scorer = ScoringEngine.fit_similarity_scorer(
        [("apple red", hsn("08081000")), ("apple tan", hsn("08082000"))],
        k_neighbors=2,
    )
    first, second = scorer.score(request("apple", "0808", "10", "20")).weights
    assert first == pytest.approx(second)
    assert first == pytest.approx(1 - 4 / 14)


def test_similarity_prefers_the_exact_description_at_every_level():
    examples = [
        ("fresh red apples", hsn("08081000")),
        ("laptop computer", hsn("84713010")),
        ("mobile phone handset", hsn("85171200")),
        ("storage drive", hsn("84717020")),
    ]
    scorer = ScoringEngine.fit_similarity_scorer(examples, k_neighbors=len(examples))
    cases = [
        ("", ["08", "84", "85"], "84"),
        ("84", ["71"], "71"),
        ("8471", ["30", "70"], "30"),
        ("847130", ["10"], "10"),
    ]
    for prefix, candidates, expected in cases:
        weights = scorer.score(request("laptop computer", prefix, *candidates)).weights
        best = candidates[weights.index(max(weights))]
        assert best == expected
        assert sorted(weights)[-1] > (sorted(weights)[-2] if len(weights) > 1 else 0)


def test_fit_needs_examples():
    with pytest.raises(EmptyTrainingSet):
        ScoringEngine.fit_similarity_scorer([], k_neighbors=1)


def test_fit_rejects_mixed_kinds():
    with pytest.raises(MixedKinds):
        ScoringEngine.fit_similarity_scorer(
            [("a b", hsn("84713010")), ("c d", TaxCode.from_digits(CodeKind.SAC, "998314"))],
            k_neighbors=1,
        )


def test_external_scorer_matches_uniform():
    with ExternalScorer(stub_command("uniform_scorer.py"), timeout=10) as scorer:
        assert not scorer.concurrent_safe
        for prefix, candidates in [("", ["84", "85"]), ("84", ["71"]), ("8471", ["30", "70", "90"])]:
            req = request("laptop", prefix, *candidates)
            assert scorer.score(req) == UniformScorer().score(req)


@pytest.mark.parametrize("mode", ["negative", "garbage", "bad-utf8", "wrong-id"])
def test_external_scorer_protocol_errors(mode):
    with ExternalScorer(stub_command("faulty_scorer.py", mode), timeout=10) as scorer:
        with pytest.raises(ProtocolError):
            scorer.score(request("laptop", "", "84", "85"))


def test_external_scorer_exit_mid_stream():
    with ExternalScorer(stub_command("faulty_scorer.py", "exit"), timeout=10) as scorer:
        with pytest.raises(ScorerUnavailable):
            scorer.score(request("laptop", "", "84", "85"))


def test_external_scorer_bad_handshake():
    with pytest.raises(ProtocolError):
        ExternalScorer(stub_command("faulty_scorer.py", "no-hello"), timeout=10)


def test_external_scorer_missing_program(tmp_path):
    with pytest.raises(ScorerUnavailable):
        ExternalScorer(str(tmp_path / "no-such-scorer"), timeout=1)


def test_build_scorer_specs(tmp_path):
    table = tmp_path / "table.jsonl"
    table.write_text('{"prefix": [], "candidate": "84", "weight": 2}\n', encoding="utf-8")
    train = tmp_path / "train.jsonl"
    train.write_text('{"id": "1", "description": "laptop computer", "code": "84713010"}\n', encoding="utf-8")

    assert isinstance(ScoringEngine.build_scorer("uniform", CodeKind.HSN), UniformScorer)
    assert ScoringEngine.build_scorer(f"table:{table}", CodeKind.HSN).score(request("x", "", "84")).weights == (2.0,)
    knn = ScoringEngine.build_scorer(f"knn:{train}:3", CodeKind.HSN)
    assert knn.k_neighbors == 3


def test_knn_spec_without_k_uses_the_configured_neighbours(tmp_path, monkeypatch):
    train = tmp_path / "train.jsonl"
    train.write_text('{"id": "1", "description": "laptop computer", "code": "84713010"}\n', encoding="utf-8")
    monkeypatch.setattr(settings, "knn_neighbors", 7)
    assert ScoringEngine.build_scorer(f"knn:{train}", CodeKind.HSN).k_neighbors == 7


@pytest.mark.parametrize("spec", [
    "", "uniform:x", "table:", "knn:", "knn:train.jsonl:0", "knn:train.jsonl:x", "bogus",
])
def test_build_scorer_rejects_bad_specs(spec):
    with pytest.raises(UsageError):
        ScoringEngine.build_scorer(spec, CodeKind.HSN)

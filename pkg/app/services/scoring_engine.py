"""Conditional weights P(candidate | text, prefix) consumed by the decoder.

Scorers return non-negative, unnormalized weights; the decoder normalizes
them over the candidate set.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import IO, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import json
import logging
import math
import queue
import shlex
import subprocess
import threading

import numpy as np
from rapidfuzz import process
from rapidfuzz.distance import Indel

from app.config import settings
from app.exceptions import (
    EmptyTrainingSet, InvalidCode, MalformedRecord, MixedKinds, ProtocolError,
    ScorerTimeout, ScorerUnavailable, UsageError,
)
from app.models import LEVEL_ORDER, CodeKind, Segment, TaxCode, segment_values
from app.schemas import TableRow
from app.storage import JSONL_ERRORS, iter_jsonl, open_text, read_dataset


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRequest:
    input_text: str
    kind: CodeKind
    prefix: Tuple[Segment, ...]
    candidates: Tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValueError("score request needs at least one candidate")
        values = [candidate.value for candidate in self.candidates]
        if len(set(values)) != len(values):
            raise ValueError("score request candidates must be distinct")
        if len(self.prefix) >= self.kind.depth:
            raise ValueError("score request prefix is already a full code")
        level = LEVEL_ORDER[len(self.prefix)]
        if any(candidate.level is not level for candidate in self.candidates):
            raise ValueError(f"score request candidates must all be at level {level.value}")


@dataclass(frozen=True)
class ScoreResponse:
    weights: Tuple[float, ...]

    @property
    def degenerate(self) -> bool:
        return not any(weight > 0 for weight in self.weights)


class Scorer(ABC):
    concurrent_safe = True

    @abstractmethod
    def score(self, request: ScoreRequest) -> ScoreResponse:
        ...

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class UniformScorer(Scorer):
    def score(self, request: ScoreRequest) -> ScoreResponse:
        return ScoreResponse(tuple(1.0 for _ in request.candidates))


class TableScorer(Scorer):
    """Looks weights up by (prefix values, candidate value); absent pairs weigh 0."""

    def __init__(self, table: Mapping[Tuple[Tuple[str, ...], str], float]):
        self._table: Dict[Tuple[Tuple[str, ...], str], float] = {
            (tuple(prefix), candidate): float(weight) for (prefix, candidate), weight in table.items()
        }

    @classmethod
    def from_rows(cls, rows: Sequence[TableRow]) -> "TableScorer":
        return cls({(tuple(row.prefix), row.candidate): row.weight for row in rows})

    @classmethod
    def from_jsonl(cls, stream: IO[str]) -> "TableScorer":
        table = {}
        for line_no, row in iter_jsonl(stream, TableRow):
            key = (tuple(row.prefix), row.candidate)
            if key in table:
                raise MalformedRecord(f"duplicate table entry for prefix {row.prefix} candidate {row.candidate}", line=line_no)
            table[key] = row.weight
        return cls(table)

    def score(self, request: ScoreRequest) -> ScoreResponse:
        prefix = tuple(segment_values(request.prefix))
        return ScoreResponse(tuple(self._table.get((prefix, c.value), 0.0) for c in request.candidates))


class SimilarityScorer(Scorer):
    """k-nearest-neighbour scorer over labelled descriptions.

    Each candidate weighs the summed similarity of the neighbours whose code
    continues the request prefix with that candidate.
    """

    def __init__(self, descriptions: Sequence[str], codes: Sequence[TaxCode], k_neighbors: int):
        self.kind = codes[0].kind
        self.k_neighbors = k_neighbors
        self._descriptions = list(descriptions)
        self._digits = [code.digits for code in codes]
        self._neighbors = lru_cache(maxsize=4096)(self._find_neighbors)

    def _find_neighbors(self, text: str) -> Tuple[Tuple[int, float], ...]:
        scores = process.cdist([text], self._descriptions, scorer=Indel.normalized_similarity, dtype=np.float64)[0]
        order = np.argsort(-scores, kind="stable")[: self.k_neighbors]
        return tuple((int(index), float(scores[index])) for index in order)

    def score(self, request: ScoreRequest) -> ScoreResponse:
        prefix = "".join(segment_values(request.prefix))
        depth = len(prefix)
        totals = {candidate.value: 0.0 for candidate in request.candidates}
        extends = False
        for index, score in self._neighbors(request.input_text):
            digits = self._digits[index]
            if not digits.startswith(prefix):
                continue
            extends = True
            following = digits[depth:depth + 2]
            if following in totals:
                totals[following] += score
        if not extends:
            return ScoreResponse(tuple(1.0 for _ in request.candidates))
        return ScoreResponse(tuple(totals[candidate.value] for candidate in request.candidates))


class ExternalScorer(Scorer):
    """Child process speaking newline-delimited JSON on stdin/stdout.

    One exchange is in flight at a time; callers may share the instance.
    """

    concurrent_safe = False

    def __init__(self, command: Union[str, Sequence[str]], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._next_id = 0
        self._lines: "queue.Queue[Union[str, ProtocolError, None]]" = queue.Queue()
        try:
            self._process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise ScorerUnavailable(f"cannot start scorer {self.command!r}: {exc}")
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        try:
            self._handshake()
        except Exception:
            self.close()
            raise

    def _pump(self) -> None:
        for raw in self._process.stdout:
            try:
                self._lines.put(raw.decode("utf-8"))
            except UnicodeDecodeError as exc:
                self._lines.put(ProtocolError(f"reply is not valid UTF-8 ({exc.reason})"))
        self._lines.put(None)

    def _send(self, payload: dict) -> None:
        try:
            self._process.stdin.write((json.dumps(payload) + "\n").encode("utf-8"))
            self._process.stdin.flush()
        except (BrokenPipeError, OSError, ValueError) as exc:
            raise ScorerUnavailable(f"scorer process is gone: {exc}")

    def _receive(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ScorerTimeout(f"no reply from scorer within {self.timeout:g}s")
        if line is None:
            code = self._process.poll()
            raise ScorerUnavailable(f"scorer process exited (status {code})")
        if isinstance(line, ProtocolError):
            raise line
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable reply {line.strip()!r}: {exc.msg}")
        if not isinstance(reply, dict):
            raise ProtocolError(f"reply is not a JSON object: {line.strip()!r}")
        return reply

    def _handshake(self) -> None:
        self._send({"hello": 1})
        reply = self._receive()
        if reply != {"hello": 1}:
            raise ProtocolError(f"bad handshake reply {reply!r}")
        logger.info(f"External scorer ready: {' '.join(self.command)}")

    def score(self, request: ScoreRequest) -> ScoreResponse:
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            self._send({
                "id": request_id,
                "input": request.input_text,
                "kind": request.kind.value,
                "prefix": segment_values(request.prefix),
                "candidates": [candidate.value for candidate in request.candidates],
            })
            reply = self._receive()
        if reply.get("id") != request_id:
            raise ProtocolError(f"reply id {reply.get('id')!r} does not match request id {request_id}")
        weights = reply.get("weights")
        if not isinstance(weights, list):
            raise ProtocolError(f"reply {request_id} carries no weight list")
        logger.debug(f"Scorer exchange {request_id}: {len(weights)} weight(s)")
        return ScoringEngine.validate_weights(weights, len(request.candidates))

    def close(self) -> None:
        process_ = self._process
        if process_.poll() is None:
            try:
                process_.stdin.close()
            except OSError:
                pass
            try:
                process_.wait(timeout=2)
            except subprocess.TimeoutExpired:
                process_.kill()
                process_.wait()


class ScoringEngine:
    SCORER_SPECS = "uniform, table:<path>, knn:<train_jsonl>[:<k>] or external:<command>"

    @staticmethod
    def validate_weights(weights: Sequence[float], expected: int) -> ScoreResponse:
        if len(weights) != expected:
            raise ProtocolError(f"expected {expected} weights, got {len(weights)}")
        checked = []
        for weight in weights:
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise ProtocolError(f"weight {weight!r} is not a number")
            try:
                weight = float(weight)
            except OverflowError:
                raise ProtocolError("integer weight is too large for a float")
            if not math.isfinite(weight) or weight < 0:
                raise ProtocolError(f"weight {weight!r} is not finite and non-negative")
            checked.append(weight)
        return ScoreResponse(tuple(checked))

    @staticmethod
    def fit_similarity_scorer(examples: Sequence[Tuple[str, TaxCode]], k_neighbors: int) -> SimilarityScorer:
        if not examples:
            raise EmptyTrainingSet("similarity scorer needs at least one labelled description")
        if k_neighbors < 1:
            raise UsageError(f"k_neighbors must be at least 1, got {k_neighbors}")
        kinds = {code.kind for _, code in examples}
        if len(kinds) > 1:
            raise MixedKinds(f"training codes mix kinds: {sorted(kind.value for kind in kinds)}")
        descriptions = [description for description, _ in examples]
        codes = [code for _, code in examples]
        logger.info(f"Fitted similarity scorer on {len(examples)} example(s), k={k_neighbors}")
        return SimilarityScorer(descriptions, codes, k_neighbors)

    @staticmethod
    def build_scorer(
        spec: str,
        kind: CodeKind,
        *,
        clean_text=None,
        timeout: Optional[float] = None,
    ) -> Scorer:
        """Parse a scorer spec; ``knn`` without ``:<k>`` uses ``settings.knn_neighbors``.

        ``clean_text`` maps a raw training description to its cleaned form, or
        ``None`` for descriptions rejected by cleaning.
        """
        name, _, argument = spec.partition(":")
        if name == "uniform" and not argument:
            return UniformScorer()
        if name == "table" and argument:
            with open_text(argument, errors=JSONL_ERRORS) as stream:
                return TableScorer.from_jsonl(stream)
        if name == "knn" and argument:
            path, separator, k = argument.rpartition(":")
            if not separator:
                path, k = argument, str(settings.knn_neighbors)
            if not path or not k.isdigit() or int(k) < 1:
                raise UsageError(f"knn scorer spec must be knn:<train_jsonl>[:<k>] with k >= 1, got {spec!r}")
            return _fit_from_file(Path(path), int(k), kind, clean_text)
        if name == "external" and argument:
            return ExternalScorer(argument, timeout=settings.scorer_timeout_seconds if timeout is None else timeout)
        raise UsageError(f"unknown scorer spec {spec!r}; expected {ScoringEngine.SCORER_SPECS}")


def _fit_from_file(path: Path, k: int, kind: CodeKind, clean_text) -> SimilarityScorer:
    examples: List[Tuple[str, TaxCode]] = []
    for record in read_dataset(path):
        if record.code is None:
            continue
        try:
            code = TaxCode.from_digits(kind, record.code)
        except InvalidCode as exc:
            raise MalformedRecord(f"{path}: record {record.id!r}: {exc}")
        text = clean_text(record.description) if clean_text else record.description
        if text is None:
            continue
        examples.append((text, code))
    return ScoringEngine.fit_similarity_scorer(examples, k)

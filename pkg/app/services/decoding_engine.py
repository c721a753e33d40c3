"""Hierarchical constrained beam search over the taxonomy trie.

Every level expands each hypothesis over the trie children of its prefix,
normalizes the scorer weights over that candidate set, keeps the ``width``
most probable partial codes and moves on. Probabilities are accumulated in
log space and exponentiated on the way out.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union
import logging
import math

from app.exceptions import EmptyTaxonomy, RejectedInput, TaxcodeError
from app.models import Level, Segment, TaxCode, prefix_digits
from app.services.cleaning_engine import CleanedText
from app.services.scoring_engine import ScoreRequest, Scorer, ScoringEngine
from app.services.taxonomy_engine import TaxonomyTrie


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BeamConfig:
    width: int = 5
    return_n: int = 1

    def __post_init__(self):
        if self.width < 1:
            raise ValueError(f"beam width must be at least 1, got {self.width}")
        if not 1 <= self.return_n <= self.width:
            raise ValueError(f"return_n must lie in [1, {self.width}], got {self.return_n}")


@dataclass(frozen=True)
class TraceStep:
    level: Level
    segment: Segment
    candidate_count: int
    probability: float


@dataclass(frozen=True)
class Hypothesis:
    prefix: Tuple[Segment, ...] = ()
    log_prob: float = 0.0
    level_probs: Tuple[TraceStep, ...] = ()
    fallback_events: int = 0

    @property
    def digits(self) -> str:
        return prefix_digits(self.prefix)

    def extend(self, segment: Segment, probability: float, candidate_count: int, fell_back: bool) -> "Hypothesis":
        return Hypothesis(
            self.prefix + (segment,),
            self.log_prob + math.log(probability),
            self.level_probs + (TraceStep(segment.level, segment, candidate_count, probability),),
            self.fallback_events + int(fell_back),
        )


@dataclass(frozen=True)
class Prediction:
    code: TaxCode
    probability: float
    trace: Tuple[TraceStep, ...]
    fallback_events: int = 0


class DecodingEngine:
    @staticmethod
    def normalize(weights: Sequence[float]) -> Tuple[List[float], bool]:
        """Scale weights to a distribution; an all-zero vector becomes uniform."""
        largest = max(weights)
        if largest <= 0:
            return [1.0 / len(weights)] * len(weights), True
        # fsum overflows on huge finite weights unless they are rescaled first
        scaled = [weight / largest for weight in weights]
        total = math.fsum(scaled)
        return [weight / total for weight in scaled], False

    @staticmethod
    def beam_search(trie: TaxonomyTrie, scorer: Scorer, input_text: str, config: BeamConfig) -> List[Prediction]:
        if trie.leaf_count == 0:
            raise EmptyTaxonomy("cannot decode against an empty taxonomy")

        beam = [Hypothesis()]
        for level in trie.kind.levels:
            expanded: List[Hypothesis] = []
            for hypothesis in beam:
                candidates = trie.valid_candidates(hypothesis.prefix)
                request = ScoreRequest(input_text, trie.kind, hypothesis.prefix, tuple(candidates))
                response = ScoringEngine.validate_weights(scorer.score(request).weights, len(candidates))
                probabilities, fell_back = DecodingEngine.normalize(response.weights)
                if fell_back:
                    logger.warning(
                        f"Scorer gave no weight to any of {len(candidates)} candidate(s) after "
                        f"[{hypothesis.digits}]; using uniform weights"
                    )
                for candidate, probability in zip(candidates, probabilities):
                    if probability > 0:
                        expanded.append(hypothesis.extend(candidate, probability, len(candidates), fell_back))
            expanded.sort(key=lambda h: (-h.log_prob, h.digits))
            beam = expanded[: config.width]
            logger.debug(f"{level.value}: kept {len(beam)} of {len(expanded)} expansion(s)")

        return [_to_prediction(trie, hypothesis) for hypothesis in beam[: config.return_n]]

    @staticmethod
    def predict(trie: TaxonomyTrie, scorer: Scorer, cleaned: CleanedText, config: BeamConfig) -> Prediction:
        if cleaned.rejected:
            raise RejectedInput(f"cannot predict a rejected description ({cleaned.rejection_reason.value})")
        return DecodingEngine.beam_search(trie, scorer, cleaned.text, config)[0]

    @staticmethod
    def predict_batch(
        trie: TaxonomyTrie,
        scorer: Scorer,
        texts: Sequence[str],
        config: BeamConfig,
        jobs: int = 1,
        return_exceptions: bool = False,
    ) -> List[Union[List[Prediction], TaxcodeError]]:
        """Decode many inputs, results in input order.

        With ``return_exceptions`` a failing input yields its error in place of
        its predictions instead of aborting the batch. Otherwise the first error
        is raised with ``batch_index`` set to the position of the failing input.
        """
        if jobs > 1 and not scorer.concurrent_safe:
            logger.warning(f"{type(scorer).__name__} serializes requests; decoding with 1 job instead of {jobs}")
            jobs = 1

        def decode(item: Tuple[int, str]):
            position, text = item
            try:
                return DecodingEngine.beam_search(trie, scorer, text, config)
            except TaxcodeError as exc:
                if not return_exceptions:
                    exc.batch_index = position
                    raise
                return exc

        if jobs <= 1:
            return [decode(item) for item in enumerate(texts)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(decode, enumerate(texts)))


def _to_prediction(trie: TaxonomyTrie, hypothesis: Hypothesis) -> Prediction:
    code = TaxCode(trie.kind, hypothesis.prefix)
    if not trie.contains(code):
        raise AssertionError(f"decoder produced {code.digits}, which is not in the taxonomy")
    return Prediction(code, math.exp(hypothesis.log_prob), hypothesis.level_probs, hypothesis.fallback_events)


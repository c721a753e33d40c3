"""Description cleaning and catalog enrichment.

Stages run in a fixed order: variant normalization, whitespace tokenization,
noise stripping, brand masking, repeat removal. Rejection is returned as data.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, List, Optional, Pattern, Sequence, Tuple
import logging
import re

from rapidfuzz.distance import Indel

from app.exceptions import RejectedInput, UsageError
from app.models import RejectionReason
from app.schemas import CatalogEntry, CleanConfig


logger = logging.getLogger(__name__)

BRAND_TOKEN = "<brand>"
MIN_STEM = 4
MAX_PASSES = 8

_WORD = re.compile(r"^[a-z]+$")
_SIBILANT_PLURALS = ("sses", "shes", "ches", "xes", "zes")
_NOT_PLURAL = ("ss", "us", "is")


@dataclass(frozen=True)
class CleanedText:
    text: str
    rejected: bool = False
    rejection_reason: Optional[RejectionReason] = None

    def __post_init__(self):
        if self.rejected != (self.rejection_reason is not None):
            raise ValueError("rejected must be set exactly when a rejection reason is given")


class CleaningEngine:
    @staticmethod
    def dedup_repeats(tokens: Sequence[str]) -> List[str]:
        """Drop the second copy of adjacent repeated runs, longest run first, until none remain."""
        result = list(tokens)
        changed = True
        while changed:
            changed = False
            for width in range(len(result) // 2, 0, -1):
                for start in range(0, len(result) - 2 * width + 1):
                    if result[start:start + width] == result[start + width:start + 2 * width]:
                        del result[start + width:start + 2 * width]
                        changed = True
                        break
                if changed:
                    break
        return result

    @staticmethod
    def strip_noise(tokens: Sequence[str], config: CleanConfig) -> List[str]:
        patterns = _compiled_patterns(tuple(config.noise_patterns))
        protected = _canonical_tokens(config)
        kept = []
        for token in tokens:
            if token in protected or not any(pattern.search(token) for pattern in patterns):
                kept.append(token)
        return kept

    @staticmethod
    def normalize_variants(text: str, config: CleanConfig) -> str:
        text = " ".join(text.lower().split())
        if not text:
            return text

        abbreviations = _abbreviation_pattern(tuple(sorted(config.abbreviations.items())))
        if abbreviations is not None:
            pattern, lookup = abbreviations
            text = pattern.sub(lambda m: lookup[m.group(0)], text)

        variants = _variant_pattern(tuple((k, tuple(v)) for k, v in sorted(config.variant_map.items())))
        if variants is not None:
            pattern, lookup = variants
            text = pattern.sub(lambda m: lookup[m.group(0)], text)

        protected = _canonical_tokens(config)
        return " ".join(
            token if token in protected else CleaningEngine.lemmatize(token) for token in text.split()
        )

    @staticmethod
    def lemmatize(token: str) -> str:
        """Conservative suffix stripping, repeated until the token stops changing."""
        while True:
            stem = _strip_suffix(token)
            if stem == token:
                return token
            token = stem

    @staticmethod
    def mask_brands(tokens: Sequence[str], config: CleanConfig) -> List[str]:
        brands = _brand_forms(tuple(config.brand_set))
        return [BRAND_TOKEN if token.lower() in brands else token for token in tokens]

    @staticmethod
    def clean(description: str, config: CleanConfig) -> CleanedText:
        text = description
        tokens: List[str] = []
        for _ in range(MAX_PASSES):
            tokens = _run_stages(text, config)
            joined = " ".join(tokens)
            if joined == text:
                break
            text = joined
        else:
            logger.debug(f"Cleaning did not settle after {MAX_PASSES} passes: {description!r}")

        if not tokens:
            return CleanedText(text, True, RejectionReason.Empty)
        informative = sum(1 for token in tokens if token != BRAND_TOKEN)
        if informative < config.min_informative_tokens:
            return CleanedText(text, True, RejectionReason.Incomplete)
        return CleanedText(text)

    @staticmethod
    def similarity(a: str, b: str) -> float:
        return Indel.normalized_similarity(a, b)

    @staticmethod
    def enrich(cleaned: CleanedText, catalog: Sequence[CatalogEntry], threshold: float) -> CleanedText:
        if cleaned.rejected:
            raise RejectedInput(f"cannot enrich a rejected description ({cleaned.rejection_reason.value})")
        if not 0 < threshold <= 1:
            raise UsageError(f"enrichment threshold must lie in (0, 1], got {threshold}")

        best: Optional[CatalogEntry] = None
        best_score = -1.0
        for entry in catalog:
            score = CleaningEngine.similarity(cleaned.text, entry.canonical_description)
            if score > best_score:
                best, best_score = entry, score

        if best is None or best_score < threshold:
            return cleaned

        tokens = cleaned.text.split()
        seen = set(tokens)
        additions = best.canonical_description.lower().split()
        for tag in best.category_tags:
            additions.extend(tag.lower().split())
        for token in additions:
            if token not in seen:
                tokens.append(token)
                seen.add(token)
        logger.debug(f"Enriched {cleaned.text!r} from catalog entry {best.canonical_description!r} ({best_score:.3f})")
        return CleanedText(" ".join(tokens))


def _run_stages(text: str, config: CleanConfig) -> List[str]:
    tokens = CleaningEngine.normalize_variants(text, config).split()
    tokens = CleaningEngine.strip_noise(tokens, config)
    tokens = CleaningEngine.mask_brands(tokens, config)
    return CleaningEngine.dedup_repeats(tokens)


def _strip_suffix(word: str) -> str:
    if not _WORD.match(word):
        return word
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) - len(suffix) >= MIN_STEM:
            return word[: -len(suffix)]
    if word.endswith("ies") and len(word) - 3 >= MIN_STEM:
        return word[:-3] + "y"
    if word.endswith(_SIBILANT_PLURALS) and len(word) - 2 >= MIN_STEM:
        return word[:-2]
    if word.endswith("s") and not word.endswith(_NOT_PLURAL) and len(word) - 1 >= MIN_STEM:
        return word[:-1]
    return word


@lru_cache(maxsize=64)
def _compiled_patterns(patterns: Tuple[str, ...]) -> Tuple[Pattern, ...]:
    return tuple(re.compile(pattern) for pattern in patterns)


def _canonical_tokens(config: CleanConfig) -> FrozenSet[str]:
    return _canonical_token_set(tuple(config.variant_map))


@lru_cache(maxsize=64)
def _canonical_token_set(canonicals: Tuple[str, ...]) -> FrozenSet[str]:
    return frozenset(token for canonical in canonicals for token in canonical.lower().split())


@lru_cache(maxsize=64)
def _brand_forms(brands: Tuple[str, ...]) -> FrozenSet[str]:
    forms = set()
    for brand in brands:
        brand = brand.lower().strip()
        if brand:
            forms.add(brand)
            forms.add(CleaningEngine.lemmatize(brand))
    return frozenset(forms)


@lru_cache(maxsize=64)
def _variant_pattern(variant_map: Tuple[Tuple[str, Tuple[str, ...]], ...]):
    lookup = {}
    for canonical, variants in variant_map:
        for variant in variants:
            lookup[" ".join(variant.lower().split())] = canonical.lower()
    return _phrase_pattern(lookup)


@lru_cache(maxsize=64)
def _abbreviation_pattern(abbreviations: Tuple[Tuple[str, str], ...]):
    lookup = {" ".join(short.lower().split()): " ".join(full.lower().split()) for short, full in abbreviations}
    return _phrase_pattern(lookup)


def _phrase_pattern(lookup: dict):
    lookup = {phrase: replacement for phrase, replacement in lookup.items() if phrase}
    if not lookup:
        return None
    # longest phrase first so "two in one" wins over "two"
    phrases = sorted(lookup, key=lambda phrase: (-len(phrase), phrase))
    alternation = "|".join(re.escape(phrase) for phrase in phrases)
    return re.compile(rf"(?<!\S)(?:{alternation})(?!\S)"), lookup

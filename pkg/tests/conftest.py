import random
from typing import Dict, Tuple

import pytest

from app.models import CodeKind
from app.schemas import CleanConfig
from app.services.scoring_engine import TableScorer
from app.services.taxonomy_engine import TaxonomyTrie


FIXTURE_CODES = {
    "84713010": "Portable laptop computers",
    "84717020": "Storage units for computers",
    "85171200": "Mobile telephones",
}

FIXTURE_CSV = (
    "kind,code,description\n"
    "HSN,84713010,Portable laptop computers\n"
    "HSN,84717020,Storage units for computers\n"
    "HSN,85171200,Mobile telephones\n"
)

DECODER_TABLE = {
    ((), "84"): 0.6,
    ((), "85"): 0.4,
    (("84",), "71"): 1.0,
    (("85",), "17"): 1.0,
    (("84", "71"), "30"): 0.3,
    (("84", "71"), "70"): 0.7,
    (("85", "17"), "12"): 1.0,
    (("84", "71", "30"), "10"): 1.0,
    (("84", "71", "70"), "20"): 1.0,
    (("85", "17", "12"), "00"): 1.0,
}


@pytest.fixture
def fixture_trie() -> TaxonomyTrie:
    return TaxonomyTrie.from_codes(CodeKind.HSN, FIXTURE_CODES)


@pytest.fixture
def taxonomy_file(tmp_path):
    path = tmp_path / "taxonomy.csv"
    path.write_text(FIXTURE_CSV, encoding="utf-8")
    return path


@pytest.fixture
def decoder_scorer() -> TableScorer:
    return TableScorer(DECODER_TABLE)


@pytest.fixture
def tied_scorer() -> TableScorer:
    table = dict(DECODER_TABLE)
    table[(("84", "71"), "30")] = 0.5
    table[(("84", "71"), "70")] = 0.5
    return TableScorer(table)


@pytest.fixture
def laptop_config() -> CleanConfig:
    return CleanConfig(
        variant_map={"2-in-1": ["2in1", "two in one"]},
        brands=["acme"],
        min_informative_tokens=2,
    )


def random_codes(rng: random.Random, kind: CodeKind, max_chapters: int = 4, max_branching: int = 4) -> Dict[str, str]:
    """Random taxonomy with distinct segment values under every parent."""
    codes = {}

    def grow(prefix: str, depth: int, fanout: int):
        if depth == kind.depth:
            codes[prefix] = f"item {prefix}"
            return
        for value in rng.sample(range(100), fanout):
            grow(prefix + f"{value:02d}", depth + 1, rng.randint(1, max_branching))

    grow("", 0, rng.randint(1, max_chapters))
    return codes


def random_table(rng: random.Random, codes, zero_rate: float = 0.0) -> Dict[Tuple[Tuple[str, ...], str], float]:
    table = {}
    for digits in codes:
        segments = [digits[i:i + 2] for i in range(0, len(digits), 2)]
        for depth, value in enumerate(segments):
            key = (tuple(segments[:depth]), value)
            if key not in table:
                table[key] = 0.0 if rng.random() < zero_rate else rng.random() + 0.01
    return table


@pytest.fixture
def random_instance():
    def build(seed: int, kind: CodeKind = CodeKind.HSN, zero_rate: float = 0.0):
        rng = random.Random(seed)
        codes = random_codes(rng, kind)
        table = random_table(rng, codes, zero_rate)
        return TaxonomyTrie.from_codes(kind, codes), TableScorer(table), table

    return build

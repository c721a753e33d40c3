import itertools
import random

import pytest
from pydantic import ValidationError

from app.exceptions import RejectedInput, UsageError
from app.models import RejectionReason
from app.schemas import CatalogEntry, CleanConfig
from app.services.cleaning_engine import BRAND_TOKEN, CleanedText, CleaningEngine


def indel_distance(a: str, b: str) -> int:
    """Reference edit distance with insertions and deletions only."""
    rows = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        for j in range(len(b) + 1):
            if i == 0 or j == 0:
                rows[i][j] = i + j
            elif a[i - 1] == b[j - 1]:
                rows[i][j] = rows[i - 1][j - 1]
            else:
                rows[i][j] = 1 + min(rows[i - 1][j], rows[i][j - 1])
    return rows[len(a)][len(b)]


def has_adjacent_repeat(tokens) -> bool:
    for width in range(1, len(tokens) // 2 + 1):
        for start in range(len(tokens) - 2 * width + 1):
            if tokens[start:start + width] == tokens[start + width:start + 2 * width]:
                return True
    return False


# dedup_repeats

def test_dedup_adjacent_pair():
    assert CleaningEngine.dedup_repeats(["red", "apple", "red", "apple"]) == ["red", "apple"]


def test_dedup_keeps_non_adjacent():
    assert CleaningEngine.dedup_repeats(["red", "apple", "green", "apple"]) == ["red", "apple", "green", "apple"]


def test_dedup_reaches_fixpoint():
    assert CleaningEngine.dedup_repeats(["a", "a", "a", "a"]) == ["a"]


def test_dedup_leaves_no_repeats():
    rng = random.Random(5)
    for _ in range(500):
        tokens = [rng.choice("abc") for _ in range(rng.randint(0, 10))]
        result = CleaningEngine.dedup_repeats(tokens)
        assert not has_adjacent_repeat(result)
        assert len(result) <= len(tokens)


# strip_noise

def test_strip_serial_number():
    assert CleaningEngine.strip_noise(["laptop", "sn48532-a", "portable"], CleanConfig()) == ["laptop", "portable"]


def test_short_digit_run_is_kept():
    assert CleaningEngine.strip_noise(["usb", "3"], CleanConfig()) == ["usb", "3"]


def test_strip_punctuation_and_long_digit_runs():
    assert CleaningEngine.strip_noise(["item", "#####", "123456789"], CleanConfig()) == ["item"]


def test_canonical_forms_survive_noise_rules(laptop_config):
    assert CleaningEngine.strip_noise(["2-in-1", "laptop"], laptop_config) == ["2-in-1", "laptop"]


# normalize_variants

def test_variant_and_lowercase(laptop_config):
    assert CleaningEngine.normalize_variants("2in1 Laptop", laptop_config) == "2-in-1 laptop"


def test_phrase_variant_and_plural(laptop_config):
    assert CleaningEngine.normalize_variants("two in one  tablets", laptop_config) == "2-in-1 tablet"


def test_empty_text(laptop_config):
    assert CleaningEngine.normalize_variants("", laptop_config) == ""


def test_abbreviations_expand_before_variants():
    config = CleanConfig(abbreviations={"pc": "personal computer"})
    assert CleaningEngine.normalize_variants("PC monitor", config) == "personal computer monitor"


@pytest.mark.parametrize("word, lemma", [
    ("tablets", "tablet"),
    ("watches", "watch"),
    ("batteries", "battery"),
    ("printing", "print"),
    ("printed", "print"),
    ("glass", "glass"),
    ("bus", "bus"),
    ("bed", "bed"),
    ("sing", "sing"),
])
def test_lemmatize(word, lemma):
    assert CleaningEngine.lemmatize(word) == lemma


# mask_brands

def test_mask_brand(laptop_config):
    assert CleaningEngine.mask_brands(["acme", "laptop"], laptop_config) == [BRAND_TOKEN, "laptop"]


def test_no_brand(laptop_config):
    assert CleaningEngine.mask_brands(["laptop"], laptop_config) == ["laptop"]


def test_brand_match_is_case_insensitive(laptop_config):
    assert CleaningEngine.mask_brands(["ACME", "acme"], laptop_config) == [BRAND_TOKEN, BRAND_TOKEN]


def test_noise_and_brand_stages_never_add_tokens(laptop_config):
    rng = random.Random(41)
    vocabulary = ["acme", "ACME", "laptop", "2-in-1", "sn12345", "12345678", "13", "!!", "watches", "red", "#"]
    for _ in range(2_000):
        tokens = [rng.choice(vocabulary) for _ in range(rng.randint(0, 12))]
        stripped = CleaningEngine.strip_noise(tokens, laptop_config)
        masked = CleaningEngine.mask_brands(tokens, laptop_config)
        assert len(stripped) <= len(tokens)
        assert len(masked) <= len(tokens)
        assert len(CleaningEngine.mask_brands(stripped, laptop_config)) <= len(stripped)


# clean

def test_clean_runs_every_stage(laptop_config):
    cleaned = CleaningEngine.clean("ACME 2in1 Laptop SN48532-A 2in1 laptop", laptop_config)
    assert cleaned == CleanedText("<brand> 2-in-1 laptop")


def test_clean_rejects_empty(laptop_config):
    cleaned = CleaningEngine.clean("#### 12345", laptop_config)
    assert cleaned.rejected
    assert cleaned.rejection_reason is RejectionReason.Empty


def test_clean_rejects_brand_only(laptop_config):
    cleaned = CleaningEngine.clean("acme", laptop_config)
    assert cleaned.rejected
    assert cleaned.rejection_reason is RejectionReason.Incomplete


def test_cleaned_text_invariant():
    with pytest.raises(ValueError):
        CleanedText("x", rejected=True)


def test_clean_is_idempotent(laptop_config):
    rng = random.Random(17)
    vocabulary = [
        "acme", "ACME", "2in1", "two", "in", "one", "laptop", "laptops", "Tablets", "watches",
        "sn48532-a", "#####", "12345", "3", "red", "red", "apple", "printing", "<brand>", "2-in-1",
    ]
    for _ in range(10_000):
        text = " ".join(rng.choice(vocabulary) for _ in range(rng.randint(0, 8)))
        once = CleaningEngine.clean(text, laptop_config)
        twice = CleaningEngine.clean(once.text, laptop_config)
        assert twice.text == once.text


def test_clean_config_rejects_duplicate_variants():
    with pytest.raises(ValidationError):
        CleanConfig(variant_map={"2-in-1": ["2in1"], "two-in-one": ["2in1"]})


def test_clean_config_rejects_empty_variant_list():
    with pytest.raises(ValidationError):
        CleanConfig(variant_map={"2-in-1": []})


def test_clean_config_rejects_bad_pattern():
    with pytest.raises(ValidationError):
        CleanConfig(noise_patterns=["("])


# similarity

def test_similarity_examples():
    assert CleaningEngine.similarity("laptop", "laptop") == 1.0
    assert CleaningEngine.similarity("ab", "cd") == 0.0
    assert CleaningEngine.similarity("laptop", "laptops") == pytest.approx(12 / 13, abs=1e-12)
    assert CleaningEngine.similarity("", "") == 1.0


def test_similarity_matches_reference_distance():
    strings = [""]
    for length in range(1, 7):
        strings.extend("".join(chars) for chars in itertools.product("abc", repeat=length))
    rng = random.Random(23)
    # every pair of short strings, plus a sampled tail of the longer ones
    short = [s for s in strings if len(s) <= 4]
    pairs = list(itertools.product(short, short))
    pairs.extend((rng.choice(strings), rng.choice(strings)) for _ in range(20_000))
    for a, b in pairs:
        expected = 1.0 if not a and not b else 1 - indel_distance(a, b) / (len(a) + len(b))
        assert CleaningEngine.similarity(a, b) == pytest.approx(expected, abs=1e-12)
        assert (CleaningEngine.similarity(a, b) == 1.0) == (a == b)


# enrich

@pytest.fixture
def catalog():
    return [CatalogEntry(description="2-in-1 laptop", tags=["portable", "computer"])]


def test_enrich_appends_catalog_tokens(catalog):
    enriched = CleaningEngine.enrich(CleanedText("2-in-1 laptop 13"), catalog, 0.8)
    assert enriched.text == "2-in-1 laptop 13 portable computer"


def test_enrich_below_threshold_is_unchanged(catalog):
    cleaned = CleanedText("office chair")
    assert CleaningEngine.enrich(cleaned, catalog, 0.8) == cleaned


def test_enrich_ties_go_to_the_first_entry():
    catalog = [
        CatalogEntry(description="steel chair", tags=["furniture"]),
        CatalogEntry(description="steel chair", tags=["seating"]),
    ]
    assert CleaningEngine.enrich(CleanedText("steel chair"), catalog, 0.5).text == "steel chair furniture"


def test_enrich_rejected_input(catalog):
    with pytest.raises(RejectedInput):
        CleaningEngine.enrich(CleanedText("", True, RejectionReason.Empty), catalog, 0.8)


def test_enrich_threshold_range(catalog):
    with pytest.raises(UsageError):
        CleaningEngine.enrich(CleanedText("2-in-1 laptop"), catalog, 0.0)

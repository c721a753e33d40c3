"""Flags and loaders shared by several subcommands."""
from argparse import ArgumentParser, ArgumentTypeError
from typing import Callable, List, Optional
import logging

from app.config import settings
from app.exceptions import UsageError
from app.models import CodeKind
from app.schemas import CatalogEntry, CleanConfig
from app.services.cleaning_engine import CleanedText, CleaningEngine
from app.services.taxonomy_engine import TaxonomyEngine, TaxonomyTrie
from app.storage import load_catalog, load_clean_config, open_text


logger = logging.getLogger(__name__)


def kind_arg(value: str) -> CodeKind:
    try:
        return CodeKind(value.upper())
    except ValueError:
        raise ArgumentTypeError(f"kind must be hsn or sac, got {value!r}")


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise ArgumentTypeError(f"expected an integer, got {value!r}")
    if number < 1:
        raise ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def add_taxonomy_args(parser: ArgumentParser) -> None:
    parser.add_argument("--taxonomy", required=True, help="taxonomy CSV (kind,code,description)")
    parser.add_argument("--kind", type=kind_arg, default=CodeKind.HSN, help="hsn or sac (default hsn)")


def add_cleaning_args(parser: ArgumentParser) -> None:
    parser.add_argument("--config", help="cleaning rules JSON (noise patterns, variants, brands)")
    parser.add_argument("--catalog", help="catalog JSON used to enrich cleaned descriptions")
    parser.add_argument(
        "--enrich-threshold",
        type=float,
        default=settings.enrich_threshold,
        help=f"minimum catalog similarity for enrichment (default {settings.enrich_threshold})",
    )


def load_trie(path: str, kind: CodeKind) -> TaxonomyTrie:
    with open_text(path) as stream:
        return TaxonomyEngine.load_taxonomy(stream, kind)


def load_cleaning(config_path: Optional[str]) -> CleanConfig:
    if config_path:
        return load_clean_config(config_path)
    return CleanConfig(min_informative_tokens=settings.min_informative_tokens)


def make_cleaner(args) -> Callable[[str], CleanedText]:
    """Build the clean-then-enrich function selected by the cleaning flags."""
    config = load_cleaning(args.config)
    catalog: List[CatalogEntry] = load_catalog(args.catalog) if args.catalog else []
    threshold = args.enrich_threshold
    if not 0 < threshold <= 1:
        raise UsageError(f"--enrich-threshold must lie in (0, 1], got {threshold}")

    def run(description: str) -> CleanedText:
        cleaned = CleaningEngine.clean(description, config)
        if catalog and not cleaned.rejected:
            cleaned = CleaningEngine.enrich(cleaned, catalog, threshold)
        return cleaned

    return run

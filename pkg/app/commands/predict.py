import logging
import sys

from app.commands.common import add_cleaning_args, add_taxonomy_args, load_trie, make_cleaner, positive_int
from app.config import settings
from app.exceptions import TaxcodeError, UsageError
from app.schemas import Alternative, PredictionRecord, TraceEntry
from app.services.decoding_engine import BeamConfig, DecodingEngine, Prediction
from app.services.scoring_engine import ScoringEngine
from app.services.taxonomy_engine import TaxonomyTrie
from app.storage import read_dataset, write_jsonl


logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("predict", help="predict a tax code for every description")
    parser.add_argument("input", help="dataset JSONL with id and description fields, or - for stdin")
    add_taxonomy_args(parser)
    parser.add_argument(
        "--scorer",
        default="uniform",
        help=f"{ScoringEngine.SCORER_SPECS} (default uniform)",
    )
    parser.add_argument("--beam-width", type=positive_int, default=settings.beam_width)
    parser.add_argument("--top-n", type=positive_int, default=settings.top_n)
    parser.add_argument("--jobs", type=positive_int, default=settings.jobs)
    parser.add_argument("--seed", type=int, help="accepted for pipeline compatibility; decoding is deterministic")
    parser.add_argument(
        "--skip-errors",
        action="store_true",
        help="emit an error record for a failing description instead of aborting",
    )
    add_cleaning_args(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    if args.seed is not None:
        logger.warning(f"--seed {args.seed} ignored: decoding is deterministic")
    if args.top_n > args.beam_width:
        raise UsageError(f"--top-n {args.top_n} exceeds --beam-width {args.beam_width}")
    config = BeamConfig(width=args.beam_width, return_n=args.top_n)

    trie = load_trie(args.taxonomy, args.kind)
    cleaner = make_cleaner(args)
    records = read_dataset(args.input)

    def training_text(description: str):
        cleaned = cleaner(description)
        return None if cleaned.rejected else cleaned.text

    output = {}
    pending = []
    for record in records:
        cleaned = cleaner(record.description)
        if cleaned.rejected:
            output[record.id] = PredictionRecord(id=record.id, rejected=True, reason=cleaned.rejection_reason)
        else:
            pending.append((record.id, cleaned.text))

    with ScoringEngine.build_scorer(args.scorer, args.kind, clean_text=training_text) as scorer:
        try:
            results = DecodingEngine.predict_batch(
                trie,
                scorer,
                [text for _, text in pending],
                config,
                jobs=args.jobs,
                return_exceptions=args.skip_errors,
            )
        except TaxcodeError as exc:
            if hasattr(exc, "batch_index"):
                exc.record_id = pending[exc.batch_index][0]
                logger.error(f"Prediction aborted at record {exc.record_id!r}")
            raise

    errors = fallbacks = 0
    for (record_id, _), result in zip(pending, results):
        if isinstance(result, TaxcodeError):
            errors += 1
            output[record_id] = PredictionRecord(id=record_id, error=f"{type(result).__name__}: {result}")
            continue
        record = to_record(trie, record_id, result, with_alternatives=args.top_n > 1)
        fallbacks += record.fallbacks or 0
        output[record_id] = record

    write_jsonl(sys.stdout, (output[record.id] for record in records))
    rejected = len(records) - len(pending)
    logger.info(
        f"Predicted {len(pending) - errors} of {len(records)} record(s): "
        f"{rejected} rejected, {errors} failed, {fallbacks} uniform fallback(s)"
    )
    return 0


def to_record(trie: TaxonomyTrie, record_id: str, predictions, with_alternatives: bool) -> PredictionRecord:
    best: Prediction = predictions[0]
    return PredictionRecord(
        id=record_id,
        code=best.code.digits,
        probability=best.probability,
        description=trie.describe(best.code),
        trace=[
            TraceEntry(
                level=step.level,
                segment=step.segment.value,
                candidates=step.candidate_count,
                probability=step.probability,
            )
            for step in best.trace
        ],
        fallbacks=best.fallback_events,
        alternatives=[
            Alternative(code=prediction.code.digits, probability=prediction.probability)
            for prediction in predictions[1:]
        ] if with_alternatives else None,
    )

from typing import List, Tuple
import logging

from app.commands.common import kind_arg
from app.exceptions import IdMismatch, MalformedRecord, MissingGoldCode
from app.models import CodeKind, TaxCode
from app.schemas import PredictionRecord
from app.services.metrics_engine import LabeledPair, MetricsEngine
from app.storage import JSONL_ERRORS, iter_jsonl, open_text, read_dataset


logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="score predictions against gold codes")
    parser.add_argument("predictions", help="predictions JSONL written by predict")
    parser.add_argument("gold", help="gold dataset JSONL with codes")
    parser.add_argument("--kind", type=kind_arg, default=CodeKind.HSN, help="hsn or sac (default hsn)")
    parser.add_argument("--format", choices=("json", "table"), default="json")
    parser.set_defaults(handler=run)


def run(args) -> int:
    pairs, skipped = load_pairs(args.predictions, args.gold, args.kind)
    report = MetricsEngine.evaluate(pairs, skipped=skipped)
    if args.format == "table":
        print(MetricsEngine.render_table(report), end="")
    else:
        print(report.model_dump_json(indent=2, exclude_none=True))
    return 0


def read_predictions(path: str) -> List[PredictionRecord]:
    records = []
    seen = {}
    with open_text(path, errors=JSONL_ERRORS) as stream:
        for line_no, record in iter_jsonl(stream, PredictionRecord):
            if record.id in seen:
                raise MalformedRecord(f"duplicate id {record.id!r} (first seen on line {seen[record.id]})", line=line_no)
            seen[record.id] = line_no
            records.append(record)
    return records


def load_pairs(predictions_path: str, gold_path: str, kind: CodeKind) -> Tuple[List[LabeledPair], int]:
    """Join predictions to gold records by id.

    Predictions without a code (rejected during cleaning or failed) are
    left out and counted as skipped.
    """
    gold = read_dataset(gold_path)
    predictions = {record.id: record for record in read_predictions(predictions_path)}

    gold_ids = {record.id for record in gold}
    missing = sorted(gold_ids - predictions.keys())
    extra = sorted(predictions.keys() - gold_ids)
    if missing or extra:
        raise IdMismatch(
            f"{len(missing)} gold id(s) without prediction {missing[:5]}, "
            f"{len(extra)} prediction id(s) without gold {extra[:5]}"
        )

    pairs = []
    skipped = 0
    for record in gold:
        if record.code is None:
            raise MissingGoldCode(f"gold record {record.id!r} has no code")
        gold_code = TaxCode.from_digits(kind, record.code)
        prediction = predictions[record.id]
        if not prediction.has_code:
            skipped += 1
            continue
        pairs.append(LabeledPair(TaxCode.from_digits(kind, prediction.code), gold_code, record.date))

    if skipped:
        logger.info(f"Skipped {skipped} prediction(s) without a code")
    return pairs, skipped

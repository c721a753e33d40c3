import logging
import sys

from app.commands.common import add_cleaning_args, make_cleaner
from app.schemas import CleanedRecord
from app.storage import read_dataset, write_jsonl


logger = logging.getLogger(__name__)


def add_parser(subparsers) -> None:
    parser = subparsers.add_parser("clean", help="clean product descriptions (JSON Lines in and out)")
    parser.add_argument("input", help="dataset JSONL with id and description fields, or - for stdin")
    add_cleaning_args(parser)
    parser.set_defaults(handler=run)


def run(args) -> int:
    cleaner = make_cleaner(args)
    records = read_dataset(args.input)

    output = []
    rejected = 0
    for record in records:
        cleaned = cleaner(record.description)
        rejected += cleaned.rejected
        output.append(CleanedRecord(
            id=record.id,
            text=cleaned.text,
            rejected=cleaned.rejected,
            reason=cleaned.rejection_reason,
        ))

    write_jsonl(sys.stdout, output, exclude_none=False)
    logger.info(f"Cleaned {len(output)} record(s), {rejected} rejected")
    return 0

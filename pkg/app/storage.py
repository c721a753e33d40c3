"""Reading and writing the JSON / JSON Lines files the commands exchange."""
from contextlib import contextmanager
from pathlib import Path
from typing import IO, Generator, Iterable, Iterator, List, Tuple, Type, TypeVar, Union
import json
import logging
import sys

from pydantic import BaseModel, TypeAdapter, ValidationError

from app.exceptions import MalformedRecord
from app.schemas import CatalogEntry, CleanConfig, DatasetRecord


logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)
PathLike = Union[str, Path]


# undecodable bytes survive as surrogates; iter_jsonl reports their line
JSONL_ERRORS = "surrogateescape"


@contextmanager
def open_text(path: PathLike, mode: str = "r", errors: str = "strict") -> Generator[IO[str], None, None]:
    """Open a UTF-8 text file; ``-`` means standard input/output."""
    if str(path) == "-":
        yield sys.stdin if "r" in mode else sys.stdout
        return
    handle = open(path, mode, encoding="utf-8", errors=errors, newline="" if "r" in mode else None)
    try:
        yield handle
    finally:
        handle.close()


def iter_jsonl(stream: IO[str], model: Type[ModelT]) -> Iterator[Tuple[int, ModelT]]:
    lines = iter(stream)
    line_no = 0
    while True:
        try:
            line = next(lines)
        except StopIteration:
            return
        except UnicodeDecodeError as exc:
            raise MalformedRecord(f"input is not valid UTF-8 ({exc.reason})", line=line_no + 1)
        line_no += 1
        if not line.strip():
            continue
        try:
            line.encode("utf-8")
        except UnicodeEncodeError:
            raise MalformedRecord("input is not valid UTF-8", line=line_no)
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON: {exc.msg}", line=line_no)
        if not isinstance(payload, dict):
            raise MalformedRecord("expected a JSON object", line=line_no)
        try:
            yield line_no, model.model_validate(payload)
        except ValidationError as exc:
            raise MalformedRecord(_summarize(exc), line=line_no)


def read_jsonl(path: PathLike, model: Type[ModelT]) -> List[ModelT]:
    with open_text(path, errors=JSONL_ERRORS) as stream:
        records = [record for _, record in iter_jsonl(stream, model)]
    logger.info(f"Read {len(records)} {model.__name__} record(s) from {path}")
    return records


def read_dataset(path: PathLike) -> List[DatasetRecord]:
    """Read dataset records and enforce id uniqueness within the file."""
    seen = {}
    records = []
    with open_text(path, errors=JSONL_ERRORS) as stream:
        for line_no, record in iter_jsonl(stream, DatasetRecord):
            if record.id in seen:
                raise MalformedRecord(
                    f"duplicate id {record.id!r} (first seen on line {seen[record.id]})",
                    line=line_no,
                )
            seen[record.id] = line_no
            records.append(record)
    logger.info(f"Read {len(records)} dataset record(s) from {path}")
    return records


def write_jsonl(stream: IO[str], records: Iterable[BaseModel], exclude_none: bool = True) -> int:
    count = 0
    for record in records:
        stream.write(dump_record(record, exclude_none))
        stream.write("\n")
        count += 1
    stream.flush()
    return count


def dump_record(record: BaseModel, exclude_none: bool = True) -> str:
    return json.dumps(record.model_dump(mode="json", exclude_none=exclude_none), ensure_ascii=False)


def load_clean_config(path: PathLike) -> CleanConfig:
    with open_text(path) as stream:
        try:
            return CleanConfig.model_validate(json.load(stream))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno)
        except ValidationError as exc:
            raise MalformedRecord(f"{path}: {_summarize(exc)}")


def load_catalog(path: PathLike) -> List[CatalogEntry]:
    with open_text(path) as stream:
        try:
            entries = TypeAdapter(List[CatalogEntry]).validate_python(json.load(stream))
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno)
        except ValidationError as exc:
            raise MalformedRecord(f"{path}: {_summarize(exc)}")
    logger.info(f"Loaded {len(entries)} catalog entr{'y' if len(entries) == 1 else 'ies'} from {path}")
    return entries


def _summarize(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error["loc"]) or "record"
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)

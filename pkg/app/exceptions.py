from typing import Optional


class TaxcodeError(Exception):
    exit_code = 1
    # set by batch commands to name the input record that failed
    record_id: Optional[str] = None

    def __init__(self, message: str = "", *, row: Optional[int] = None, line: Optional[int] = None):
        self.row = row
        self.line = line
        if row is not None:
            message = f"row {row}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def __str__(self) -> str:
        message = super().__str__()
        if self.record_id is not None:
            return f"record {self.record_id!r}: {message}"
        return message


class DataError(TaxcodeError):
    exit_code = 1


class UsageError(TaxcodeError):
    exit_code = 2


class ScorerError(TaxcodeError):
    exit_code = 3


# taxonomy

class MalformedRow(DataError):
    pass


class DuplicateLeaf(DataError):
    pass


class EmptyTaxonomy(DataError):
    pass


class UnknownPrefix(DataError):
    pass


class KindMismatch(DataError):
    pass


class InvalidCode(DataError):
    pass


# codec

class BadLevelOrder(DataError):
    pass


class MixedKind(DataError):
    pass


class UnknownToken(DataError):
    pass


class WrongLength(DataError):
    pass


# cleaning / decoding

class RejectedInput(DataError):
    pass


# scoring

class EmptyTrainingSet(DataError):
    pass


class MixedKinds(DataError):
    pass


class ScorerUnavailable(ScorerError):
    pass


class ProtocolError(ScorerError):
    pass


class ScorerTimeout(ScorerError):
    pass


# metrics

class EmptyInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MissingTimestamps(DataError):
    pass


# files

class MalformedRecord(DataError):
    pass


class IdMismatch(DataError):
    pass


class MissingGoldCode(DataError):
    pass

from dataclasses import dataclass
from typing import List, Sequence, Tuple
import enum
import re

from app.exceptions import InvalidCode


SEGMENT_PATTERN = re.compile(r"^[0-9]{2}$")


class CodeKind(str, enum.Enum):
    HSN = "HSN"
    SAC = "SAC"

    @property
    def depth(self) -> int:
        return 4 if self is CodeKind.HSN else 3

    @property
    def digit_count(self) -> int:
        return 2 * self.depth

    @property
    def prefix(self) -> str:
        return self.value.lower()

    @property
    def levels(self) -> Tuple["Level", ...]:
        return LEVEL_ORDER[: self.depth]


class Level(str, enum.Enum):
    chapter = "chapter"
    heading = "heading"
    sub_heading = "sub_heading"
    product_tariff = "product_tariff"

    @property
    def tag(self) -> str:
        return LEVEL_TAGS[self]

    @property
    def position(self) -> int:
        return LEVEL_ORDER.index(self)

    @classmethod
    def from_tag(cls, tag: str) -> "Level":
        for level, level_tag in LEVEL_TAGS.items():
            if level_tag == tag:
                return level
        raise ValueError(f"unknown level tag {tag!r}")


LEVEL_ORDER: Tuple[Level, ...] = (
    Level.chapter,
    Level.heading,
    Level.sub_heading,
    Level.product_tariff,
)

LEVEL_TAGS = {
    Level.chapter: "ch",
    Level.heading: "h",
    Level.sub_heading: "sh",
    Level.product_tariff: "pt",
}


class RejectionReason(str, enum.Enum):
    Incomplete = "Incomplete"
    Empty = "Empty"


class KappaAgreement(str, enum.Enum):
    perfect = "perfect"
    better_than_chance = "better_than_chance"
    chance = "chance"
    systematic_disagreement = "systematic_disagreement"


@dataclass(frozen=True)
class Segment:
    value: str
    level: Level

    def __post_init__(self):
        if not isinstance(self.value, str) or not SEGMENT_PATTERN.match(self.value):
            raise InvalidCode(f"segment value must be two digits, got {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class TaxCode:
    kind: CodeKind
    segments: Tuple[Segment, ...]

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if len(self.segments) != self.kind.depth:
            raise InvalidCode(
                f"{self.kind.value} code needs {self.kind.depth} segments, got {len(self.segments)}"
            )
        for position, segment in enumerate(self.segments):
            if segment.level is not LEVEL_ORDER[position]:
                raise InvalidCode(
                    f"segment {position} has level {segment.level.value}, "
                    f"expected {LEVEL_ORDER[position].value}"
                )

    @classmethod
    def from_digits(cls, kind: CodeKind, digits: str) -> "TaxCode":
        if not isinstance(digits, str) or len(digits) != kind.digit_count or not digits.isascii() or not digits.isdigit():
            raise InvalidCode(
                f"{kind.value} code must be {kind.digit_count} ASCII digits, got {digits!r}"
            )
        return cls(kind, segments_from_digits(digits))

    @property
    def digits(self) -> str:
        return "".join(segment.value for segment in self.segments)

    @property
    def chapter(self) -> Segment:
        return self.segments[0]

    def prefix(self, length: int) -> Tuple[Segment, ...]:
        return self.segments[:length]

    def __str__(self) -> str:
        return self.digits


def segments_from_digits(digits: str) -> Tuple[Segment, ...]:
    if len(digits) % 2:
        raise InvalidCode(f"digit string {digits!r} has odd length")
    pairs = [digits[i:i + 2] for i in range(0, len(digits), 2)]
    if len(pairs) > len(LEVEL_ORDER):
        raise InvalidCode(f"digit string {digits!r} is longer than any code")
    return tuple(Segment(value, LEVEL_ORDER[i]) for i, value in enumerate(pairs))


def prefix_digits(prefix: Sequence[Segment]) -> str:
    return "".join(segment.value for segment in prefix)


def segment_values(prefix: Sequence[Segment]) -> List[str]:
    return [segment.value for segment in prefix]

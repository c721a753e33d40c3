from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Dict, List, Optional
import datetime as dt
import math
import re

from app.models import CodeKind, KappaAgreement, Level, RejectionReason


DEFAULT_NOISE_PATTERNS = [
    # letters and digits in one token: serial numbers, batch ids
    r"(?i)^(?=\S*[a-z])(?=\S*[0-9])\S+$",
    # punctuation only
    r"^[\W_]+$",
    r"^[0-9]{5,}$",
]


class CleanConfig(BaseModel):
    noise_patterns: List[str] = Field(default_factory=lambda: list(DEFAULT_NOISE_PATTERNS))
    variant_map: Dict[str, List[str]] = Field(default_factory=dict)
    brand_set: List[str] = Field(default_factory=list, alias="brands")
    min_informative_tokens: int = Field(2, ge=1)
    abbreviations: Dict[str, str] = Field(default_factory=dict)

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @field_validator("noise_patterns")
    @classmethod
    def validate_patterns(cls, v):
        for pattern in v:
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ValueError(f"bad noise pattern {pattern!r}: {exc}")
        return v

    @field_validator("variant_map")
    @classmethod
    def validate_variants(cls, v):
        seen = set()
        for canonical, variants in v.items():
            if not variants:
                raise ValueError(f"variant list for {canonical!r} is empty")
            for variant in variants:
                key = variant.lower()
                if key in seen:
                    raise ValueError(f"variant {variant!r} appears more than once")
                seen.add(key)
        canonicals = {canonical.lower() for canonical in v}
        clash = canonicals & seen
        if clash:
            raise ValueError(f"canonical forms also listed as variants: {sorted(clash)}")
        return v

    @model_validator(mode="after")
    def validate_abbreviations(self):
        keys = {key.lower() for key in self.abbreviations}
        for key, full_form in self.abbreviations.items():
            if keys & set(full_form.lower().split()):
                raise ValueError(f"expansion of {key!r} contains an abbreviation")
        return self


class CatalogEntry(BaseModel):
    canonical_description: str = Field(..., min_length=1, alias="description")
    category_tags: List[str] = Field(default_factory=list, alias="tags")

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @field_validator("canonical_description")
    @classmethod
    def validate_description(cls, v):
        if not v.strip():
            raise ValueError("description is blank")
        return v


class DatasetRecord(BaseModel):
    id: str = Field(..., min_length=1)
    description: str = ""
    code: Optional[str] = None
    date: Optional[dt.date] = None
    rater: Optional[str] = None

    @field_validator("id", mode="before")
    @classmethod
    def coerce_id(cls, v):
        if isinstance(v, int) and not isinstance(v, bool):
            return str(v)
        return v

    @field_validator("code")
    @classmethod
    def validate_code(cls, v):
        if v is not None and not (v.isascii() and v.isdigit()):
            raise ValueError(f"code must be ASCII digits, got {v!r}")
        return v


class TableRow(BaseModel):
    prefix: List[str] = Field(default_factory=list)
    candidate: str
    weight: float

    @field_validator("prefix")
    @classmethod
    def validate_prefix(cls, v):
        for value in v:
            if not re.fullmatch(r"[0-9]{2}", value):
                raise ValueError(f"prefix segment must be two digits, got {value!r}")
        return v

    @field_validator("candidate")
    @classmethod
    def validate_candidate(cls, v):
        if not re.fullmatch(r"[0-9]{2}", v):
            raise ValueError(f"candidate must be two digits, got {v!r}")
        return v

    @field_validator("weight")
    @classmethod
    def validate_weight(cls, v):
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"weight must be finite and non-negative, got {v!r}")
        return v


class CleanedRecord(BaseModel):
    id: str
    text: str
    rejected: bool
    reason: Optional[RejectionReason] = None


class TraceEntry(BaseModel):
    level: Level
    segment: str
    candidates: int
    probability: float


class Alternative(BaseModel):
    code: str
    probability: float


class PredictionRecord(BaseModel):
    id: str
    code: Optional[str] = None
    probability: Optional[float] = None
    description: Optional[str] = None
    trace: Optional[List[TraceEntry]] = None
    fallbacks: Optional[int] = None
    alternatives: Optional[List[Alternative]] = None
    rejected: Optional[bool] = None
    reason: Optional[RejectionReason] = None
    error: Optional[str] = None

    @property
    def has_code(self) -> bool:
        return self.code is not None and not self.rejected and self.error is None


class MonthlyKappa(BaseModel):
    month: str
    kappa: Optional[float] = None
    count: int
    degenerate: bool = False


class EvalReport(BaseModel):
    kind: CodeKind
    count: int
    skipped: int = 0
    macro_precision: float
    macro_recall: float
    macro_f1: float
    exact_match: float
    per_level_accuracy: List[float]
    kappa: float
    kappa_interpretation: Optional[KappaAgreement] = None
    chapter_kappa: float
    kappa_by_month: Optional[List[MonthlyKappa]] = None

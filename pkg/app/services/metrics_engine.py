from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Sequence, Tuple
import datetime as dt
import logging
import math

import numpy as np

from app.exceptions import EmptyInput, LengthMismatch, MissingTimestamps, MixedKinds
from app.models import KappaAgreement, TaxCode
from app.schemas import EvalReport, MonthlyKappa


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledPair:
    predicted: TaxCode
    gold: TaxCode
    timestamp: Optional[dt.date] = None

    def __post_init__(self):
        if self.predicted.kind is not self.gold.kind:
            raise MixedKinds(
                f"predicted {self.predicted.kind.value} code paired with gold {self.gold.kind.value} code"
            )


class MetricsEngine:
    @staticmethod
    def precision_recall_f1(pairs: Sequence[LabeledPair]) -> Tuple[float, float, float, float]:
        """Macro precision, recall and F1 over gold classes, plus exact-match rate.

        F1 is averaged per class, not recomputed from the macro precision and
        recall.
        """
        if not pairs:
            raise EmptyInput("precision/recall needs at least one pair")
        gold_counts = Counter(pair.gold.digits for pair in pairs)
        predicted_counts = Counter(pair.predicted.digits for pair in pairs)
        hits = Counter(pair.gold.digits for pair in pairs if pair.gold == pair.predicted)

        precisions, recalls, f1s = [], [], []
        for label in sorted(gold_counts):
            tp = hits[label]
            precision = tp / predicted_counts[label] if predicted_counts[label] else 0.0
            recall = tp / gold_counts[label] if gold_counts[label] else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            precisions.append(precision)
            recalls.append(recall)
            f1s.append(f1)

        exact_match = sum(hits.values()) / len(pairs)
        return (
            math.fsum(precisions) / len(precisions),
            math.fsum(recalls) / len(recalls),
            math.fsum(f1s) / len(f1s),
            exact_match,
        )

    @staticmethod
    def per_level_accuracy(pairs: Sequence[LabeledPair]) -> List[float]:
        if not pairs:
            raise EmptyInput("per-level accuracy needs at least one pair")
        kinds = {pair.gold.kind for pair in pairs}
        if len(kinds) > 1:
            raise MixedKinds(f"pairs mix kinds: {sorted(kind.value for kind in kinds)}")
        depth = pairs[0].gold.kind.depth
        matches = [0] * depth
        for pair in pairs:
            for level in range(depth):
                if pair.predicted.segments[level].value != pair.gold.segments[level].value:
                    break
                matches[level] += 1
        return [count / len(pairs) for count in matches]

    @staticmethod
    def cohens_kappa(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
        """Cohen's kappa between two label sequences.

        When both raters put every item in one shared category (expected agreement
        of 1) the observed agreement is 1 too, and kappa is reported as 1.0.
        """
        if len(a) != len(b):
            raise LengthMismatch(f"rater sequences differ in length ({len(a)} vs {len(b)})")
        if not a:
            raise EmptyInput("kappa needs at least one rated item")

        index: Dict[Hashable, int] = {}
        for label in list(a) + list(b):
            index.setdefault(label, len(index))
        rows = np.fromiter((index[label] for label in a), dtype=np.int64, count=len(a))
        cols = np.fromiter((index[label] for label in b), dtype=np.int64, count=len(b))
        size = len(index)
        confusion = np.bincount(rows * size + cols, minlength=size * size).reshape(size, size)

        total = float(len(a))
        observed = np.trace(confusion) / total
        expected = float(np.dot(confusion.sum(axis=1) / total, confusion.sum(axis=0) / total))
        if expected >= 1.0:
            return 1.0 if observed >= 1.0 else math.nan
        return float((observed - expected) / (1.0 - expected))

    @staticmethod
    def interpret_kappa(kappa: float) -> Optional[KappaAgreement]:
        if math.isnan(kappa):
            return None
        if kappa >= 1.0:
            return KappaAgreement.perfect
        if kappa > 0:
            return KappaAgreement.better_than_chance
        if kappa == 0:
            return KappaAgreement.chance
        return KappaAgreement.systematic_disagreement

    @staticmethod
    def kappa_over_time(pairs: Sequence[LabeledPair]) -> List[MonthlyKappa]:
        """Kappa per calendar month, months ascending.

        A month whose gold labels hold fewer than two distinct codes is flagged
        degenerate and carries no kappa.
        """
        if any(pair.timestamp is None for pair in pairs):
            raise MissingTimestamps("every pair needs a date to bucket kappa by month")
        groups: Dict[str, List[LabeledPair]] = defaultdict(list)
        for pair in pairs:
            groups[_month(pair.timestamp)].append(pair)

        series = []
        for month in sorted(groups):
            group = groups[month]
            gold = [pair.gold.digits for pair in group]
            if len(set(gold)) < 2:
                series.append(MonthlyKappa(month=month, count=len(group), degenerate=True))
                continue
            predicted = [pair.predicted.digits for pair in group]
            kappa = MetricsEngine.cohens_kappa(predicted, gold)
            series.append(MonthlyKappa(month=month, kappa=kappa, count=len(group)))
        return series

    @staticmethod
    def evaluate(pairs: Sequence[LabeledPair], skipped: int = 0) -> EvalReport:
        precision, recall, f1, exact_match = MetricsEngine.precision_recall_f1(pairs)
        levels = MetricsEngine.per_level_accuracy(pairs)
        predicted = [pair.predicted.digits for pair in pairs]
        gold = [pair.gold.digits for pair in pairs]
        kappa = MetricsEngine.cohens_kappa(predicted, gold)
        chapter_kappa = MetricsEngine.cohens_kappa(
            [pair.predicted.chapter.value for pair in pairs],
            [pair.gold.chapter.value for pair in pairs],
        )
        by_month = None
        if all(pair.timestamp is not None for pair in pairs):
            by_month = MetricsEngine.kappa_over_time(pairs)

        logger.info(f"Evaluated {len(pairs)} pair(s): exact match {exact_match:.4f}, kappa {kappa:.4f}")
        return EvalReport(
            kind=pairs[0].gold.kind,
            count=len(pairs),
            skipped=skipped,
            macro_precision=precision,
            macro_recall=recall,
            macro_f1=f1,
            exact_match=exact_match,
            per_level_accuracy=levels,
            kappa=kappa,
            kappa_interpretation=MetricsEngine.interpret_kappa(kappa),
            chapter_kappa=chapter_kappa,
            kappa_by_month=by_month,
        )

    @staticmethod
    def render_table(report: EvalReport) -> str:
        rows = [
            ("pairs", str(report.count)),
            ("skipped", str(report.skipped)),
            ("macro precision", _fmt(report.macro_precision)),
            ("macro recall", _fmt(report.macro_recall)),
            ("macro F1", _fmt(report.macro_f1)),
            ("exact match", _fmt(report.exact_match)),
        ]
        for level, accuracy in zip(report.kind.levels, report.per_level_accuracy):
            rows.append((f"accuracy@{level.value}", _fmt(accuracy)))
        rows.append(("kappa", _fmt(report.kappa)))
        if report.kappa_interpretation is not None:
            rows.append(("agreement", report.kappa_interpretation.value))
        rows.append(("chapter kappa", _fmt(report.chapter_kappa)))
        for entry in report.kappa_by_month or []:
            value = "degenerate" if entry.degenerate else _fmt(entry.kappa)
            rows.append((f"kappa {entry.month}", f"{value} (n={entry.count})"))
        return _align(rows)

    @staticmethod
    def compare_runs(reports: Sequence[Tuple[str, EvalReport]]) -> str:
        """Metric rows against one column per run."""
        header = ("metric",) + tuple(name for name, _ in reports)
        fields = [
            ("precision", "macro_precision"),
            ("recall", "macro_recall"),
            ("F1", "macro_f1"),
            ("exact match", "exact_match"),
            ("kappa", "kappa"),
            ("chapter kappa", "chapter_kappa"),
        ]
        rows = [header]
        for label, attribute in fields:
            rows.append((label,) + tuple(_fmt(getattr(report, attribute)) for _, report in reports))
        return _align(rows)


def _month(day: dt.date) -> str:
    if isinstance(day, dt.datetime):
        if day.tzinfo is not None:
            day = day.astimezone(dt.timezone.utc)
        day = day.date()
    return f"{day.year:04d}-{day.month:02d}"


def _fmt(value: Optional[float]) -> str:
    if value is None or math.isnan(value):
        return "undefined"
    return f"{value:.4f}"


def _align(rows: Sequence[Tuple[str, ...]]) -> str:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for row in rows:
        cells = [row[0].ljust(widths[0])] + [cell.rjust(widths[i]) for i, cell in enumerate(row) if i]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"

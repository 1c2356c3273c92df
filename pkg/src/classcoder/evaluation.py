"""Agreement between a coding run and gold labels.

Per-code confusion matrices over multi-label turn sets, the four derived
metrics (precision, recall, accuracy, F1), turn-level precision under
exact or overlap matching, and ranked confusion pairs for error analysis.
A metric with a zero denominator is UNDEFINED (None), rendered "-", and
never coerced to 0.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

from .codebook import Codebook, builtin_cdas
from .coder import CodingRun
from .errors import EvaluationError
from .transcript import GoldAnnotationSet

MATCH_MODES = ("exact", "overlap")


@dataclass(frozen=True)
class ConfusionMatrix:
    code_id: str
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricRow:
    code_id: str
    precision: float | None
    recall: float | None
    accuracy: float | None
    f1: float | None


@dataclass(frozen=True)
class MetricsReport:
    per_code: tuple[MetricRow, ...]
    turn_precision: float
    match_mode: str
    turn_count: int


def _paired(gold: GoldAnnotationSet, run: CodingRun) -> list[tuple[frozenset, frozenset]]:
    if run.status != "complete":
        raise EvaluationError(f"run {run.run_id} is {run.status}, not complete")
    if run.lesson_id != gold.lesson_id:
        raise EvaluationError(
            f"run covers lesson {run.lesson_id!r} but gold covers {gold.lesson_id!r}"
        )
    pairs = []
    for coding in run.codings:
        labels = gold.labels.get(coding.turn_id)
        if labels is None:
            raise EvaluationError(f"gold has no labels for turn {coding.turn_id}")
        pairs.append((labels, coding.predicted))
    return pairs


def build_confusion(gold: GoldAnnotationSet, run: CodingRun, code_id: str) -> ConfusionMatrix:
    """Count the four per-turn outcomes for one code across the run."""
    tp = fp = fn = tn = 0
    for gold_set, predicted in _paired(gold, run):
        in_gold = code_id in gold_set
        in_predicted = code_id in predicted
        if in_gold and in_predicted:
            tp += 1
        elif in_predicted:
            fp += 1
        elif in_gold:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(code_id=code_id, tp=tp, fp=fp, fn=fn, tn=tn)


def _ratio(numerator: int, denominator: int) -> float | None:
    return None if denominator == 0 else numerator / denominator


def metrics(matrix: ConfusionMatrix) -> MetricRow:
    return MetricRow(
        code_id=matrix.code_id,
        precision=_ratio(matrix.tp, matrix.tp + matrix.fp),
        recall=_ratio(matrix.tp, matrix.tp + matrix.fn),
        accuracy=_ratio(matrix.tp + matrix.tn, matrix.total),
        f1=_ratio(2 * matrix.tp, 2 * matrix.tp + matrix.fp + matrix.fn),
    )


def harmonic_f1(precision: float, recall: float) -> float:
    """F1 from a precision/recall pair; equals the count form when tp > 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def turn_precision(gold: GoldAnnotationSet, run: CodingRun, mode: str = "exact") -> float:
    """Matched turns over total turns; exact set equality or any overlap."""
    if mode not in MATCH_MODES:
        raise EvaluationError(f"unknown match mode {mode!r}")
    pairs = _paired(gold, run)
    if mode == "exact":
        matched = sum(1 for g, p in pairs if g == p)
    else:
        matched = sum(1 for g, p in pairs if g & p)
    return matched / len(pairs)


def confusion_pairs(gold: GoldAnnotationSet, run: CodingRun) -> list[tuple[str, str, int]]:
    """(gold_code, predicted_code, count) for asymmetric differences,
    sorted by descending count, then code-id order."""
    counts: Counter[tuple[str, str]] = Counter()
    for gold_set, predicted in _paired(gold, run):
        for g in gold_set - predicted:
            for p in predicted - gold_set:
                counts[(g, p)] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [(g, p, n) for (g, p), n in ranked]


def evaluate_run(
    gold: GoldAnnotationSet,
    run: CodingRun,
    mode: str = "exact",
    codebook: Codebook | None = None,
) -> MetricsReport:
    """One metric row per codebook code, in codebook order, plus turn precision."""
    codebook = codebook or builtin_cdas()
    rows = tuple(
        metrics(build_confusion(gold, run, code_id)) for code_id in codebook.ids
    )
    return MetricsReport(
        per_code=rows,
        turn_precision=turn_precision(gold, run, mode),
        match_mode=mode,
        turn_count=len(run.codings),
    )


# ---------------------------------------------------------------------------
# Export formats


def _percent(value: float | None) -> str:
    return "-" if value is None else f"{100 * value:.1f}%"


def _score(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def render_text_table(report: MetricsReport) -> str:
    header = ("Code", "Precision", "Recall", "Accuracy", "F1 Score")
    rows = [
        (row.code_id, _percent(row.precision), _percent(row.recall),
         _percent(row.accuracy), _score(row.f1))
        for row in report.per_code
    ]
    widths = [max(len(cell) for cell in column) for column in zip(header, *rows)]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
             for line in [header, *rows]]
    lines.append("")
    lines.append(f"Turn precision ({report.match_mode}): {_percent(report.turn_precision)}")
    lines.append(f"Turns evaluated: {report.turn_count}")
    return "\n".join(lines) + "\n"


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "match_mode": report.match_mode,
        "turn_count": report.turn_count,
        "turn_precision": report.turn_precision,
        "per_code": [
            {
                "code": row.code_id,
                "precision": row.precision,
                "recall": row.recall,
                "accuracy": row.accuracy,
                "f1": row.f1,
            }
            for row in report.per_code
        ],
    }


def render_json(report: MetricsReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def render_csv(report: MetricsReport) -> str:
    def cell(value: float | None) -> str:
        return "-" if value is None else str(value)

    lines = ["code,precision,recall,accuracy,f1"]
    for row in report.per_code:
        lines.append(
            ",".join((row.code_id, cell(row.precision), cell(row.recall),
                      cell(row.accuracy), cell(row.f1)))
        )
    return "\n".join(lines) + "\n"

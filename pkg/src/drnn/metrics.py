"""Confusion counting and sensitivity / specificity / average detection rate."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class UndefinedScoreError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    true_pos: int
    false_neg: int
    true_neg: int
    false_pos: int

    def __post_init__(self):
        for name in ("true_pos", "false_neg", "true_neg", "false_pos"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.true_pos + self.false_neg + self.true_neg + self.false_pos

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.true_pos + other.true_pos, self.false_neg + other.false_neg,
                               self.true_neg + other.true_neg, self.false_pos + other.false_pos)


@dataclass(frozen=True)
class DetectionScores:
    """Exact rational scores; use ``float()`` on the fields for display."""

    sen: Fraction
    spc: Fraction
    adr: Fraction


def _binarize(values, threshold: float) -> np.ndarray:
    values = np.asarray(values)
    if values.dtype == bool:
        return values
    return values.astype(float) >= threshold


def confusion(predictions, labels, threshold: float = 0.0) -> ConfusionCounts:
    """Tally predictions against labels.

    A value counts as positive when it is >= ``threshold`` (ties are
    positive).  Labels go through the same rule unless they are booleans, so
    {-1, +1} labels pair with threshold 0 and {0, 1} labels with 0.5.
    """
    pred = _binarize(predictions, threshold).reshape(-1)
    lab = _binarize(labels, threshold).reshape(-1)
    if pred.shape != lab.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predictions, {lab.shape[0]} labels")
    return ConfusionCounts(
        true_pos=int(np.sum(pred & lab)),
        false_neg=int(np.sum(~pred & lab)),
        true_neg=int(np.sum(~pred & ~lab)),
        false_pos=int(np.sum(pred & ~lab)),
    )


def scores(c: ConfusionCounts) -> DetectionScores:
    if c.true_pos + c.false_neg == 0:
        raise UndefinedScoreError("sensitivity undefined: no positive labels")
    if c.true_neg + c.false_pos == 0:
        raise UndefinedScoreError("specificity undefined: no negative labels")
    sen = Fraction(c.true_pos, c.true_pos + c.false_neg)
    spc = Fraction(c.true_neg, c.true_neg + c.false_pos)
    return DetectionScores(sen=sen, spc=spc, adr=(sen + spc) / 2)


REPORT_HEADER = ["experiment", "Y+", "N-", "N+", "Y-", "SEN", "SPC", "ADR"]


def write_report(rows, path) -> None:
    """``rows`` is an iterable of (experiment name, ConfusionCounts)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for name, c in rows:
            s = scores(c)
            writer.writerow([name, c.true_pos, c.false_neg, c.true_neg, c.false_pos,
                             f"{float(s.sen):.6f}", f"{float(s.spc):.6f}", f"{float(s.adr):.6f}"])


def read_counts(path) -> list[tuple[str, ConfusionCounts]]:
    """Read ``experiment,Y+,N-,N+,Y-[,...]`` rows (extra columns ignored)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"Y+", "N-", "N+", "Y-"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"counts file lacks columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                counts = ConfusionCounts(int(row["Y+"]), int(row["N-"]),
                                         int(row["N+"]), int(row["Y-"]))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"line {line_no}: {exc}") from exc
            rows.append((row.get("experiment") or str(line_no - 1), counts))
    return rows

"""Per-day simulation output and the carry arithmetic shared by both simulators."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

UNLIMITED = math.inf


def cumulative_capacity(rate: float, day: int) -> float:
    """Whole units available through ``day`` at a real-valued daily ``rate``.

    Fractional capacity carries over from day to day, so the integer total
    through any day is exactly ``floor(rate * day)``.
    """
    if day <= 0:
        return 0
    if math.isinf(rate):
        return UNLIMITED
    return math.floor(rate * day)


def daily_capacity(rate: float, day: int) -> float:
    """Whole units usable on ``day`` (1-based) under carry arithmetic."""
    if math.isinf(rate):
        return UNLIMITED
    return cumulative_capacity(rate, day) - cumulative_capacity(rate, day - 1)


class Carry:
    """Running carry for rates that change from day to day."""

    def __init__(self) -> None:
        self.total = 0.0
        self.issued = 0

    def take(self, amount: float) -> int:
        self.total += amount
        n = math.floor(self.total) - self.issued
        self.issued += n
        return n


@dataclass
class SimTimeSeries:
    """Column-oriented simulation output.

    ``csv_columns`` fixes the column order written by :meth:`to_csv`; other
    entries in ``data`` are kept for analysis but not exported.
    """

    data: dict[str, np.ndarray]
    csv_columns: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(next(iter(self.data.values()))) if self.data else 0

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def rows(self):
        cols = [self.data[c] for c in self.csv_columns]
        for i in range(len(self)):
            yield tuple(_plain(col[i]) for col in cols)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.csv_columns)
        writer.writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _plain(value):
    if isinstance(value, (np.floating, float)):
        return f"{float(value):.6f}"
    if isinstance(value, np.integer):
        return int(value)
    return value

"""Closed-form replication estimates.

These are the calculator functions behind ``piggyback calc`` and the oracles
the simulators are tested against. News quantities come in two flavours:
the real-valued cycle lengths ``W_k`` (:func:`cycle_durations`) and an
integer cycle model (:func:`tr_news_analytic`) that counts posts with the
same carry arithmetic as the simulator, so the two agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .core import RepositoryProfile, ValidationError
from .mail import EmailTrafficModel, q_email
from .series import daily_capacity


@dataclass(frozen=True)
class NewsAnalyticInputs:
    """Parameters of the news cycle model.

    ``sleep`` is ``0`` for continuous baselines and ``math.inf`` for a
    single baseline. ``copies_target`` baselines are sent back to back
    before each sleep.
    """

    profile: RepositoryProfile
    q_news: float
    sleep: float
    n_ttl: int
    horizon: int = 0
    copies_target: int = 1
    updates_during_sleep: bool = True

    def __post_init__(self):
        if not self.q_news > 0:
            raise ValidationError("q_news", "must be > 0")
        if self.sleep < 0:
            raise ValidationError("sleep", "must be >= 0")
        if self.n_ttl < 1:
            raise ValidationError("n_ttl", "must be >= 1")
        if self.horizon < 0:
            raise ValidationError("horizon", "must be >= 0")

    @property
    def change_rate(self) -> int:
        return self.profile.adds_per_day + self.profile.updates_per_day


class CycleDurations(NamedTuple):
    durations: list[float]
    max_k: int


def cycle_durations(inputs: NewsAnalyticInputs, horizon: int | None = None) -> CycleDurations:
    """``W_1 = R / q + S`` and ``W_k = (1 + (R_a + R_u) / q) * W_(k-1)``.

    Only whole cycles that end by ``horizon`` are returned; ``max_k`` is
    their count. A single baseline (infinite sleep) has at most one cycle,
    the baseline itself.
    """
    horizon = inputs.horizon if horizon is None else horizon
    p, q = inputs.profile, inputs.q_news
    if math.isinf(inputs.sleep):
        w1 = p.record_count / q
        return CycleDurations([w1], 1) if w1 <= horizon else CycleDurations([], 0)
    w = p.record_count / q + inputs.sleep
    ratio = 1 + inputs.change_rate / q
    out: list[float] = []
    total = 0.0
    while w > 0 and total + w <= horizon:
        out.append(w)
        total += w
        w *= ratio
    if w == 0:
        # empty static repository with no sleep: cycles take no time at all
        raise ValidationError("record_count", "zero-length cycles have no well-defined count")
    return CycleDurations(out, len(out))


class _CycleModel:
    """Post counts day by day, tracking only queue lengths.

    A baseline started on day ``d`` snapshots the ``R + (d - 1) * R_a``
    records that existed the evening before (``R + d * R_a`` if it follows
    another baseline within the day) and queues behind whatever is still
    waiting. Each day's changes queue behind it (not while asleep
    unless ``updates_during_sleep``) and up to ``floor(q * d) - floor(q * (d - 1))``
    queued posts go out.
    """

    def __init__(self, inputs: NewsAnalyticInputs):
        self.x = inputs

    @cached_property
    def trajectory(self) -> tuple[np.ndarray, list[int]]:
        return self._run(self.x.horizon)

    def _run(self, horizon: int) -> tuple[np.ndarray, list[int]]:
        x, p = self.x, self.x.profile
        sleep = x.sleep
        tr = np.zeros(horizon + 1, dtype=np.int64)
        completions: list[int] = []
        queue = 0
        marker = None
        start = True
        asleep = False
        sleep_left = 0
        in_wake = 0
        for d in range(1, horizon + 1):
            if start:
                queue += p.record_count + (d - 1) * p.adds_per_day
                marker = queue
                start = False
            if not asleep or x.updates_during_sleep:
                queue += x.change_rate
            cap = daily_capacity(x.q_news, d)
            posted = 0
            done = False
            while True:
                if marker is not None and cap >= marker:
                    queue -= marker
                    cap -= marker
                    posted += marker
                    marker = None
                    done = True
                    completions.append(d)
                    in_wake += 1
                    if sleep == 0 or in_wake < x.copies_target:
                        start = True
                    elif not math.isinf(sleep):
                        asleep = True
                        sleep_left = int(sleep)
                        in_wake = 0
                    current = p.record_count + d * p.adds_per_day
                    if start and 0 < cap < math.inf and current > 0:
                        queue += current
                        marker = queue
                        start = False
                        continue
                elif marker is not None:
                    marker -= cap
                break
            take = min(cap, queue)
            queue -= take
            tr[d] = tr[d - 1] + posted + take
            if not done and asleep:
                sleep_left -= 1
                if sleep_left <= 0:
                    asleep = False
                    start = True
        return tr, completions


def tr_news_analytic(inputs: NewsAnalyticInputs, day: int) -> int:
    """Cumulative posts through ``day`` under the integer cycle model."""
    if day < 0:
        raise ValueError("day must be >= 0")
    if day > inputs.horizon:
        tr, _ = _CycleModel(inputs)._run(day)
        return int(tr[day])
    return int(_CycleModel(inputs).trajectory[0][day])


def tr_news_series(inputs: NewsAnalyticInputs) -> np.ndarray:
    """``TR_news(d)`` for ``d = 0 .. horizon``."""
    return _CycleModel(inputs).trajectory[0].copy()


def baseline_completion_days(inputs: NewsAnalyticInputs) -> list[int]:
    return list(_CycleModel(inputs).trajectory[1])


def records_on_server_analytic(inputs: NewsAnalyticInputs, day: int) -> int:
    """``TR_news(D) - TR_news(D - N_ttl)``, with days before 0 counting as 0."""
    if day < 0:
        raise ValueError("day must be >= 0")
    tr, _ = _CycleModel(inputs)._run(max(day, inputs.horizon))
    return int(tr[day] - tr[max(day - inputs.n_ttl, 0)])


class Probability(NamedTuple):
    """``value`` is clamped to [0, 1]; ``raw`` is what the formula gave."""

    value: float
    raw: float
    clamped: bool


def _probability(raw: float) -> Probability:
    value = min(max(raw, 0.0), 1.0)
    return Probability(value, raw, value != raw)


def p_replicated_news(q_news: float, day: int, n_ttl: int, record_count: int, adds_per_day: int) -> Probability:
    """Share of the repository still on the server: ``q * min(D, N_ttl) / (R + D * R_a)``."""
    denom = record_count + day * adds_per_day
    if denom <= 0:
        raise ValidationError("record_count", "repository is empty on that day")
    raw = (q_news * day - q_news * max(day - n_ttl, 0)) / denom
    return _probability(raw)


def p_replicated_email(q: float, day: int, record_count: int, adds_per_day: int) -> Probability:
    """Share received by a domain with a history pointer: ``q * D / (R + D * R_a)``."""
    denom = record_count + day * adds_per_day
    if denom <= 0:
        raise ValidationError("record_count", "repository is empty on that day")
    return _probability(q * day / denom)


class EmailTotals(NamedTuple):
    attached: float
    unique: float


def tr_email_analytic(
    model: EmailTrafficModel, rank: int, day: int, with_history: bool, profile: RepositoryProfile
) -> EmailTotals:
    """Records sent to ``rank`` through ``day``: ``sum_d q_email * h(d)``.

    ``attached`` is that sum as written, with ``h = 1`` when a history
    pointer is kept. ``unique`` reads it as distinct records received, which
    with a pointer can never exceed the repository size on the last day.
    """
    if day < 0:
        raise ValueError("day must be >= 0")
    q = q_email(model, rank)
    if with_history:
        total = q * day
        pool = profile.record_count + day * profile.adds_per_day
        return EmailTotals(total, min(total, pool))
    total = 0.0
    h = 1.0
    growth = profile.adds_per_day + profile.updates_per_day
    for d in range(1, day + 1):
        if d > 1:
            pool = profile.record_count + growth * d
            h = 0.0 if q >= pool else h * (pool - q) / pool
        total += q * h
    return EmailTotals(total, total)


def expected_coverage_no_history(
    profile: RepositoryProfile, daily_slots: list[int] | np.ndarray
) -> np.ndarray:
    """Expected coverage per day when attachments are drawn without a history.

    ``daily_slots[d - 1]`` records go out on day ``d``, distinct within the
    day and drawn uniformly from that day's ``R + d * R_a`` records. A
    record created on day ``t`` is still missing on day ``D`` with
    probability ``prod_{d=max(t,1)..D} (1 - n_d / pool_d)``.
    """
    slots = np.asarray(daily_slots, dtype=np.float64)
    days = len(slots)
    pools = profile.record_count + profile.adds_per_day * np.arange(1, days + 1, dtype=np.float64)
    keep = np.clip(1 - slots / pools, 0.0, 1.0)
    out = np.zeros(days)
    # missing[t] = expected missing among records born on day t (0 = initial corpus)
    missing = np.zeros(days + 1)
    missing[0] = profile.record_count
    for d in range(1, days + 1):
        missing[d] = profile.adds_per_day
        missing[: d + 1] *= keep[d - 1]
        out[d - 1] = 1 - missing[: d + 1].sum() / pools[d - 1]
    return out


class PowerLawFit(NamedTuple):
    c: float
    b: float
    residual: float


def power_law_fit(points) -> PowerLawFit:
    """Least-squares fit of ``log V = log c - b * log rank`` over ``(rank, volume)`` pairs."""
    arr = np.asarray(list(points), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise ValueError("need at least 3 (rank, volume) points")
    ranks, vols = arr[:, 0], arr[:, 1]
    if np.any(vols <= 0) or np.any(ranks <= 0):
        raise ValueError("ranks and volumes must be > 0")
    design = np.column_stack([np.ones(len(arr)), -np.log(ranks)])
    coef, res, *_ = np.linalg.lstsq(design, np.log(vols), rcond=None)
    residual = float(res[0]) if len(res) else 0.0
    return PowerLawFit(float(np.exp(coef[0])), float(coef[1]), residual)

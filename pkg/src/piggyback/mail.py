"""Passive replication piggybacked on outbound email.

Outbound mail volume per receiving domain follows a power law in the
domain's rank, ``c * rank**-b`` emails a day, with ``c = V / zeta(b)`` for a
total daily volume ``V``. Each email carries ``G`` records on average
(``G < 1`` means only some emails get an attachment).

Two sender policies are simulated per domain:

* with a history pointer, records go out in creation order and repeats
  only fill slots left over once the domain holds every current record;
* without one, each day's attachments are drawn uniformly from the current
  repository (distinct within a day, independent across days), so
  duplicates pile up as coverage grows.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import Repository, RepositoryProfile, ValidationError
from .series import Carry, SimTimeSeries

EMAIL_CSV_COLUMNS = (
    "day",
    "rank",
    "emails_today",
    "records_attached",
    "unique_received",
    "coverage",
    "duplicates",
)


class DivergenceError(ValueError):
    pass


def zeta(b: float, tolerance: float = 1e-12) -> float:
    """Riemann zeta at real ``b > 1``.

    Sums the first ``N - 1`` terms directly and adds the tail
    ``sum_{n >= N} n**-b`` as its integral plus Euler-Maclaurin
    corrections. ``N`` grows until the first omitted correction term is
    below ``tolerance``.
    """
    if b <= 1:
        raise DivergenceError(f"zeta diverges for b={b} <= 1")
    if tolerance <= 0:
        raise ValueError("tolerance must be > 0")

    def remainder_bound(n: int) -> float:
        return b * (b + 1) * (b + 2) * (b + 3) * (b + 4) * n ** (-b - 5) / 30240

    n = 16
    while remainder_bound(n) > tolerance:
        n *= 2
    head = float(np.sum(np.arange(1, n, dtype=np.float64) ** -b))
    tail = (
        n ** (1 - b) / (b - 1)
        + n**-b / 2
        + b * n ** (-b - 1) / 12
        - b * (b + 1) * (b + 2) * n ** (-b - 3) / 720
    )
    return head + tail


def derive_c(total_volume: float, b: float) -> float:
    """Power-law constant so that volumes over all ranks sum to ``total_volume``."""
    if total_volume < 0:
        raise ValidationError("total_volume", "must be >= 0")
    z = zeta(b)
    return total_volume / z


@dataclass(frozen=True)
class EmailTrafficModel:
    """Daily outbound email volume by receiver rank.

    ``constant`` overrides the value derived from ``total_volume`` and
    ``exponent``. ``domain_volumes`` (emails/day for ranks 1..n) replaces
    the power law altogether, e.g. with measured per-domain traffic.
    ``volume_multiplier`` scales every domain's volume, either uniformly or
    per day (a sequence indexed from day 1, repeated cyclically).
    """

    total_volume: float = 16866.0
    exponent: float = 1.6
    constant: float | None = None
    granularity: float = 1.0
    domain_count: int = 20
    volume_multiplier: float | Sequence[float] = 1.0
    domain_volumes: Sequence[float] | None = None

    def __post_init__(self):
        if not self.granularity > 0:
            raise ValidationError("granularity", "must be > 0")
        if self.domain_count < 1:
            raise ValidationError("domain_count", "must be >= 1")
        if self.domain_volumes is None and self.constant is None and self.exponent <= 1:
            raise ValidationError("exponent", "must be > 1 to derive the constant")
        if self.domain_volumes is not None:
            object.__setattr__(self, "domain_volumes", tuple(float(v) for v in self.domain_volumes))
            object.__setattr__(self, "domain_count", min(self.domain_count, len(self.domain_volumes)))

    @property
    def c(self) -> float:
        if self.constant is not None:
            return self.constant
        return derive_c(self.total_volume, self.exponent)

    def daily_volume(self, rank: int) -> float:
        if rank < 1:
            raise ValueError("rank must be >= 1")
        if self.domain_volumes is not None:
            return self.domain_volumes[rank - 1]
        return self.c * rank ** -self.exponent

    def multiplier(self, day: int) -> float:
        m = self.volume_multiplier
        if isinstance(m, (int, float)):
            return float(m)
        return float(m[(day - 1) % len(m)])

    @classmethod
    def from_fixture(cls, rows: Sequence[tuple[int, float, str]], days_observed: float = 30, **kw):
        """Build a model from ``(rank, emails, domain)`` rows totalled over ``days_observed``."""
        ordered = sorted(rows)
        if [r for r, _, _ in ordered] != list(range(1, len(ordered) + 1)):
            raise ValidationError("rank", "fixture ranks must be 1..n without gaps")
        volumes = [e / days_observed for _, e, _ in ordered]
        kw.setdefault("domain_count", len(volumes))
        return cls(domain_volumes=volumes, **kw)


def load_domain_fixture(path: str | Path) -> list[tuple[int, int, str]]:
    """Read ``rank,emails,domain`` lines; a header line is skipped if present."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() == "rank":
                continue
            try:
                rows.append((int(row[0]), int(row[1]), row[2].strip()))
            except (IndexError, ValueError):
                raise ValidationError("domains", f"{path}:{lineno}: expected rank,emails,domain") from None
    return rows


def q_email(model: EmailTrafficModel, rank: int) -> float:
    """Records a day reaching the domain at ``rank``: volume times granularity."""
    return model.daily_volume(rank) * model.granularity


class HFactor(NamedTuple):
    value: float
    clamped: bool


def h_no_history(day: int, profile: RepositoryProfile, q: float) -> HFactor:
    """Chance that an attachment sent on ``day`` is new to the domain, with no history kept.

    ``h(1) = 1`` and each later day multiplies by the share of the pool
    ``R + (R_u + R_a) * day`` not consumed by that day's ``q`` attachments.
    A day where ``q`` covers the whole pool zeroes the factor and sets
    ``clamped``.
    """
    if day < 1:
        raise ValueError("day must be >= 1")
    h = 1.0
    clamped = False
    growth = profile.updates_per_day + profile.adds_per_day
    for d in range(2, day + 1):
        pool = profile.record_count + growth * d
        if q >= pool:
            return HFactor(0.0, True)
        h *= (pool - q) / pool
    return HFactor(h, clamped)


@dataclass
class DomainQueue:
    rank: int
    daily_email_volume: float
    with_history: bool
    rng: np.random.Generator | None = None
    pointer: int = 0  # next repeat, once everything has been sent
    passes: int = 0
    unique: int = 0
    duplicates: int = 0
    attached_total: int = 0
    received: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    email_carry: Carry = field(default_factory=Carry)
    slot_carry: Carry = field(default_factory=Carry)

    def _grow(self, pool: int) -> None:
        if len(self.received) < pool:
            grown = np.zeros(max(pool, 2 * len(self.received)), dtype=bool)
            grown[: len(self.received)] = self.received
            self.received = grown

    def _mark(self, idx: np.ndarray | slice, count: int) -> None:
        fresh = count - int(np.count_nonzero(self.received[idx]))
        self.received[idx] = True
        self.unique += fresh
        self.duplicates += count - fresh

    def attach(self, slots: int, pool: int) -> None:
        if slots <= 0 or pool <= 0:
            return
        self._grow(pool)
        self.attached_total += slots
        if self.with_history:
            # unsent records first, in creation order; ``unique`` is that prefix
            fresh = min(slots, pool - self.unique)
            self._mark(slice(self.unique, self.unique + fresh), fresh)
            slots -= fresh
            # spare slots repeat the repository from ``pointer`` onwards
            while slots > 0:
                if self.pointer >= pool:
                    self.pointer = 0
                    self.passes += 1
                take = min(slots, pool - self.pointer)
                self._mark(slice(self.pointer, self.pointer + take), take)
                self.pointer += take
                slots -= take
            return
        full, rest = divmod(slots, pool)
        for _ in range(full):
            self._mark(slice(0, pool), pool)
        if rest:
            picks = self.rng.choice(pool, size=rest, replace=False)
            self._mark(picks, rest)

    def coverage(self, pool: int) -> float:
        return self.unique / pool if pool else 1.0


class EmailSimulation:
    """Per-domain replication state for one sending repository."""

    def __init__(
        self,
        repo: Repository,
        model: EmailTrafficModel,
        with_history: bool,
        seed: int = 0,
        ranks: Sequence[int] | None = None,
    ):
        self.repo = repo
        self.model = model
        self.with_history = with_history
        self.seed = seed
        self.day = repo.current_day
        ranks = list(ranks) if ranks is not None else list(range(1, model.domain_count + 1))
        self.domains = [
            DomainQueue(
                rank=r,
                daily_email_volume=model.daily_volume(r),
                with_history=with_history,
                rng=None if with_history else np.random.default_rng([seed, r]),
            )
            for r in ranks
        ]

    def step_day(self) -> list[tuple[int, int]]:
        """Attach records for the repository's current day.

        Call after ``repo.advance_day()``; returns ``(emails, attached)`` per
        domain.
        """
        if self.repo.current_day != self.day + 1:
            raise ValueError(f"repository is on day {self.repo.current_day}, simulation on {self.day}")
        self.day = self.repo.current_day
        pool = self.repo.record_count
        m = self.model.multiplier(self.day)
        out = []
        for dq in self.domains:
            rate = dq.daily_email_volume * m
            emails = dq.email_carry.take(rate)
            slots = dq.slot_carry.take(rate * self.model.granularity)
            dq.attach(slots, pool)
            out.append((emails, slots))
        return out


def run_scenario(
    repo: Repository,
    model: EmailTrafficModel,
    with_history: bool,
    days: int,
    *,
    seed: int = 0,
    include_internal: bool = False,
    grow_repository: bool = True,
) -> SimTimeSeries:
    """Simulate ``days`` days of email piggybacking; one row per day and domain.

    Rank 1 stands for the sender's own domain and is left out unless
    ``include_internal``. With ``grow_repository=False`` the repository is
    held at its initial size (its day counter still advances).
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    first = 1 if include_internal else 2
    ranks = list(range(first, model.domain_count + 1))
    if not ranks:
        raise ValidationError("domain_count", "no domains left to report")
    sim = EmailSimulation(repo, model, with_history, seed, ranks)
    n = days * len(ranks)
    cols = {
        name: np.zeros(n, dtype=np.int64)
        for name in ("day", "rank", "emails_today", "records_attached", "unique_received",
                     "duplicates", "repo_size")
    }
    coverage = np.zeros(n)
    row = 0
    for _ in range(days):
        if grow_repository:
            repo.advance_day()
        else:
            repo.current_day += 1
        pool = repo.record_count
        for dq, (emails, slots) in zip(sim.domains, sim.step_day()):
            cols["day"][row] = sim.day
            cols["rank"][row] = dq.rank
            cols["emails_today"][row] = emails
            cols["records_attached"][row] = slots
            cols["unique_received"][row] = dq.unique
            cols["duplicates"][row] = dq.duplicates
            cols["repo_size"][row] = pool
            coverage[row] = dq.coverage(pool)
            row += 1
    cols["coverage"] = coverage
    full_days = {}
    for r in ranks:
        mask = cols["rank"] == r
        hit = np.flatnonzero(coverage[mask] >= 1.0)
        full_days[r] = int(cols["day"][mask][hit[0]]) if len(hit) else None
    meta = {
        "transport": "email",
        "with_history": with_history,
        "c": model.c if model.domain_volumes is None else None,
        "full_coverage_day": full_days,
    }
    return SimTimeSeries(cols, EMAIL_CSV_COLUMNS, meta)


def bundled_domains() -> list[tuple[int, int, str]]:
    """The 50 busiest receiver domains of a 30-day departmental mail log."""
    from importlib.resources import as_file, files

    with as_file(files("piggyback") / "data" / "mail_domains.csv") as path:
        return load_domain_fixture(path)

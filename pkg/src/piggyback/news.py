"""Day-by-day simulation of active replication to a news server.

The sender harvests the repository into a FIFO posting queue and posts up to
``q_news`` records a day; the server drops every post older than ``n_ttl``
days. Three sender policies are modelled:

* single baseline: one full snapshot, then only additions and updates;
* continuous baseline: a new snapshot starts as soon as the previous one
  has been posted, using whatever capacity is left that day;
* cyclic baseline: ``copies_target`` back-to-back snapshots, then ``sleep``
  days during which only changes are posted (or nothing, if
  ``updates_during_sleep`` is off).

A snapshot taken at the start of day ``d`` covers every record that existed
at the end of day ``d - 1``; one started mid-day covers every current
record. Each day's additions and updates join the queue behind whatever is
already waiting; updated records become new posts since a news article
cannot be edited in place.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import DayDelta, Repository, RepositoryProfile, ValidationError
from .series import SimTimeSeries, daily_capacity

BASE64_FACTOR = 4 / 3
SECONDS_PER_DAY = 86_400

NEWS_CSV_COLUMNS = (
    "day",
    "posted_today",
    "expired_today",
    "records_on_server",
    "repo_size",
    "coverage_fraction",
    "volume_copies",
)


class SenderMode(str, Enum):
    SINGLE = "single"
    CYCLIC = "cyclic"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class SenderPolicy:
    mode: SenderMode = SenderMode.CYCLIC
    sleep: float = 0
    copies_target: int = 1
    by_reference: bool = False
    metadata_size: int = 1000
    updates_during_sleep: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", SenderMode(self.mode))
        if self.mode is SenderMode.CYCLIC:
            if self.sleep < 0 or (not math.isinf(self.sleep) and self.sleep != int(self.sleep)):
                raise ValidationError("sleep", "must be a whole number of days >= 0")
        if self.copies_target < 1:
            raise ValidationError("copies_target", "must be >= 1")
        if self.by_reference and self.metadata_size <= 0:
            raise ValidationError("metadata_size", "must be > 0")

    @property
    def effective_sleep(self) -> float:
        """Sleep between wake periods: 0 for continuous, infinite for single."""
        if self.mode is SenderMode.CONTINUOUS:
            return 0
        if self.mode is SenderMode.SINGLE:
            return math.inf
        return self.sleep


@dataclass(frozen=True)
class NewsReceiverPolicy:
    n_ttl: int = 30
    max_article_size: int | None = None

    def __post_init__(self):
        if self.n_ttl < 1:
            raise ValidationError("n_ttl", "must be >= 1")


@dataclass(frozen=True)
class NetworkProfile:
    """Sender-side link: ``bandwidth`` in bytes/day, minus a daily downtime share."""

    bandwidth: float
    downtime_fraction: float = 0.0

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValidationError("bandwidth", "must be > 0")
        if not 0 <= self.downtime_fraction < 1:
            raise ValidationError("downtime_fraction", "must be in [0, 1)")

    @classmethod
    def from_bits_per_second(cls, bps: float, downtime_fraction: float = 0.0) -> NetworkProfile:
        return cls(bps / 8 * SECONDS_PER_DAY, downtime_fraction)

    @property
    def effective_bandwidth(self) -> float:
        return self.bandwidth * (1 - self.downtime_fraction)


def q_news(profile: RepositoryProfile, net: NetworkProfile, sender: SenderPolicy | None = None) -> float:
    """Records postable per day.

    Full content pays the base64 expansion of 4/3. By-reference posts carry
    only ``metadata_size`` bytes and are costed without that factor, so
    advertising 500,000 records with 1 KB of metadata over 0.125 Mbps takes
    0.37 days. The full-content formula does include it.
    """
    if sender is not None and sender.by_reference:
        return net.effective_bandwidth / sender.metadata_size
    if not profile.mean_record_size > 0:
        raise ValidationError("mean_record_size", "must be > 0")
    return net.effective_bandwidth / (profile.mean_record_size * BASE64_FACTOR)


def t_news(profile: RepositoryProfile, net: NetworkProfile, sender: SenderPolicy | None = None) -> float:
    """Days to post one baseline, ignoring additions and updates."""
    return profile.record_count / q_news(profile, net, sender)


class NewsSimulation:
    """Mutable state of one sender/news-server pair.

    Drive it with :meth:`step_day`, passing the delta returned by
    ``repo.advance_day()`` for the same day.
    """

    def __init__(
        self,
        repo: Repository,
        sender: SenderPolicy,
        receiver: NewsReceiverPolicy,
        net: NetworkProfile,
    ):
        self.repo = repo
        self.sender = sender
        self.receiver = receiver
        self.q = q_news(repo.profile, net, sender)
        self.day = repo.current_day
        self.queue: deque[np.ndarray] = deque()
        self.queue_len = 0
        self.marker: int | None = None  # queued items up to the end of the running baseline
        self.start_pending = True
        self.phase = "baseline"
        self.sleep_left = 0
        self.baselines_in_wake = 0
        self.baseline_completions: list[int] = []
        self.posted: deque[tuple[int, np.ndarray]] = deque()
        self.on_server = 0
        self.tr_news = 0
        self.skipped_oversize = 0
        self._copies = np.zeros(max(64, repo.record_count), dtype=np.int32)

    # -- queue ---------------------------------------------------------

    def _oversize_filter(self, idx: np.ndarray) -> np.ndarray:
        limit = self.receiver.max_article_size
        if limit is None or self.sender.by_reference or len(idx) == 0:
            return idx
        sizes = self.repo.sizes[idx]
        ok = 4 * -(-sizes // 3) <= limit  # exact base64 size
        dropped = int(len(idx) - ok.sum())
        if dropped:
            self.skipped_oversize += dropped
            warnings.warn(f"day {self.day}: skipped {dropped} records over {limit} bytes", stacklevel=3)
        return idx[ok]

    def _enqueue(self, idx: np.ndarray) -> None:
        idx = self._oversize_filter(np.asarray(idx, dtype=np.int64))
        if len(idx):
            self.queue.append(idx)
            self.queue_len += len(idx)

    def _dequeue(self, n: int) -> np.ndarray:
        out = []
        while n > 0 and self.queue:
            head = self.queue[0]
            if len(head) <= n:
                out.append(self.queue.popleft())
                n -= len(head)
            else:
                out.append(head[:n])
                self.queue[0] = head[n:]
                n = 0
        taken = np.concatenate(out) if out else np.empty(0, dtype=np.int64)
        self.queue_len -= len(taken)
        return taken

    def _sends_deltas(self) -> bool:
        return self.phase != "sleep" or self.sender.updates_during_sleep

    # -- day step ------------------------------------------------------

    def step_day(self, delta: DayDelta) -> tuple[int, int]:
        """Advance one day; returns ``(posted_today, expired_today)``."""
        if delta.day != self.day + 1:
            raise ValueError(f"expected delta for day {self.day + 1}, got {delta.day}")
        self.day = d = delta.day
        if len(self._copies) < self.repo.record_count:
            grown = np.zeros(max(self.repo.record_count, 2 * len(self._copies)), dtype=np.int32)
            grown[: len(self._copies)] = self._copies
            self._copies = grown

        if self.start_pending:
            self._start_snapshot(self.repo.record_count - len(delta.added_indices))
        if self._sends_deltas():
            self._enqueue(delta.added_indices)
            self._enqueue(delta.updated_indices)

        cap = daily_capacity(self.q, d)
        posted = []
        completed = False
        while True:
            if self.marker is not None and cap >= self.marker:
                posted.append(self._dequeue(self.marker))
                cap -= self.marker
                self.marker = None
                completed = True
                self._finish_baseline(d)
                # a baseline that follows without sleep starts at once on leftover capacity
                if self.start_pending and 0 < cap < math.inf and self.repo.record_count > 0:
                    self._start_snapshot(self.repo.record_count)
                    continue
            elif self.marker is not None:
                self.marker -= cap
            break
        posted.append(self._dequeue(min(cap, self.queue_len)))
        today = np.concatenate(posted)
        np.add.at(self._copies, today, 1)
        self.posted.append((d, today))
        self.on_server += len(today)
        self.tr_news += len(today)

        expired = 0
        while self.posted and self.posted[0][0] <= d - self.receiver.n_ttl:
            _, old = self.posted.popleft()
            np.add.at(self._copies, old, -1)
            expired += len(old)
        self.on_server -= expired

        if not completed and self.phase == "sleep":
            self.sleep_left -= 1
            if self.sleep_left <= 0:
                self.start_pending = True
                self.phase = "baseline"
        return len(today), expired

    def _start_snapshot(self, n_records: int) -> None:
        self._enqueue(np.arange(n_records))
        self.marker = self.queue_len
        self.start_pending = False
        self.phase = "baseline"

    def _finish_baseline(self, d: int) -> None:
        self.baseline_completions.append(d)
        self.baselines_in_wake += 1
        mode = self.sender.mode
        if mode is SenderMode.SINGLE:
            self.phase = "deltas"
        elif mode is SenderMode.CONTINUOUS:
            self.start_pending = True
        else:
            sleep = self.sender.sleep
            if sleep == 0 or self.baselines_in_wake < self.sender.copies_target:
                self.start_pending = True
            elif math.isinf(sleep):
                self.phase = "deltas"
            else:
                self.phase = "sleep"
                self.sleep_left = int(sleep)
                self.baselines_in_wake = 0

    # -- observations --------------------------------------------------

    def records_on_server(self) -> int:
        """Posts younger than ``n_ttl`` days, duplicates included."""
        return self.on_server

    def distinct_on_server(self) -> int:
        """Records with at least one post (any version) still on the server."""
        return int(np.count_nonzero(self._copies[: self.repo.record_count]))


def run_scenario(
    repo: Repository,
    sender: SenderPolicy,
    receiver: NewsReceiverPolicy,
    net: NetworkProfile,
    days: int,
) -> SimTimeSeries:
    """Simulate ``days`` days and return the per-day series.

    Besides the CSV columns the series holds ``tr_news`` (cumulative posts)
    and ``distinct_on_server``; ``meta`` records baseline completion days.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    sim = NewsSimulation(repo, sender, receiver, net)
    cols = {
        name: np.zeros(days, dtype=np.int64)
        for name in ("day", "posted_today", "expired_today", "records_on_server", "repo_size",
                     "tr_news", "distinct_on_server")
    }
    coverage = np.zeros(days)
    volume = np.zeros(days)
    for i in range(days):
        posted, expired = sim.step_day(repo.advance_day())
        size = repo.record_count
        distinct = sim.distinct_on_server()
        cols["day"][i] = sim.day
        cols["posted_today"][i] = posted
        cols["expired_today"][i] = expired
        cols["records_on_server"][i] = sim.records_on_server()
        cols["repo_size"][i] = size
        cols["tr_news"][i] = sim.tr_news
        cols["distinct_on_server"][i] = distinct
        coverage[i] = distinct / size if size else 1.0
        volume[i] = sim.records_on_server() / size if size else 0.0
    cols["coverage_fraction"] = coverage
    cols["volume_copies"] = volume
    meta = {
        "transport": "news",
        "q_news": sim.q,
        "baseline_completions": list(sim.baseline_completions),
        "skipped_oversize": sim.skipped_oversize,
        "n_ttl": receiver.n_ttl,
    }
    return SimTimeSeries(cols, NEWS_CSV_COLUMNS, meta)

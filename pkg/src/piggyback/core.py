"""Repository model: the library being replicated, evolved one day at a time.

Records are held as parallel numpy arrays (size, creation day, last
modification day) so that million-record repositories stay cheap. Record
content is synthetic filler regenerated on demand from a per-record seed; a
:class:`Record` object is only materialised when someone asks for it.
"""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np

DEFAULT_BASE_URL = "http://beatitude.cs.odu.edu:8080/"


class ValidationError(ValueError):
    """Raised when a profile or config value is out of range.

    ``field`` names the offending attribute so callers can report it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class RepositoryProfile:
    """Size and activity of a repository.

    ``record_count`` is the initial number of records, ``mean_record_size``
    is in bytes, and ``adds_per_day`` / ``updates_per_day`` are the daily
    change rates. Record sizes are drawn uniformly on
    ``[(1 - size_spread) * mean, (1 + size_spread) * mean]``.
    """

    record_count: int
    mean_record_size: float
    adds_per_day: int = 0
    updates_per_day: int = 0
    size_spread: float = 0.5
    resize_on_update: bool = False

    def validate(self) -> None:
        if self.record_count < 0:
            raise ValidationError("record_count", "must be >= 0")
        if not self.mean_record_size > 0:
            raise ValidationError("mean_record_size", "must be > 0")
        if self.adds_per_day < 0:
            raise ValidationError("adds_per_day", "must be >= 0")
        if self.updates_per_day < 0:
            raise ValidationError("updates_per_day", "must be >= 0")
        if not 0 <= self.size_spread < 1:
            raise ValidationError("size_spread", "must be in [0, 1)")

    def size_on_day(self, day: int) -> int:
        return self.record_count + day * self.adds_per_day


@dataclass
class Record:
    identifier: str
    size: int
    created_day: int = 0
    last_modified_day: int = 0
    content_seed: int | None = None
    _data: bytes | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_bytes(cls, identifier: str, data: bytes, created_day: int = 0) -> Record:
        return cls(identifier, len(data), created_day, created_day, None, bytes(data))

    @property
    def content(self) -> bytes:
        if self._data is None:
            if self.size == 0:
                return b""
            rng = np.random.default_rng(self.content_seed)
            return rng.bytes(self.size)
        return self._data


@dataclass
class DayDelta:
    """Changes produced by one call to :meth:`Repository.advance_day`."""

    day: int
    added_indices: np.ndarray
    updated_indices: np.ndarray
    added: list[Record]
    updated: list[str]

    def __len__(self) -> int:
        return len(self.added_indices) + len(self.updated_indices)


class _RecordView(Sequence):
    def __init__(self, repo: Repository):
        self._repo = repo

    def __len__(self) -> int:
        return self._repo.record_count

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self._repo.record(j) for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        return self._repo.record(i)

    def __iter__(self) -> Iterator[Record]:
        for i in range(len(self)):
            yield self._repo.record(i)


class Repository:
    """A growing set of records with deterministic synthetic content.

    Do not construct directly; use :func:`make_repository`.
    """

    def __init__(self, profile: RepositoryProfile, seed: int, base_url: str):
        self.profile = profile
        self.seed = int(seed)
        self.base_url = base_url
        self.current_day = 0
        self._n = 0
        self._size_buf = np.empty(0, dtype=np.int64)
        self._created_buf = np.empty(0, dtype=np.int32)
        self._modified_buf = np.empty(0, dtype=np.int32)

    # sizes for the records created on `day`; day 0 holds the initial corpus
    def _draw_sizes(self, day: int, n: int, stream: int = 0) -> np.ndarray:
        mean = self.profile.mean_record_size
        lo = max(0, math.ceil(mean * (1 - self.profile.size_spread)))
        hi = max(lo, math.floor(mean * (1 + self.profile.size_spread)))
        rng = np.random.default_rng([self.seed, day, stream])
        return rng.integers(lo, hi, size=n, endpoint=True, dtype=np.int64)

    def _append(self, day: int, n: int) -> np.ndarray:
        start, end = self._n, self._n + n
        if end > len(self._size_buf):
            cap = max(end, 2 * len(self._size_buf), 64)
            for name in ("_size_buf", "_created_buf", "_modified_buf"):
                old = getattr(self, name)
                new = np.empty(cap, dtype=old.dtype)
                new[:start] = old[:start]
                setattr(self, name, new)
        self._size_buf[start:end] = self._draw_sizes(day, n)
        self._created_buf[start:end] = day
        self._modified_buf[start:end] = day
        self._n = end
        return np.arange(start, end)

    @property
    def _sizes(self) -> np.ndarray:
        return self._size_buf[: self._n]

    @property
    def _created(self) -> np.ndarray:
        return self._created_buf[: self._n]

    @property
    def _modified(self) -> np.ndarray:
        return self._modified_buf[: self._n]

    @property
    def record_count(self) -> int:
        return self._n

    @property
    def records(self) -> Sequence[Record]:
        return _RecordView(self)

    @property
    def sizes(self) -> np.ndarray:
        return self._sizes

    @property
    def total_bytes(self) -> int:
        return int(self._sizes.sum())

    def identifier(self, index: int) -> str:
        return f"{self.base_url}{index // 1000}/rec{index}.bin"

    def record(self, index: int) -> Record:
        if not 0 <= index < self.record_count:
            raise IndexError(index)
        modified = int(self._modified[index])
        # content changes with each modification; size stays unless resizing is on
        seed = [self.seed, index, modified, 1]
        return Record(
            identifier=self.identifier(index),
            size=int(self._sizes[index]),
            created_day=int(self._created[index]),
            last_modified_day=modified,
            content_seed=int(np.random.SeedSequence(seed).generate_state(1, np.uint64)[0]),
        )

    def advance_day(self) -> DayDelta:
        p = self.profile
        existing = self.record_count
        if p.updates_per_day > existing:
            raise ValidationError(
                "updates_per_day",
                f"{p.updates_per_day} updates requested but only {existing} records exist",
            )
        day = self.current_day + 1
        if p.updates_per_day:
            rng = np.random.default_rng([self.seed, day, 1])
            updated = np.sort(rng.choice(existing, size=p.updates_per_day, replace=False))
            self._modified[updated] = day
            if p.resize_on_update:
                self._sizes[updated] = self._draw_sizes(day, len(updated), stream=2)
        else:
            updated = np.empty(0, dtype=np.int64)
        added = self._append(day, p.adds_per_day)
        self.current_day = day
        return DayDelta(
            day=day,
            added_indices=added,
            updated_indices=updated,
            added=[self.record(int(i)) for i in added],
            updated=[self.identifier(int(i)) for i in updated],
        )


def make_repository(
    profile: RepositoryProfile, seed: int = 0, base_url: str = DEFAULT_BASE_URL
) -> Repository:
    """Build the day-0 repository holding ``profile.record_count`` records."""
    profile.validate()
    if not base_url:
        raise ValidationError("base_url", "must be non-empty")
    repo = Repository(profile, seed, base_url if base_url.endswith("/") else base_url + "/")
    repo._append(0, profile.record_count)
    return repo

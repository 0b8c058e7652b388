"""Scenario configs, presets and the run/batch drivers behind the CLI.

A scenario file is INI-style text::

    [scenario]
    name = my-repo
    transport = news          ; or email
    days = 2000
    seed = 1

    [repository]
    record_count = 100000
    mean_record_size = 1MB
    adds_per_day = 100
    updates_per_day = 400

    [news]
    mode = cyclic
    sleep = 3
    copies_target = 2
    n_ttl = 30
    bandwidth = 1.5Mbps
    downtime_fraction = 0.25

    [email]
    total_volume = 16866
    exponent = 1.6
    constant = 7378
    granularity = 1
    domain_count = 20
    volume_multiplier = 1     ; scales every domain's daily volume
    with_history = yes

Sizes accept B/KB/MB/GB suffixes (powers of 1000) and bandwidths accept
bps/Kbps/Mbps/Gbps or a size per day (``10GB/day``). Unknown sections or
keys are rejected.
"""

from __future__ import annotations

import configparser
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import mail, news
from .core import RepositoryProfile, ValidationError, make_repository
from .series import SimTimeSeries

_SIZE_UNITS = {"": 1, "B": 1, "KB": 1e3, "MB": 1e6, "GB": 1e9, "TB": 1e12}
_RATE_UNITS = {"BPS": 1, "KBPS": 1e3, "MBPS": 1e6, "GBPS": 1e9}
_QUANTITY_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([A-Za-z/]*)\s*$")


def parse_size(text: str | float) -> float:
    """``"100KB"`` -> 100000.0 bytes."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _QUANTITY_RE.match(text)
    unit = m.group(2).upper() if m else None
    if not m or unit not in _SIZE_UNITS:
        raise ValueError(f"not a size: {text!r}")
    return float(m.group(1)) * _SIZE_UNITS[unit]


def parse_bandwidth(text: str | float) -> float:
    """Bytes per day from ``"1.5Mbps"``, ``"10GB/day"`` or a bare number (bytes/day)."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _QUANTITY_RE.match(text)
    if not m:
        raise ValueError(f"not a bandwidth: {text!r}")
    value, unit = float(m.group(1)), m.group(2).upper()
    if unit in _RATE_UNITS:
        return value * _RATE_UNITS[unit] / 8 * news.SECONDS_PER_DAY
    if unit.endswith("/DAY") and unit[:-4] in _SIZE_UNITS:
        return value * _SIZE_UNITS[unit[:-4]]
    if unit == "":
        return value
    raise ValueError(f"not a bandwidth: {text!r}")


@dataclass(frozen=True)
class EmailSettings:
    model: mail.EmailTrafficModel
    with_history: bool = True
    include_internal: bool = False
    grow_repository: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    profile: RepositoryProfile
    transport: str = "news"
    sender: news.SenderPolicy = field(default_factory=news.SenderPolicy)
    receiver: news.NewsReceiverPolicy = field(default_factory=news.NewsReceiverPolicy)
    network: news.NetworkProfile = field(default_factory=lambda: news.NetworkProfile(1e10))
    email: EmailSettings = field(default_factory=lambda: EmailSettings(mail.EmailTrafficModel()))
    days: int = 2000
    seed: int = 0
    output: str | None = None

    def validate(self) -> None:
        self.profile.validate()
        if self.transport not in ("news", "email"):
            raise ValidationError("transport", "must be news or email")
        if self.days < 1:
            raise ValidationError("days", "must be >= 1")


def _email_defaults() -> EmailSettings:
    return EmailSettings(mail.EmailTrafficModel(constant=7378.0, exponent=1.6, granularity=1.0))


# Values from the three simulated repositories: R, mean size, R_a, R_u, N_ttl, S.
PRESETS: dict[str, ScenarioConfig] = {
    "active": ScenarioConfig(
        name="active",
        profile=RepositoryProfile(100_000, 1e6, 100, 400),
        sender=news.SenderPolicy("cyclic", sleep=3, copies_target=2),
        receiver=news.NewsReceiverPolicy(n_ttl=30),
        network=news.NetworkProfile.from_bits_per_second(1.5e6, downtime_fraction=0.25),
        email=_email_defaults(),
    ),
    "mature": ScenarioConfig(
        name="mature",
        profile=RepositoryProfile(1_000_000, 1e5, 10, 5),
        sender=news.SenderPolicy("cyclic", sleep=5, copies_target=2),
        receiver=news.NewsReceiverPolicy(n_ttl=30),
        network=news.NetworkProfile(1e10),
        email=_email_defaults(),
    ),
    "new": ScenarioConfig(
        name="new",
        profile=RepositoryProfile(1_000, 1e5, 100, 20),
        sender=news.SenderPolicy("cyclic", sleep=5, copies_target=2),
        receiver=news.NewsReceiverPolicy(n_ttl=30),
        network=news.NetworkProfile(1e10),
        email=_email_defaults(),
    ),
}


# section -> key -> converter
def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _sleep(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity", "never") else float(text)


_SCHEMA = {
    "scenario": {"name": str, "transport": str, "days": int, "seed": int, "output": str, "preset": str},
    "repository": {
        "record_count": int,
        "mean_record_size": parse_size,
        "adds_per_day": int,
        "updates_per_day": int,
        "size_spread": float,
        "resize_on_update": _bool,
    },
    "news": {
        "mode": str,
        "sleep": _sleep,
        "copies_target": int,
        "by_reference": _bool,
        "metadata_size": lambda t: int(parse_size(t)),
        "updates_during_sleep": _bool,
        "n_ttl": int,
        "max_article_size": lambda t: int(parse_size(t)),
        "bandwidth": parse_bandwidth,
        "downtime_fraction": float,
    },
    "email": {
        "total_volume": float,
        "exponent": float,
        "constant": float,
        "granularity": float,
        "domain_count": int,
        "volume_multiplier": float,
        "with_history": _bool,
        "include_internal": _bool,
        "grow_repository": _bool,
        "domains_file": str,
    },
}


class ConfigError(ValidationError):
    def __init__(self, path: str, line: int | None, field: str, message: str):
        where = f"{path}:{line}" if line else path
        super().__init__(field, message)
        self.args = (f"{where}: {field}: {message}",)
        self.line = line


def _line_of(lines: list[str], section: str, key: str | None) -> int | None:
    current = None
    for i, raw in enumerate(lines, start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None:
            name = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            if name == key:
                return i
    return None


def load_scenario(source: str | Path) -> ScenarioConfig:
    """Load a preset by name or a scenario file by path."""
    key = str(source).lower()
    if key in PRESETS and not Path(source).exists():
        return PRESETS[key]
    path = Path(source)
    if not path.exists():
        raise ConfigError(str(source), None, "scenario", f"no such preset or file (presets: {', '.join(PRESETS)})")
    text = path.read_text()
    return parse_scenario(text, str(path))


def parse_scenario(text: str, path: str = "<string>") -> ScenarioConfig:
    lines = text.splitlines()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(path, getattr(exc, "lineno", None), "syntax", str(exc).splitlines()[0]) from None

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(path, _line_of(lines, section, None), section, "unknown section")
        for k, raw in cp.items(section):
            if k not in _SCHEMA[section]:
                raise ConfigError(path, _line_of(lines, section, k), f"{section}.{k}", "unknown key")
            try:
                values.setdefault(section, {})[k] = _SCHEMA[section][k](raw)
            except ValueError as exc:
                raise ConfigError(path, _line_of(lines, section, k), f"{section}.{k}", str(exc)) from None

    try:
        cfg = _build(values)
        cfg.validate()
    except ValidationError as exc:
        section = next((s for s, keys in values.items() if exc.field in keys), None)
        line = _line_of(lines, section, exc.field) if section else None
        raise ConfigError(path, line, exc.field, str(exc).split(": ", 1)[-1]) from None
    return cfg


def _build(values: dict[str, dict]) -> ScenarioConfig:
    sc = values.get("scenario", {})
    base = PRESETS[sc["preset"]] if "preset" in sc else None
    if "preset" in sc and sc["preset"] not in PRESETS:
        raise ValidationError("preset", f"unknown preset {sc['preset']!r}")

    repo_kw = values.get("repository", {})
    if base is not None:
        profile = replace(base.profile, **repo_kw)
    else:
        missing = {"record_count", "mean_record_size"} - repo_kw.keys()
        if missing:
            raise ValidationError(sorted(missing)[0], "required in [repository]")
        profile = RepositoryProfile(**repo_kw)

    nw = dict(values.get("news", {}))
    sender_kw = {k: nw.pop(k) for k in list(nw) if k in
                 ("mode", "sleep", "copies_target", "by_reference", "metadata_size", "updates_during_sleep")}
    recv_kw = {k: nw.pop(k) for k in list(nw) if k in ("n_ttl", "max_article_size")}
    try:
        sender = replace(base.sender, **sender_kw) if base else news.SenderPolicy(**sender_kw)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("mode", str(exc)) from None
    receiver = replace(base.receiver, **recv_kw) if base else news.NewsReceiverPolicy(**recv_kw)
    if base and "bandwidth" not in nw:
        network = replace(base.network, **nw)
    else:
        network = news.NetworkProfile(nw.get("bandwidth", 1e10), nw.get("downtime_fraction", 0.0))

    em = dict(values.get("email", {}))
    settings = base.email if base else _email_defaults()
    flags = {k: em.pop(k) for k in list(em) if k in ("with_history", "include_internal", "grow_repository")}
    domains_file = em.pop("domains_file", None)
    model = replace(settings.model, **em)
    if domains_file:
        model = mail.EmailTrafficModel.from_fixture(
            mail.load_domain_fixture(domains_file), granularity=model.granularity
        )
    email = replace(settings, model=model, **flags)

    return ScenarioConfig(
        name=sc.get("name", base.name if base else "scenario"),
        profile=profile,
        transport=sc.get("transport", "news"),
        sender=sender,
        receiver=receiver,
        network=network,
        email=email,
        days=sc.get("days", 2000),
        seed=sc.get("seed", 0),
        output=sc.get("output"),
    )


@dataclass
class RunSummary:
    """Headline numbers computed from a run's time series."""

    name: str
    transport: str
    days: int
    final_coverage: float
    days_at_full_coverage: int
    steady_records_on_server: float | None = None
    baseline_completions: list[int] = field(default_factory=list)
    full_coverage_day: dict[int, int | None] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"scenario: {self.name} ({self.transport}, {self.days} days)",
            f"final coverage: {self.final_coverage:.4f}",
            f"days at 100% coverage: {self.days_at_full_coverage}",
        ]
        if self.transport == "news":
            out.append(f"records on server (mean of last N_ttl days): {self.steady_records_on_server:.1f}")
            shown = ", ".join(map(str, self.baseline_completions[:12]))
            more = len(self.baseline_completions) - 12
            out.append(f"baseline completions ({len(self.baseline_completions)}): {shown}"
                       + (f", ... (+{more})" if more > 0 else ""))
        else:
            for rank, day in self.full_coverage_day.items():
                out.append(f"rank {rank}: 100% coverage on day {day if day is not None else 'never'}")
        return out


def summarize(cfg: ScenarioConfig, ts: SimTimeSeries) -> RunSummary:
    if cfg.transport == "news":
        cov = ts["coverage_fraction"]
        tail = ts["records_on_server"][-cfg.receiver.n_ttl:]
        return RunSummary(
            cfg.name, "news", len(ts), float(cov[-1]), int(np.count_nonzero(cov >= 1.0)),
            float(np.mean(tail)), list(ts.meta["baseline_completions"]),
        )
    last = ts["day"] == ts["day"][-1]
    worst = float(ts["coverage"][last].min())
    full_days = np.unique(ts["day"][ts["coverage"] >= 1.0])
    # a day counts as fully covered only if every reported domain holds everything
    per_day = {d: bool(np.all(ts["coverage"][ts["day"] == d] >= 1.0)) for d in full_days}
    return RunSummary(
        cfg.name, "email", int(ts["day"][-1]), worst, sum(per_day.values()),
        full_coverage_day=dict(ts.meta["full_coverage_day"]),
    )


def simulate(cfg: ScenarioConfig) -> SimTimeSeries:
    cfg.validate()
    repo = make_repository(cfg.profile, seed=cfg.seed)
    if cfg.transport == "news":
        return news.run_scenario(repo, cfg.sender, cfg.receiver, cfg.network, cfg.days)
    e = cfg.email
    return mail.run_scenario(
        repo, e.model, e.with_history, cfg.days, seed=cfg.seed,
        include_internal=e.include_internal, grow_repository=e.grow_repository,
    )


def output_path(cfg: ScenarioConfig, out_dir: str | Path | None) -> Path:
    directory = Path(out_dir or cfg.output or ".")
    suffix = cfg.sender.mode.value if cfg.transport == "news" else (
        "history" if cfg.email.with_history else "nohistory")
    return directory / f"{cfg.name}-{cfg.transport}-{suffix}.csv"


def run(cfg: ScenarioConfig, out_dir: str | Path | None = None) -> tuple[SimTimeSeries, RunSummary, Path]:
    """Simulate, write the CSV, and summarize."""
    ts = simulate(cfg)
    path = output_path(cfg, out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    ts.to_csv(path)
    return ts, summarize(cfg, ts), path


def _run_for_batch(args):
    cfg, out_dir = args
    _, summary, path = run(cfg, out_dir)
    return summary, path


def batch(configs: list[ScenarioConfig], out_dir: str | Path | None = None, jobs: int = 1):
    """Run independent scenarios, in parallel processes when ``jobs > 1``."""
    work = [(c, out_dir) for c in configs]
    if jobs <= 1:
        return [_run_for_batch(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_for_batch, work))

"""Command line: ``piggyback run|calc|codec-roundtrip|batch``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import analytics, codec, mail, news, scenario
from .core import Record, RepositoryProfile, ValidationError

# ---------------------------------------------------------------------------
# calc


def _kv(params: list[str]) -> dict[str, str]:
    out = {}
    for p in params:
        if "=" not in p:
            raise ValueError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


class _Params:
    def __init__(self, raw: dict[str, str]):
        self.raw = raw
        self.used: set[str] = set()

    def get(self, key, conv=float, default=None):
        self.used.add(key)
        if key not in self.raw:
            if default is None:
                raise ValueError(f"missing parameter {key}=")
            return default
        return conv(self.raw[key])

    def has(self, key):
        return key in self.raw

    def check(self):
        extra = set(self.raw) - self.used
        if extra:
            raise ValueError(f"unknown parameter(s): {', '.join(sorted(extra))}")


def _email_model(p: _Params) -> mail.EmailTrafficModel:
    g = p.get("g", float, 1.0)
    if p.has("c"):
        return mail.EmailTrafficModel(constant=p.get("c"), exponent=p.get("b", float, 1.6), granularity=g)
    return mail.EmailTrafficModel(total_volume=p.get("v", float, 16866.0), exponent=p.get("b", float, 1.6),
                                  granularity=g)


def _profile(p: _Params, size_key="size") -> RepositoryProfile:
    return RepositoryProfile(
        record_count=p.get("r", int),
        mean_record_size=p.get(size_key, scenario.parse_size, 1.0) if size_key else 1.0,
        adds_per_day=p.get("ra", int, 0),
        updates_per_day=p.get("ru", int, 0),
    )


def _news_q(p: _Params, profile: RepositoryProfile | None = None) -> tuple[float, str]:
    net = news.NetworkProfile(p.get("bw", scenario.parse_bandwidth), p.get("downtime", float, 0.0))
    by_ref = p.get("mode", str, "full") in ("by-reference", "by_reference", "reference")
    size = profile.mean_record_size if profile else p.get("size", scenario.parse_size)
    prof = RepositoryProfile(0, size)
    sender = news.SenderPolicy(by_reference=by_ref, metadata_size=int(size)) if by_ref else None
    q = news.q_news(prof, net, sender)
    factor = "" if by_ref else " * 4/3"
    return q, f"{net.effective_bandwidth:.6g} B/day / ({size:.6g} B{factor})"


def calc(equation: str, params: list[str]) -> list[str]:
    p = _Params(_kv(params))
    eq = equation.lower().replace("-", "_")
    if eq == "zeta":
        b = p.get("b")
        out = [f"zeta({b}) = {mail.zeta(b, p.get('tol', float, 1e-12)):.10g}"]
    elif eq == "c":
        v, b = p.get("v"), p.get("b")
        out = [f"c = V / zeta(b) = {v:g} / {mail.zeta(b):.6f} = {mail.derive_c(v, b):.4f}"]
    elif eq == "q_email":
        model, rank = _email_model(p), p.get("rank", int)
        out = [f"Q_email = {model.c:.4f} / {rank}^{model.exponent:g} * {model.granularity:g}"
               f" = {mail.q_email(model, rank):.4f} records/day"]
    elif eq == "q_news":
        q, how = _news_q(p)
        out = [f"Q_news = {how} = {q:.4f} records/day"]
    elif eq == "t_news":
        r = p.get("r", int)
        q, how = _news_q(p)
        t = r / q
        out = [f"T_news = R / Q_news = {r} / ({how}) = {t:.4f} days"]
        if p.has("ttl"):
            ttl = p.get("ttl", int)
            out.append(f"baseline {'fits within' if t < ttl else 'does not fit within'} N_ttl = {ttl} days")
    elif eq == "h":
        prof = _profile(p, None)
        d, q = p.get("d", int), p.get("q")
        h = mail.h_no_history(d, prof, q)
        out = [f"h({d}) = {h.value:.10g}" + (" (clamped: q reached the pool size)" if h.clamped else "")]
    elif eq == "tr_news":
        prof = _profile(p)
        q, how = _news_q(p, prof)
        d = p.get("d", int)
        inputs = analytics.NewsAnalyticInputs(
            prof, q, p.get("s", _sleep_value, 0.0), p.get("ttl", int, 30), d, p.get("copies", int, 1)
        )
        cyc = analytics.cycle_durations(inputs)
        w = ", ".join(f"{x:.3f}" for x in cyc.durations[:8]) + (" ..." if cyc.max_k > 8 else "")
        out = [
            f"Q_news = {how} = {q:.4f} records/day",
            f"W_k = [{w}]  MaxK = {cyc.max_k}",
            f"TR_news({d}) = {analytics.tr_news_analytic(inputs, d)} records",
            f"records on server = TR_news({d}) - TR_news({max(d - inputs.n_ttl, 0)})"
            f" = {analytics.records_on_server_analytic(inputs, d)}",
        ]
    elif eq == "tr_email":
        model, rank, d = _email_model(p), p.get("rank", int), p.get("d", int)
        prof = _profile(p, None)
        hist = p.get("history", scenario._bool, True)
        tot = analytics.tr_email_analytic(model, rank, d, hist, prof)
        out = [f"TR_email = sum_(n=1..{d}) Q_email * h = {tot.attached:.4f} records attached",
               f"unique records received <= {tot.unique:.4f}"]
    elif eq == "p_news":
        q, d, ttl = p.get("q"), p.get("d", int), p.get("ttl", int, 30)
        r, ra = p.get("r", int), p.get("ra", int, 0)
        pr = analytics.p_replicated_news(q, d, ttl, r, ra)
        out = [f"P(r) = (Q*D - Q*(D - N_ttl)) / (R + D*R_a) = {pr.raw:.6f}" + _clamp_note(pr)]
    elif eq == "p_email":
        q, d, r, ra = p.get("q"), p.get("d", int), p.get("r", int), p.get("ra", int, 0)
        pr = analytics.p_replicated_email(q, d, r, ra)
        out = [f"P(r) = Q*D / (R + D*R_a) = {pr.raw:.6f}" + _clamp_note(pr)]
    elif eq == "fit":
        if p.has("file"):
            rows = mail.load_domain_fixture(p.get("file", str))
            lo = p.get("from", int, 1)
            pts = [(r, e) for r, e, _ in rows if r >= lo]
        else:
            pts = [tuple(float(x) for x in item.split(":")) for item in p.get("points", str).split(",")]
        fit = analytics.power_law_fit(pts)
        out = [f"V = c * rank^-b with c = {fit.c:.6g}, b = {fit.b:.6g} (log residual {fit.residual:.4g})"]
    else:
        raise ValueError(f"unknown equation {equation!r}")
    p.check()
    return out


def _sleep_value(text: str) -> float:
    return scenario._sleep(text)


def _clamp_note(pr: analytics.Probability) -> str:
    return f" -> clamped to {pr.value:g}" if pr.clamped else ""


# ---------------------------------------------------------------------------
# codec round trip

_FIXED_DATE = datetime(2000, 1, 1, tzinfo=timezone.utc)


def codec_roundtrip(corpus_dir: Path, fmt: str, out_dir: Path | None = None,
                    base_url: str = "http://localhost/oai") -> tuple[int, list[str]]:
    """Encode each file, write the message, parse it back and compare bytes.

    Returns ``(files_checked, failures)``.
    """
    files = sorted(f for f in Path(corpus_dir).rglob("*") if f.is_file())
    failures = []
    carrier = codec.EmailMessage(
        headers=[("From", "dlmgr@localhost"), ("To", "someone@example.org"),
                 ("Subject", "status"), ("Message-ID", "<carrier@localhost>")],
        body="Carrier message.\n",
    )
    for i, path in enumerate(files):
        rel = path.relative_to(corpus_dir).as_posix()
        record = Record.from_bytes(f"{base_url.rstrip('/')}/{rel}", path.read_bytes())
        xh = codec.build_xheaders(record, base_url, _FIXED_DATE)
        if fmt == "news":
            msg = codec.encode_news_article(record, "repository.local.archive", xh,
                                            date=_FIXED_DATE, message_id=f"<{i}.archive@localhost>")
        else:
            msg = codec.encode_email_attachment(carrier, record, xh)
        text = msg.to_text()
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{i:05d}.{'news' if fmt == 'news' else 'eml'}").write_text(text)
        try:
            _, payload = codec.extract_record(text)
            ok = payload.data == record.content and payload.identifier == record.identifier
        except codec.CodecError:
            ok = False
        if not ok:
            failures.append(rel)
    return len(files), failures


# ---------------------------------------------------------------------------
# argument handling


def _apply_overrides(cfg: scenario.ScenarioConfig, args) -> scenario.ScenarioConfig:
    changes = {}
    if args.days is not None:
        changes["days"] = args.days
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "transport", None):
        changes["transport"] = args.transport
    if getattr(args, "mode", None):
        sleep = cfg.sender.sleep if args.mode == "cyclic" else 0
        changes["sender"] = replace(cfg.sender, mode=news.SenderMode(args.mode), sleep=sleep)
    if getattr(args, "history", None) is not None:
        changes["email"] = replace(cfg.email, with_history=args.history)
    return replace(cfg, **changes) if changes else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piggyback", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--days", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, help="output directory for CSV files")
        p.add_argument("--format", choices=["csv"], default="csv")
        p.add_argument("--transport", choices=["news", "email"])
        p.add_argument("--mode", choices=[m.value for m in news.SenderMode], help="news sender policy")
        hist = p.add_mutually_exclusive_group()
        hist.add_argument("--history", dest="history", action="store_true", default=None)
        hist.add_argument("--no-history", dest="history", action="store_false")

    run_p = sub.add_parser("run", help="simulate one scenario and write its CSV")
    run_p.add_argument("--scenario", required=True, help="preset name (active, mature, new) or config file")
    scenario_flags(run_p)

    batch_p = sub.add_parser("batch", help="run several scenarios")
    batch_p.add_argument("scenarios", nargs="+")
    batch_p.add_argument("--jobs", type=int, default=1)
    scenario_flags(batch_p)

    calc_p = sub.add_parser("calc", help="evaluate a replication formula")
    calc_p.add_argument("equation", help="zeta, c, q_email, q_news, t_news, h, tr_news, tr_email, "
                                         "p_news, p_email, fit")
    calc_p.add_argument("params", nargs="*", metavar="key=value")

    rt = sub.add_parser("codec-roundtrip", help="encode and re-extract every file in a directory")
    rt.add_argument("corpus_dir", type=Path)
    rt.add_argument("--format", choices=["news", "email"], default="news")
    rt.add_argument("--out", type=Path, help="also write the encoded messages here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _apply_overrides(scenario.load_scenario(args.scenario), args)
            _, summary, path = scenario.run(cfg, args.out)
            print("\n".join(summary.lines()))
            print(f"wrote {path}")
        elif args.command == "batch":
            cfgs = [_apply_overrides(scenario.load_scenario(s), args) for s in args.scenarios]
            for summary, path in scenario.batch(cfgs, args.out, args.jobs):
                print("\n".join(summary.lines()))
                print(f"wrote {path}\n")
        elif args.command == "calc":
            print("\n".join(calc(args.equation, args.params)))
        elif args.command == "codec-roundtrip":
            if not args.corpus_dir.is_dir():
                raise ValueError(f"{args.corpus_dir} is not a directory")
            n, failures = codec_roundtrip(args.corpus_dir, args.format, args.out)
            print(f"{n - len(failures)}/{n} records intact ({args.format})")
            if failures:
                for f in failures:
                    print(f"mismatch: {f}", file=sys.stderr)
                return 1
    except (ValidationError, ValueError, OSError) as exc:
        print(f"piggyback: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

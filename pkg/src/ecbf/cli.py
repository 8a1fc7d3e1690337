"""Command line pipeline: gen -> train -> filter -> eval, plus inspect.

Exit codes: 0 success, 2 usage/config, 3 input parse, 4 algorithm state.
Set CBF_LOG=debug|info for diagnostics on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import errors
from .confidence import (DEFAULT_WINDOW_PACKETS, DEFAULT_WINDOW_SECONDS,
                         ConfidenceProfile, load_profile, save_profile)
from .engine import FilterEngine, Period, parse_threshold_strategy
from .packet import PacketFields, extract_attributes, parse_ipv4
from .report import DecisionRow, evaluate, read_decisions, write_decisions
from .traceio import (GeneratorConfig, PcapReader, TraceRecord, concat_traces,
                      period_at, read_periods_csv, read_trace_csv, write_pcap,
                      write_trace_csv)

log = logging.getLogger("ecbf")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_STATE = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _parse_mode(text: str) -> tuple[str, int]:
    mode, _, k = text.partition(":")
    if mode == "attack-mimic":
        try:
            return mode, int(k)
        except ValueError:
            raise CliError(EXIT_USAGE, "attack-mimic needs a k, e.g. attack-mimic:3") from None
    if k:
        raise CliError(EXIT_USAGE, f"mode {mode!r} takes no argument")
    return mode, 0


def _segment(text: str) -> tuple[str, int, int]:
    spec, _, count = text.rpartition("=")
    if not spec:
        raise CliError(EXIT_USAGE, f"segment {text!r} must look like MODE=COUNT")
    mode, k = _parse_mode(spec)
    return mode, k, int(count)


def _load_records(path) -> list[TraceRecord | tuple]:
    """CSV traces give TraceRecords; pcap input gives (index, RawPacket) pairs."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head in (b"\xd4\xc3\xb2\xa1", b"\xa1\xb2\xc3\xd4"):
        return list(enumerate(PcapReader(path)))
    return list(read_trace_csv(path))


def _as_raw(rec):
    if isinstance(rec, TraceRecord):
        return rec.index, rec.to_raw(), rec.label.value
    idx, raw = rec
    return idx, raw, "unknown"


def _attrs(rec, schema):
    if isinstance(rec, TraceRecord):
        return extract_attributes(rec.fields, schema), rec.ts
    _, raw = rec
    return extract_attributes(PacketFields.from_parsed(parse_ipv4(raw)), schema), raw.ts


# --------------------------------------------------------------------------

def cmd_gen(args) -> int:
    mode, k = _parse_mode(args.mode)
    segs = [GeneratorConfig(mode=mode, count=args.count, seed=args.seed,
                            rate=args.rate, mimic_k=k)]
    for i, text in enumerate(args.append or (), start=1):
        m, kk, c = _segment(text)
        segs.append(GeneratorConfig(mode=m, count=c, seed=args.seed + i,
                                    rate=args.rate, mimic_k=kk))
    for s in segs:
        s.validate()
    records = concat_traces(*segs)
    if args.out in (None, "-"):
        write_trace_csv(records, sys.stdout)
    else:
        write_trace_csv(records, args.out)
        print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_train(args) -> int:
    from .packet import default_schema

    profile = ConfidenceProfile(default_schema(), decay=args.decay,
                                window_seconds=args.window,
                                window_packets=args.window_packets)
    for rec in _load_records(args.input):
        a, ts = _attrs(rec, profile.schema)
        profile.observe(a, ts)
    if profile.open_window.n_total:
        profile.close_window()
    Path(args.profile).write_text(save_profile(profile))
    print(f"n = {profile.schema.n}")
    print(f"windows_closed = {profile.windows_closed}")
    print(f"N_n = {profile.n_total}")
    return EXIT_OK


def cmd_filter(args) -> int:
    profile = load_profile(Path(args.profile).read_text())
    engine = FilterEngine(profile, np_reset_on_nonattack=args.np_reset_on_nonattack,
                          threshold_strategy=args.threshold_strategy,
                          score_mode=args.score_mode)
    intervals = read_periods_csv(args.periods)
    records = _load_records(args.input)
    rows, rewritten = [], []
    current = None
    for rec in records:
        idx, raw, label = _as_raw(rec)
        iv = period_at(intervals, raw.ts)
        if iv is not current:
            engine.set_period(Period(iv.period), iv.start_ts)
            current = iv
        try:
            d, out = engine.process_packet(raw)
        except errors.ThresholdUnset as exc:
            raise CliError(EXIT_STATE, f"{exc}; declare a non-attack period first") from None
        rows.append(DecisionRow(idx, raw.ts, d.period.value, d.score, d.threshold_used,
                                d.verdict.value, d.rewritten, label))
        if d.rewritten:
            rewritten.append(out)
    write_decisions(rows, args.out)
    if args.rewrite:
        write_pcap(rewritten, args.rewrite)
    if args.snapshot:
        Path(args.snapshot).write_text(
            json.dumps(engine.snapshot(), sort_keys=True, indent=1) + "\n")
    n_dis = sum(r.verdict == "discard" for r in rows)
    print(f"packets = {len(rows)}  discarded = {n_dis}  rewritten = {len(rewritten)}  "
          f"NP = {engine.nominal.np}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rows = read_decisions(args.decisions)
    rep = evaluate(rows)
    Path(args.report).write_text(rep.to_json())
    hist = args.histogram or str(Path(args.report).with_suffix("")) + ".hist.csv"
    Path(hist).write_text(rep.histogram_csv())
    print(f"total = {rep.total}  fpr = {rep.fpr}  fnr = {rep.fnr}  "
          f"precision = {rep.precision}  recall = {rep.recall}")
    return EXIT_OK


def inspect_text(doc: dict) -> str:
    np_line = None
    if "engine_version" in doc:
        np_line = f"NP = {doc.get('np')}"
        doc = doc["profile"]
    profile = ConfidenceProfile.from_document(doc)
    s = profile.schema
    out = [f"N_n = {profile.n_total}", f"windows_closed = {profile.windows_closed}",
           f"decay = {profile.decay}"]
    if np_line:
        out.append(np_line)
    out.append("attributes:")
    for i, a in enumerate(s.attributes):
        out.append(f"  [{i}] {a.name} <- {a.field} ({a.discretizer})")
    if profile.is_empty:
        return "\n".join(out) + "\n"
    for k, (r, q) in enumerate(s.pairs):
        out.append(f"pair {k}: {s.attributes[r].name} x {s.attributes[q].name} "
                   f"(weight {s.weights[k]:g})")
        for (vr, vs), c in profile.top_pairs(k, 10):
            out.append(f"  ({vr}, {vs})  {c:.6f}")
    return "\n".join(out) + "\n"


def cmd_inspect(args) -> int:
    try:
        doc = json.loads(Path(args.profile).read_text())
    except json.JSONDecodeError as exc:
        raise errors.CorruptDocument(str(exc)) from None
    sys.stdout.write(inspect_text(doc))
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecbf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded synthetic trace (CSV)")
    g.add_argument("--mode", default="legit",
                   help="legit | attack-random | attack-mimic:K")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--rate", type=float, default=1000.0, help="packets per second")
    g.add_argument("--append", action="append", metavar="MODE=COUNT",
                   help="extra segment after the first; segment i uses seed+i")
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="learn a confidence profile from legitimate traffic")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--profile", required=True)
    t.add_argument("--window", type=float, default=DEFAULT_WINDOW_SECONDS,
                   help="window length in trace seconds")
    t.add_argument("--window-packets", type=int, default=DEFAULT_WINDOW_PACKETS,
                   help="window length for records without timestamps")
    t.add_argument("--decay", type=float, default=1.0)
    t.set_defaults(func=cmd_train)

    f = sub.add_parser("filter", help="filter a trace under declared periods")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--profile", required=True)
    f.add_argument("--periods", required=True)
    f.add_argument("--out", required=True, help="decisions CSV")
    f.add_argument("--rewrite", help="pcap of rewritten non-attack packets")
    f.add_argument("--snapshot", help="write the final engine state as JSON")
    f.add_argument("--np-reset-on-nonattack", action="store_true")
    f.add_argument("--threshold-strategy", default="min", type=parse_threshold_strategy,
                   help="min (default) | percentile:Q  [percentile is an extension]")
    f.add_argument("--score-mode", default="mean", choices=("mean", "sum", "min"))
    f.set_defaults(func=cmd_filter)

    e = sub.add_parser("eval", help="compute error rates and score histograms")
    e.add_argument("--decisions", required=True)
    e.add_argument("--report", required=True)
    e.add_argument("--histogram", help="histogram CSV path (default: next to the report)")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect", help="dump a profile or engine snapshot")
    i.add_argument("--profile", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def _setup_logging():
    level = os.environ.get("CBF_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (errors.ThresholdUnset, errors.EmptyProfile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (errors.ParseError, errors.CorruptDocument, errors.VersionMismatch,
            errors.BadMagic, errors.TruncatedRecord, errors.TruncatedHeader,
            errors.NotIpv4) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (errors.InvalidConfig, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

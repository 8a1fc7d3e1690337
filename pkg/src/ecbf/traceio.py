"""Trace ingestion and emission (CSV, classic pcap) and seeded traffic synthesis.

Synthetic traces use numpy's PCG64 bit generator seeded directly with the
configured 64-bit seed (``numpy.random.Generator(PCG64(seed))``); numpy
keeps that stream stable across releases, so a (config, seed) pair always
yields the same bytes.
"""

from __future__ import annotations

import csv
import enum
import ipaddress
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import (BadMagic, InvalidConfig, NonMonotoneTimestamp, ParseError,
                     TruncatedRecord)
from .packet import PROTO_TCP, PROTO_UDP, PacketFields, RawPacket, build_packet

TRACE_COLUMNS = ("index", "ts", "src_addr", "dst_addr", "protocol", "ttl", "tos",
                 "total_length", "src_port", "dst_port", "tcp_flags", "label")
PERIOD_COLUMNS = ("start_ts", "end_ts", "period")


class Label(str, enum.Enum):
    LEGIT = "legit"
    ATTACK = "attack"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TraceRecord:
    index: int
    ts: float
    fields: PacketFields
    label: Label = Label.UNKNOWN

    def to_raw(self) -> RawPacket:
        return RawPacket(build_packet(self.fields, self.index & 0xFFFF), self.ts)


def _ip(s: str) -> int:
    return int(ipaddress.IPv4Address(s))


def _opt_int(s: str):
    return int(s) if s != "" else None


def format_ts(ts: float) -> str:
    return f"{ts:.6f}"


# --------------------------------------------------------------------------
# CSV traces

def read_trace_csv(path) -> Iterator[TraceRecord]:
    """Stream records from a trace CSV, validating order as it goes."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("missing header row", 1)
        if tuple(header) != TRACE_COLUMNS:
            raise ParseError(f"unexpected header {header}", 1)
        prev_index, prev_ts = None, None
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(TRACE_COLUMNS):
                raise ParseError(f"expected {len(TRACE_COLUMNS)} columns, got {len(row)}", line)
            try:
                index, ts = int(row[0]), float(row[1])
                f = PacketFields(
                    src_addr=_ip(row[2]), dst_addr=_ip(row[3]),
                    protocol=int(row[4]), ttl=int(row[5]), tos=int(row[6]),
                    total_length=int(row[7]), src_port=_opt_int(row[8]),
                    dst_port=_opt_int(row[9]), tcp_flags=_opt_int(row[10]))
                label = Label(row[11])
            except ValueError as exc:
                raise ParseError(str(exc), line) from None
            if prev_index is not None and index <= prev_index:
                raise ParseError(f"index {index} does not increase", line)
            if prev_ts is not None and ts < prev_ts:
                raise NonMonotoneTimestamp(f"ts {row[1]} earlier than {prev_ts}", line)
            prev_index, prev_ts = index, ts
            yield TraceRecord(index, ts, f, label)


def _row(r: TraceRecord) -> list[str]:
    f = r.fields

    def opt(v):
        return "" if v is None else str(v)

    return [str(r.index), format_ts(r.ts), str(ipaddress.IPv4Address(f.src_addr)),
            str(ipaddress.IPv4Address(f.dst_addr)), str(f.protocol), str(f.ttl),
            str(f.tos), str(f.total_length), opt(f.src_port), opt(f.dst_port),
            opt(f.tcp_flags), Label(r.label).value]


def write_trace_csv(records: Iterable[TraceRecord], path) -> int:
    """Write records to ``path`` (a filename, or an open text stream)."""
    if hasattr(path, "write"):
        return _write_rows(records, path)
    with open(path, "w", newline="") as fh:
        return _write_rows(records, fh)


def _write_rows(records, fh) -> int:
    n = 0
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in records:
        w.writerow(_row(r))
        n += 1
    return n


# --------------------------------------------------------------------------
# period declarations

@dataclass(frozen=True)
class PeriodInterval:
    start_ts: float
    end_ts: float
    period: str  # "attack" | "nonattack"


def read_periods_csv(path) -> list[PeriodInterval]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != PERIOD_COLUMNS:
            raise ParseError(f"periods file needs header {','.join(PERIOD_COLUMNS)}", 1)
        for row in reader:
            if not row:
                continue
            try:
                start, end, kind = float(row[0]), float(row[1]), row[2].strip().lower()
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), reader.line_num) from None
            if kind not in ("attack", "nonattack"):
                raise ParseError(f"unknown period {row[2]!r}", reader.line_num)
            if end < start:
                raise ParseError("end_ts before start_ts", reader.line_num)
            out.append(PeriodInterval(start, end, kind))
    out.sort(key=lambda p: p.start_ts)
    for a, b in zip(out, out[1:]):
        if b.start_ts < a.end_ts:
            raise InvalidConfig(f"periods overlap at ts={b.start_ts}")
    return out


def write_periods_csv(intervals: Iterable[PeriodInterval], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERIOD_COLUMNS)
        for p in intervals:
            w.writerow([format_ts(p.start_ts), format_ts(p.end_ts), p.period])


def period_at(intervals: list[PeriodInterval], ts: float) -> PeriodInterval:
    """Interval containing ``ts``; intervals are half open except the last one."""
    for k, p in enumerate(intervals):
        last = k == len(intervals) - 1
        if p.start_ts <= ts < p.end_ts or (last and ts == p.end_ts):
            return p
        if ts == p.end_ts and k + 1 < len(intervals) and intervals[k + 1].start_ts > ts:
            return p
    raise InvalidConfig(f"no period covers ts={ts}")


# --------------------------------------------------------------------------
# classic pcap

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_VLAN = 0x8100


class PcapReader:
    """Iterate the IPv4 packets of a classic pcap file.

    Non-IPv4 records are skipped and counted in ``skipped``.
    """

    def __init__(self, path):
        self.path = path
        self.skipped = 0
        self.records = 0
        with open(path, "rb") as fh:
            self._data = fh.read()
        if len(self._data) < 24:
            raise TruncatedRecord("file shorter than the pcap global header")
        magic = struct.unpack_from("<I", self._data)[0]
        if magic == PCAP_MAGIC:
            self.endian = "<"
        elif magic == PCAP_MAGIC_SWAPPED:
            self.endian = ">"
        else:
            raise BadMagic(f"unrecognized pcap magic 0x{magic:08x}")
        (_, self.version_major, self.version_minor, _, _, self.snaplen,
         self.linktype) = struct.unpack_from(self.endian + "IHHiIII", self._data)
        if self.linktype not in (LINKTYPE_ETHERNET, LINKTYPE_RAW):
            raise BadMagic(f"unsupported linktype {self.linktype}")

    def __iter__(self) -> Iterator[RawPacket]:
        data, off = self._data, 24
        rec = struct.Struct(self.endian + "IIII")
        while off < len(data):
            if off + 16 > len(data):
                raise TruncatedRecord(f"record header at offset {off} is cut short")
            ts_sec, ts_usec, incl, _orig = rec.unpack_from(data, off)
            off += 16
            if off + incl > len(data):
                raise TruncatedRecord(f"record at offset {off - 16} claims {incl} octets")
            frame = data[off:off + incl]
            off += incl
            self.records += 1
            payload = self._ipv4_payload(frame)
            if payload is None:
                self.skipped += 1
                continue
            yield RawPacket(payload, ts_sec + ts_usec / 1e6)

    def _ipv4_payload(self, frame: bytes) -> bytes | None:
        if self.linktype == LINKTYPE_ETHERNET:
            if len(frame) < 14:
                return None
            etype, off = struct.unpack_from("!H", frame, 12)[0], 14
            if etype == ETHERTYPE_VLAN and len(frame) >= 18:
                etype, off = struct.unpack_from("!H", frame, 16)[0], 18
            if etype != ETHERTYPE_IPV4:
                return None
            frame = frame[off:]
        if not frame or frame[0] >> 4 != 4:
            return None
        return frame


def read_pcap(path) -> Iterator[RawPacket]:
    return iter(PcapReader(path))


def write_pcap(packets: Iterable[RawPacket], path, *, linktype: int = LINKTYPE_RAW,
               big_endian: bool = False, snaplen: int = 65535) -> int:
    """Write packets as a classic pcap; Ethernet linktype gets a zeroed MAC frame."""
    e = ">" if big_endian else "<"
    n = 0
    with open(path, "wb") as fh:
        fh.write(struct.pack(e + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, snaplen, linktype))
        for p in packets:
            frame = p.data
            if linktype == LINKTYPE_ETHERNET:
                frame = b"\x00" * 12 + struct.pack("!H", ETHERTYPE_IPV4) + frame
            orig = len(frame)
            if len(p.data) >= 4 and p.data[0] >> 4 == 4:
                ip_len = struct.unpack_from("!H", p.data, 2)[0]
                orig = max(orig, len(frame) - len(p.data) + ip_len)
            usec_total = round(p.ts * 1_000_000)
            fh.write(struct.pack(e + "IIII", usec_total // 1_000_000,
                                 usec_total % 1_000_000, len(frame), orig))
            fh.write(frame)
            n += 1
    return n


# --------------------------------------------------------------------------
# synthetic traffic

@dataclass(frozen=True)
class FlowTemplate:
    src_prefix: str  # a /24, e.g. "10.20.0.0"
    ttls: tuple[int, ...]
    dst_ports: tuple[int, ...]
    protocol: int
    length_ranges: tuple[tuple[int, int], ...]
    tos: int = 0
    tcp_flags: tuple[int, ...] = (0x02, 0x10, 0x18)


# lengths come from three length buckets (floor(len / 256) = 0, 2, 5)
_SMALL, _MID, _LARGE = (40, 255), (512, 767), (1280, 1500)

DEFAULT_LEGIT_MODEL: tuple[FlowTemplate, ...] = (
    FlowTemplate("10.20.0.0", (64,), (80, 443), PROTO_TCP, (_SMALL, _LARGE)),
    FlowTemplate("10.21.13.0", (63, 64), (443,), PROTO_TCP, (_SMALL, _MID)),
    FlowTemplate("10.22.26.0", (128,), (80,), PROTO_TCP, (_LARGE,)),
    FlowTemplate("10.23.39.0", (62, 63), (22,), PROTO_TCP, (_SMALL,)),
    FlowTemplate("10.24.52.0", (64,), (443, 80), PROTO_TCP, (_MID, _LARGE)),
    FlowTemplate("10.25.65.0", (128, 64), (443,), PROTO_TCP, (_SMALL, _LARGE)),
    FlowTemplate("10.26.78.0", (63,), (80, 22), PROTO_TCP, (_SMALL, _MID)),
    FlowTemplate("10.27.91.0", (64,), (53,), PROTO_UDP, (_SMALL,), tcp_flags=()),
    FlowTemplate("10.28.104.0", (128,), (123,), PROTO_UDP, (_SMALL,), tcp_flags=()),
    FlowTemplate("10.29.117.0", (62, 64), (53, 123), PROTO_UDP, (_SMALL, _MID), tcp_flags=()),
)

DEFAULT_VICTIM = "192.0.2.10"

# raw fields copied by attack-mimic(k), in default-schema attribute order
MIMIC_FIELDS = ("protocol", "ttl", "src_addr", "dst_port", "tcp_flags",
                "total_length", "tos")

GENERATOR_MODES = ("legit", "attack-random", "attack-mimic")


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str = "legit"
    count: int = 0
    seed: int = 0
    rate: float = 1000.0
    mimic_k: int = 0
    legit_model: tuple[FlowTemplate, ...] = field(default=DEFAULT_LEGIT_MODEL)
    victim: str = DEFAULT_VICTIM

    def validate(self) -> None:
        if self.mode not in GENERATOR_MODES:
            raise InvalidConfig(f"unknown mode {self.mode!r}")
        if self.count < 0:
            raise InvalidConfig(f"count must be >= 0, got {self.count}")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        if not self.rate > 0:
            raise InvalidConfig("rate must be positive")
        if self.mode == "attack-mimic" and not 0 <= self.mimic_k < len(MIMIC_FIELDS):
            raise InvalidConfig(f"mimic k must lie in [0, {len(MIMIC_FIELDS) - 1}]")
        if self.mode != "attack-random" and not self.legit_model:
            raise InvalidConfig("legit_model is empty")


def _pick(options, u):
    return options[min(int(u * len(options)), len(options) - 1)]


def _min_length(proto: int) -> int:
    return 40 if proto == PROTO_TCP else 28 if proto == PROTO_UDP else 20


def _legit_draws(rng, n):
    return {
        "tmpl": rng.integers(0, 2**31, n), "host": rng.integers(1, 255, n),
        "u": rng.random((5, n)), "sport": rng.integers(1024, 65536, n),
    }


def _random_draws(rng, n):
    return {
        "proto": rng.integers(0, 256, n), "ttl": rng.integers(0, 256, n),
        "tos": rng.integers(0, 256, n), "src": rng.integers(0, 2**32, n, dtype=np.uint64),
        "sport": rng.integers(0, 65536, n), "dport": rng.integers(0, 65536, n),
        "flags": rng.integers(0, 256, n), "ulen": rng.random(n),
    }


def _legit_fields(model, victim, d, j) -> dict:
    t = model[int(d["tmpl"][j]) % len(model)]
    u = d["u"][:, j]
    lo, hi = _pick(t.length_ranges, u[3])
    tcp = t.protocol == PROTO_TCP
    return {
        "protocol": t.protocol, "ttl": _pick(t.ttls, u[0]),
        "src_addr": _ip(t.src_prefix) | int(d["host"][j]), "dst_addr": victim,
        "src_port": int(d["sport"][j]), "dst_port": _pick(t.dst_ports, u[1]),
        "tcp_flags": _pick(t.tcp_flags, u[2]) if tcp and t.tcp_flags else (0 if tcp else None),
        "total_length": lo + min(int(u[4] * (hi - lo + 1)), hi - lo), "tos": t.tos,
    }


def _random_fields(d, j, protocol=None) -> dict:
    proto = int(d["proto"][j]) if protocol is None else protocol
    lo = _min_length(proto)
    return {
        "protocol": proto, "ttl": int(d["ttl"][j]), "src_addr": int(d["src"][j]),
        "src_port": int(d["sport"][j]), "dst_port": int(d["dport"][j]),
        "tcp_flags": int(d["flags"][j]), "tos": int(d["tos"][j]),
        "total_length": lo + min(int(d["ulen"][j] * (65536 - lo)), 65535 - lo),
    }


def _finish(vals: dict, victim: int) -> PacketFields:
    proto = vals["protocol"]
    has_ports = proto in (PROTO_TCP, PROTO_UDP)
    return PacketFields(
        protocol=proto, ttl=vals["ttl"], tos=vals["tos"],
        total_length=max(vals["total_length"], _min_length(proto)),
        src_addr=vals["src_addr"], dst_addr=victim,
        src_port=vals["src_port"] if has_ports else None,
        dst_port=vals["dst_port"] if has_ports else None,
        tcp_flags=vals["tcp_flags"] if proto == PROTO_TCP else None,
    )


def generate_trace(config: GeneratorConfig, start_index: int = 0) -> list[TraceRecord]:
    """Synthesize ``config.count`` labeled records with ts = index / rate."""
    config.validate()
    n = config.count
    rng = np.random.Generator(np.random.PCG64(config.seed))
    victim = _ip(config.victim)
    model = config.legit_model
    legit = _legit_draws(rng, n) if config.mode != "attack-random" else None
    rand = _random_draws(rng, n) if config.mode != "legit" else None
    label = Label.LEGIT if config.mode == "legit" else Label.ATTACK
    out = []
    for j in range(n):
        if config.mode == "legit":
            vals = _legit_fields(model, victim, legit, j)
        elif config.mode == "attack-random":
            vals = _random_fields(rand, j)
        else:
            lv = _legit_fields(model, victim, legit, j)
            copied = MIMIC_FIELDS[:config.mimic_k]
            proto = lv["protocol"] if "protocol" in copied else None
            vals = _random_fields(rand, j, proto)
            for name in copied:
                vals[name] = lv[name]
            if "src_port" in lv and "protocol" in copied:
                vals["src_port"] = lv["src_port"]
        idx = start_index + j
        out.append(TraceRecord(idx, idx / config.rate, _finish(vals, victim), label))
    return out


def concat_traces(*segments: GeneratorConfig) -> list[TraceRecord]:
    """Generate segments back to back with continuous indices and timestamps."""
    out: list[TraceRecord] = []
    rates = {s.rate for s in segments}
    if len(rates) > 1:
        raise InvalidConfig("segments must share one rate")
    for s in segments:
        out.extend(generate_trace(s, start_index=len(out)))
    return out

"""IPv4 header parsing, attribute extraction and confidence-option rewriting.

All multi-octet fields are big-endian (network order). Buffers start at the
IPv4 version nibble; link-layer framing is removed by the trace readers.

The confidence value travels in a single 32-bit option word::

    0x5E  0x04  hi  lo

0x5E is option class 2 (debugging/measurement), number 30 (experimental),
copied flag clear. ``hi lo`` is the confidence as unsigned Q0.16 with
denominator 65535, so 0.0 and 1.0 are both exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

from .errors import (BadChecksum, MalformedOptions, NoHeaderRoom, NotIpv4,
                     OutOfRange, SchemaMismatch, TruncatedHeader)

PROTO_TCP = 6
PROTO_UDP = 17

OPT_CONFIDENCE = 0x5E
OPT_CONFIDENCE_LEN = 4
Q16_SCALE = 65535

#: Reserved attribute value for fields a packet does not carry.
NONE = "none"

_HDR = struct.Struct("!BBHHHBBH4s4s")


def ones_complement_sum(data: bytes) -> int:
    """16-bit ones-complement sum of ``data`` (odd length is zero padded)."""
    if len(data) % 2:
        data = data + b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def ipv4_checksum(header: bytes) -> int:
    """Checksum to store in a header whose checksum field is currently zero."""
    return ~ones_complement_sum(header) & 0xFFFF


@dataclass(frozen=True)
class RawPacket:
    data: bytes
    ts: float = 0.0


@dataclass(frozen=True)
class Ipv4Header:
    version: int
    ihl: int
    tos: int
    total_length: int
    identification: int
    flags: int
    fragment_offset: int
    ttl: int
    protocol: int
    checksum: int
    src_addr: int
    dst_addr: int
    options: bytes = b""

    @property
    def header_len(self) -> int:
        return 4 * self.ihl


@dataclass(frozen=True)
class Transport:
    src_port: int
    dst_port: int
    tcp_flags: int | None = None


@dataclass(frozen=True)
class ParsedPacket:
    header: Ipv4Header
    transport: Transport | None
    checksum_ok: bool
    payload: bytes = b""


def parse_ipv4(raw: Union[RawPacket, bytes], strict: bool = False) -> ParsedPacket:
    """Parse an IPv4 header and, for TCP/UDP, the port/flag summary.

    Checksum errors are only raised when ``strict`` is set; otherwise the
    result carries ``checksum_ok`` so callers can decide.
    """
    data = raw.data if isinstance(raw, RawPacket) else bytes(raw)
    if len(data) < 20:
        raise TruncatedHeader(f"{len(data)} octets, need at least 20")
    version = data[0] >> 4
    if version != 4:
        raise NotIpv4(f"version nibble is {version}")
    ihl = data[0] & 0x0F
    if ihl < 5:
        raise TruncatedHeader(f"ihl={ihl} is below the 5-word minimum")
    hl = 4 * ihl
    if len(data) < hl:
        raise TruncatedHeader(f"ihl={ihl} needs {hl} octets, have {len(data)}")

    (_, tos, total_length, ident, flags_frag, ttl, proto, csum,
     src, dst) = _HDR.unpack_from(data)
    if total_length < hl:
        raise TruncatedHeader(f"total_length {total_length} < header length {hl}")
    checksum_ok = ones_complement_sum(data[:hl]) == 0xFFFF
    if strict and not checksum_ok:
        raise BadChecksum(f"header checksum 0x{csum:04x} does not verify")

    header = Ipv4Header(
        version=version, ihl=ihl, tos=tos, total_length=total_length,
        identification=ident, flags=flags_frag >> 13,
        fragment_offset=flags_frag & 0x1FFF, ttl=ttl, protocol=proto,
        checksum=csum, src_addr=int.from_bytes(src, "big"),
        dst_addr=int.from_bytes(dst, "big"), options=data[20:hl],
    )
    payload = data[hl:]
    transport = None
    if proto == PROTO_TCP and len(payload) >= 14:
        sport, dport = struct.unpack_from("!HH", payload)
        transport = Transport(sport, dport, payload[13])
    elif proto == PROTO_UDP and len(payload) >= 4:
        sport, dport = struct.unpack_from("!HH", payload)
        transport = Transport(sport, dport)
    return ParsedPacket(header, transport, checksum_ok, payload)


@dataclass(frozen=True)
class PacketFields:
    """Header fields the attribute schema can draw from.

    This is also the row shape of CSV traces; ports and TCP flags are
    ``None`` when the packet does not carry them.
    """

    protocol: int
    ttl: int
    tos: int
    total_length: int
    src_addr: int
    dst_addr: int
    src_port: int | None = None
    dst_port: int | None = None
    tcp_flags: int | None = None

    @classmethod
    def from_parsed(cls, pkt: ParsedPacket) -> "PacketFields":
        h, t = pkt.header, pkt.transport
        return cls(
            protocol=h.protocol, ttl=h.ttl, tos=h.tos,
            total_length=h.total_length, src_addr=h.src_addr,
            dst_addr=h.dst_addr,
            src_port=t.src_port if t else None,
            dst_port=t.dst_port if t else None,
            tcp_flags=t.tcp_flags if t else None,
        )


def build_packet(f: PacketFields, identification: int = 0) -> bytes:
    """Serialize ``f`` as an IPv4 header plus a bare TCP/UDP header.

    The buffer is snapped after the transport header: ``total_length`` keeps
    the value from ``f`` even when it is larger than the returned buffer,
    the way a capture with a short snaplen looks.
    """
    if f.protocol == PROTO_TCP and f.src_port is not None:
        flags = f.tcp_flags or 0
        transport = struct.pack("!HHIIBBHHH", f.src_port, f.dst_port or 0,
                                0, 0, 5 << 4, flags, 0xFFFF, 0, 0)
    elif f.protocol == PROTO_UDP and f.src_port is not None:
        udp_len = max(8, min(0xFFFF, f.total_length - 20))
        transport = struct.pack("!HHHH", f.src_port, f.dst_port or 0, udp_len, 0)
    else:
        transport = b""
    total_length = f.total_length
    if total_length < 20:
        raise OutOfRange(f"total_length {total_length} cannot hold an IPv4 header")
    hdr = bytearray(_HDR.pack(0x45, f.tos, total_length, identification, 0,
                              f.ttl, f.protocol, 0,
                              f.src_addr.to_bytes(4, "big"),
                              f.dst_addr.to_bytes(4, "big")))
    struct.pack_into("!H", hdr, 10, ipv4_checksum(bytes(hdr)))
    return bytes(hdr) + transport


# --------------------------------------------------------------------------
# attribute schema

_FIELDS = ("protocol", "ttl", "tos", "total_length", "src_addr", "dst_addr",
           "src_port", "dst_port", "tcp_flags")


def make_discretizer(spec: str) -> Callable[[int], int]:
    """Build a raw-value -> discrete-value map from its textual id.

    ``identity``, ``prefix:B`` (top B bits of a 32-bit address),
    ``bucket:W`` (floor division by W) and ``mask:B`` (low B bits).
    """
    kind, _, arg = spec.partition(":")
    if kind == "identity" and not arg:
        return lambda v: v
    try:
        p = int(arg)
    except ValueError:
        raise ValueError(f"bad discretizer {spec!r}") from None
    if kind == "prefix" and 0 < p <= 32:
        shift = 32 - p
        return lambda v: v >> shift
    if kind == "bucket" and p > 0:
        return lambda v: v // p
    if kind == "mask" and p > 0:
        m = (1 << p) - 1
        return lambda v: v & m
    raise ValueError(f"bad discretizer {spec!r}")


@dataclass(frozen=True)
class AttributeDef:
    name: str
    field: str
    discretizer: str = "identity"

    def __post_init__(self):
        if self.field not in _FIELDS:
            raise ValueError(f"unknown packet field {self.field!r}")
        make_discretizer(self.discretizer)


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple[AttributeDef, ...]
    pairs: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = ()
    _maps: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        attrs = tuple(self.attributes)
        n = len(attrs)
        if n < 2:
            raise ValueError("a schema needs at least two attributes")
        pairs = tuple(self.pairs) or tuple(
            (r, s) for r in range(n) for s in range(r + 1, n))
        norm = []
        for r, s in pairs:
            if not (0 <= r < n and 0 <= s < n) or r == s:
                raise ValueError(f"bad attribute pair {(r, s)}")
            norm.append((min(r, s), max(r, s)))
        if len(set(norm)) != len(norm):
            raise ValueError("duplicate attribute pair")
        weights = tuple(float(w) for w in self.weights) or (1.0,) * len(norm)
        if len(weights) != len(norm) or min(weights) < 0 or sum(weights) <= 0:
            raise ValueError("weights must be non-negative, one per pair, sum > 0")
        object.__setattr__(self, "attributes", attrs)
        object.__setattr__(self, "pairs", tuple(norm))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "_maps", tuple(
            (a.field, make_discretizer(a.discretizer)) for a in attrs))

    @property
    def n(self) -> int:
        return len(self.attributes)

    def to_dict(self) -> dict:
        return {
            "attributes": [{"name": a.name, "field": a.field,
                            "discretizer": a.discretizer} for a in self.attributes],
            "pairs": [list(p) for p in self.pairs],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSchema":
        return cls(
            attributes=tuple(AttributeDef(**a) for a in d["attributes"]),
            pairs=tuple(tuple(p) for p in d["pairs"]),
            weights=tuple(d["weights"]),
        )


def default_schema() -> AttributeSchema:
    """Seven network/transport attributes with all 21 pairs, uniform weights."""
    return AttributeSchema((
        AttributeDef("protocol", "protocol"),
        AttributeDef("ttl", "ttl"),
        AttributeDef("src_prefix24", "src_addr", "prefix:24"),
        AttributeDef("dst_port", "dst_port"),
        AttributeDef("tcp_flags", "tcp_flags", "mask:6"),
        AttributeDef("length_bucket", "total_length", "bucket:256"),
        AttributeDef("tos", "tos"),
    ))


AttrValue = Union[int, str]
AttributeVector = tuple  # tuple[AttrValue, ...], length schema.n


def extract_attributes(pkt: Union[ParsedPacket, PacketFields],
                       schema: AttributeSchema) -> AttributeVector:
    """Map a parsed packet (or CSV field row) to one discrete value per attribute."""
    if isinstance(pkt, ParsedPacket):
        pkt = PacketFields.from_parsed(pkt)
    out = []
    for name, fn in schema._maps:
        raw = getattr(pkt, name)
        out.append(NONE if raw is None else fn(raw))
    return tuple(out)


def check_vector(attrs: Sequence, schema: AttributeSchema) -> None:
    if len(attrs) != schema.n:
        raise SchemaMismatch(
            f"attribute vector has {len(attrs)} values, schema has {schema.n}")


# --------------------------------------------------------------------------
# confidence option

def encode_confidence_option(conf: float) -> bytes:
    if not 0.0 <= conf <= 1.0:  # also rejects NaN
        raise OutOfRange(f"confidence {conf!r} outside [0, 1]")
    q = round(conf * Q16_SCALE)
    return bytes((OPT_CONFIDENCE, OPT_CONFIDENCE_LEN, q >> 8, q & 0xFF))


def decode_confidence_option(options: bytes) -> float | None:
    """Return the confidence carried in an options block, or None.

    End-of-list octets are stepped over like padding, because the
    confidence word is appended after whatever options already exist.
    When several confidence options are present the last one wins.
    """
    found = None
    i, end = 0, len(options)
    while i < end:
        kind = options[i]
        if kind in (0, 1):
            i += 1
            continue
        if i + 1 >= end:
            raise MalformedOptions(f"option 0x{kind:02x} at offset {i} has no length octet")
        length = options[i + 1]
        if length < 2 or i + length > end:
            raise MalformedOptions(
                f"option 0x{kind:02x} at offset {i} claims length {length}")
        if kind == OPT_CONFIDENCE and length == OPT_CONFIDENCE_LEN:
            found = ((options[i + 2] << 8) | options[i + 3]) / Q16_SCALE
        i += length
    return found


def rewrite_header_with_option(raw: Union[RawPacket, bytes], conf: float) -> RawPacket:
    """Append the confidence option word, bump IHL and total length, fix checksum."""
    ts = raw.ts if isinstance(raw, RawPacket) else 0.0
    data = raw.data if isinstance(raw, RawPacket) else bytes(raw)
    h = parse_ipv4(data).header
    if h.ihl >= 15:
        raise NoHeaderRoom("ihl is already 15 words")
    if h.total_length + 4 > 0xFFFF:
        raise NoHeaderRoom("total_length would exceed 65535")
    opt = encode_confidence_option(conf)
    hl = h.header_len
    hdr = bytearray(data[:hl])
    hdr[0] = 0x40 | (h.ihl + 1)
    struct.pack_into("!H", hdr, 2, h.total_length + 4)
    struct.pack_into("!H", hdr, 10, 0)
    hdr += opt
    struct.pack_into("!H", hdr, 10, ipv4_checksum(bytes(hdr)))
    return RawPacket(bytes(hdr) + data[hl:], ts)

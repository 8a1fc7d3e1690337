import random
import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecbf import (NONE, PacketFields, RawPacket, build_packet,
                  decode_confidence_option, default_schema,
                  encode_confidence_option, extract_attributes, parse_ipv4,
                  rewrite_header_with_option)
from ecbf.errors import (BadChecksum, MalformedOptions, NoHeaderRoom, NotIpv4,
                         OutOfRange, TruncatedHeader)
from ecbf.packet import ipv4_checksum, ones_complement_sum
from tests.oracles import q16_half_up, rfc1071_sum

SAMPLE = bytes.fromhex("45 00 00 73 00 00 40 00 40 11 b8 61 c0 a8 00 01 c0 a8 00 c7")


def fuzz_packet(rng: random.Random, ihl: int, payload_len: int = 16) -> bytes:
    """Valid IPv4 header with well-formed options, followed by a payload."""
    opt_len = 4 * (ihl - 5)
    opts = bytearray()
    while len(opts) < opt_len:
        room = opt_len - len(opts)
        pick = rng.random()
        if pick < 0.3:
            opts.append(1)  # NOP
        elif pick < 0.7 and room >= 3:
            ln = rng.randint(3, min(room, 12))
            opts += bytes([0x44, ln]) + bytes(rng.getrandbits(8) for _ in range(ln - 2))
        else:
            opts += b"\x00" * room  # EOL then padding
    payload = bytes(rng.getrandbits(8) for _ in range(payload_len))
    hl = 4 * ihl
    total = rng.randint(hl + payload_len, 0xFFFF - 4)
    hdr = bytearray(struct.pack(
        "!BBHHHBBH4s4s", 0x40 | ihl, rng.getrandbits(8), total, rng.getrandbits(16),
        rng.getrandbits(16), rng.getrandbits(8), rng.getrandbits(8), 0,
        rng.getrandbits(32).to_bytes(4, "big"), rng.getrandbits(32).to_bytes(4, "big")))
    hdr += opts
    struct.pack_into("!H", hdr, 10, ipv4_checksum(bytes(hdr)))
    return bytes(hdr) + payload


def strip_option(data: bytes) -> bytes:
    """Undo a rewrite by hand: drop the last option word, restore ihl/length/checksum."""
    ihl = data[0] & 0xF
    hl = 4 * ihl
    hdr = bytearray(data[:hl - 4])
    hdr[0] = 0x40 | (ihl - 1)
    struct.pack_into("!H", hdr, 2, struct.unpack_from("!H", data, 2)[0] - 4)
    struct.pack_into("!H", hdr, 10, 0)
    csum = ~rfc1071_sum(bytes(hdr)) & 0xFFFF
    struct.pack_into("!H", hdr, 10, csum)
    return bytes(hdr) + data[hl:]


# -- checksum --------------------------------------------------------------

def test_sample_header_checksum_matches_rfc1071_oracle():
    assert rfc1071_sum(SAMPLE) == 0xFFFF
    p = parse_ipv4(RawPacket(SAMPLE))
    assert p.header.checksum == 0xB861
    assert p.checksum_ok


def test_ones_complement_sum_agrees_with_oracle():
    rng = random.Random(7)
    for _ in range(300):
        data = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 61)))
        assert ones_complement_sum(data) == rfc1071_sum(data)


# -- parse ----------------------------------------------------------------

def test_minimal_header_parses_with_empty_options():
    f = PacketFields(protocol=1, ttl=9, tos=0, total_length=20, src_addr=1, dst_addr=2)
    p = parse_ipv4(build_packet(f))
    assert p.header.ihl == 5 and p.header.options == b""
    assert p.transport is None and p.checksum_ok


def test_short_input_is_truncated():
    with pytest.raises(TruncatedHeader):
        parse_ipv4(SAMPLE[:19])


def test_ihl_beyond_buffer_is_truncated():
    data = bytes([0x46]) + SAMPLE[1:]
    with pytest.raises(TruncatedHeader):
        parse_ipv4(data)


def test_version_six_rejected():
    with pytest.raises(NotIpv4):
        parse_ipv4(bytes([0x65]) + SAMPLE[1:])


def test_bad_checksum_lenient_by_default_strict_on_request():
    bad = SAMPLE[:10] + b"\x00\x00" + SAMPLE[12:]
    assert parse_ipv4(bad).checksum_ok is False
    with pytest.raises(BadChecksum):
        parse_ipv4(bad, strict=True)


def test_transport_summary_tcp_and_udp():
    tcp = PacketFields(6, 64, 0, 60, 0x0A000001, 0x0A000002, 1234, 80, 0x12)
    p = parse_ipv4(build_packet(tcp))
    assert (p.transport.src_port, p.transport.dst_port, p.transport.tcp_flags) == (1234, 80, 0x12)
    udp = PacketFields(17, 64, 0, 60, 1, 2, 5353, 53)
    p = parse_ipv4(build_packet(udp))
    assert p.transport.dst_port == 53 and p.transport.tcp_flags is None


def test_tcp_without_enough_payload_has_no_transport():
    f = PacketFields(6, 64, 0, 20, 1, 2)
    p = parse_ipv4(build_packet(f))
    assert p.transport is None


# -- attributes -------------------------------------------------------------

def test_default_discretizers():
    schema = default_schema()
    names = [a.name for a in schema.attributes]
    f = PacketFields(protocol=17, ttl=64, tos=0, total_length=700,
                     src_addr=0xC0A80107, dst_addr=1, src_port=1000, dst_port=53)
    a = dict(zip(names, extract_attributes(f, schema)))
    assert a["ttl"] == 64
    assert a["tcp_flags"] == NONE
    assert a["length_bucket"] == 2
    assert a["src_prefix24"] == 0xC0A801
    assert len(schema.pairs) == 21


def test_extract_is_pure():
    raw = build_packet(PacketFields(6, 64, 0, 100, 7, 8, 1, 2, 0x18))
    s = default_schema()
    assert extract_attributes(parse_ipv4(raw), s) == extract_attributes(parse_ipv4(raw), s)


# -- option encoding ----------------------------------------------------------

@pytest.mark.parametrize("conf,expected", [
    (0.0, b"\x5e\x04\x00\x00"),
    (1.0, b"\x5e\x04\xff\xff"),
    (0.5, b"\x5e\x04\x80\x00"),
])
def test_encode_values(conf, expected):
    assert encode_confidence_option(conf) == expected


def test_half_encodes_like_half_up_oracle():
    assert q16_half_up(0.5) == 32768
    assert encode_confidence_option(0.5)[2:] == (32768).to_bytes(2, "big")


@pytest.mark.parametrize("bad", [-0.01, 1.0001, float("nan")])
def test_encode_rejects_out_of_range(bad):
    with pytest.raises(OutOfRange):
        encode_confidence_option(bad)


def test_decode_basic():
    assert decode_confidence_option(b"\x5e\x04\xff\xff") == 1.0
    assert decode_confidence_option(b"") is None
    assert decode_confidence_option(b"\x01\x01\x44\x03\x00\x00") is None


def test_decode_malformed():
    with pytest.raises(MalformedOptions):
        decode_confidence_option(b"\x44\x09\x00")
    with pytest.raises(MalformedOptions):
        decode_confidence_option(b"\x44")


def test_roundtrip_grid():
    bound = 1 / 131070
    for k in range(10_000):
        c = k / 9999
        assert abs(decode_confidence_option(encode_confidence_option(c)) - c) <= bound


@given(st.floats(min_value=0.0, max_value=1.0))
def test_roundtrip_property(c):
    assert abs(decode_confidence_option(encode_confidence_option(c)) - c) <= 1 / 131070


# -- rewrite -------------------------------------------------------------------

def test_rewrite_minimal_header():
    raw = build_packet(PacketFields(17, 64, 0, 48, 1, 2, 10, 53))
    out = rewrite_header_with_option(RawPacket(raw, 3.5), 0.0)
    p = parse_ipv4(out)
    assert p.header.ihl == 6
    assert p.header.total_length == 52
    assert p.header.options == b"\x5e\x04\x00\x00"
    assert p.checksum_ok and rfc1071_sum(out.data[:24]) == 0xFFFF
    assert out.ts == 3.5


def test_rewrite_full_header_raises():
    rng = random.Random(3)
    with pytest.raises(NoHeaderRoom):
        rewrite_header_with_option(fuzz_packet(rng, 15), 0.5)


def test_rewrite_not_ipv4():
    with pytest.raises(NotIpv4):
        rewrite_header_with_option(bytes([0x60]) + bytes(39), 0.5)


@settings(max_examples=200)
@given(seed=st.integers(0, 2**32 - 1), ihl=st.integers(5, 14),
       conf=st.floats(0.0, 1.0))
def test_rewrite_structural_delta_and_strip_roundtrip(seed, ihl, conf):
    rng = random.Random(seed)
    data = fuzz_packet(rng, ihl)
    out = rewrite_header_with_option(data, conf).data
    hl = 4 * ihl
    assert len(out) == len(data) + 4
    # untouched: tos, identification..protocol, addresses, old options, payload
    assert out[1] == data[1]
    assert out[4:10] == data[4:10]
    assert out[12:hl] == data[12:hl]
    assert out[hl + 4:] == data[hl:]
    assert out[hl] == 0x5E and out[hl + 1] == 4
    assert rfc1071_sum(out[:hl + 4]) == 0xFFFF
    p = parse_ipv4(out)
    assert abs(decode_confidence_option(p.header.options) - conf) <= 1 / 131070
    assert strip_option(out) == data

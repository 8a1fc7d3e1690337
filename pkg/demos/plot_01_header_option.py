"""
Carrying a confidence value in the IPv4 header
==============================================

A score in [0, 1] is packed into one extra 32-bit option word. The header
grows by one word (IHL + 1), total length grows by 4 and the checksum is
recomputed.
"""

from ecbf import (PacketFields, RawPacket, build_packet, decode_confidence_option,
                  encode_confidence_option, parse_ipv4, rewrite_header_with_option)
from ecbf.packet import ones_complement_sum

###############################################################################
# Build a plain UDP packet and look at its header.
fields = PacketFields(protocol=17, ttl=64, tos=0, total_length=76,
                      src_addr=0x0A1B5B07, dst_addr=0xC000020A,
                      src_port=40000, dst_port=53)
pkt = RawPacket(build_packet(fields), ts=0.0)
h = parse_ipv4(pkt).header
print("before: ihl", h.ihl, "total_length", h.total_length, "checksum 0x%04x" % h.checksum)

###############################################################################
# The option word: type 0x5E, length 4, then the value in Q0.16.
for c in (0.0, 0.5, 0.8125, 1.0):
    print(c, encode_confidence_option(c).hex(" "))

###############################################################################
# Rewrite the packet with a score of 0.8125 and verify the result.
out = rewrite_header_with_option(pkt, 0.8125)
parsed = parse_ipv4(out)
print("after:  ihl", parsed.header.ihl, "total_length", parsed.header.total_length,
      "checksum ok", parsed.checksum_ok)
print("ones-complement sum over header: 0x%04x" % ones_complement_sum(out.data[:24]))
print("decoded confidence:", decode_confidence_option(parsed.header.options))
print("payload untouched:", out.data[24:] == pkt.data[20:])

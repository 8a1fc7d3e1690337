"""Enhanced confidence-based packet filtering against DDoS floods."""

from .confidence import (ConfidenceProfile, WindowCounter, close_window,
                         conf_pair, conf_single, load_profile, observe_packet,
                         save_profile, score_packet)
from .engine import (FilterDecision, FilterEngine, NominalProfile, Period,
                     PeriodState, Verdict, process_packet, reset, set_period)
from .packet import (NONE, AttributeDef, AttributeSchema, Ipv4Header,
                     PacketFields, ParsedPacket, RawPacket, Transport,
                     build_packet, decode_confidence_option, default_schema,
                     encode_confidence_option, extract_attributes, parse_ipv4,
                     rewrite_header_with_option)
from .report import EvalReport, evaluate
from .traceio import (GeneratorConfig, Label, TraceRecord, concat_traces,
                      generate_trace, read_pcap, read_trace_csv, write_pcap,
                      write_trace_csv)

__version__ = "0.1.0"

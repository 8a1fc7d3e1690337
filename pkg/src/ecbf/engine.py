"""Period-driven packet filter built on a confidence profile.

In a non-attack period every packet is scored, the nominal profile (the
lowest legitimate score seen so far) is updated, the score is written into
the packet header and the packet is learned. When an attack period is
declared the nominal profile value becomes the discarding threshold and
the profile is frozen; packets scoring strictly below it are dropped.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .confidence import ConfidenceProfile
from .errors import NoHeaderRoom, ThresholdUnset
from .packet import (AttributeSchema, PacketFields, RawPacket, default_schema,
                     extract_attributes, parse_ipv4, rewrite_header_with_option)

log = logging.getLogger(__name__)

ENGINE_SNAPSHOT_VERSION = 1


class Period(str, enum.Enum):
    NONATTACK = "nonattack"
    ATTACK = "attack"


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    DISCARD = "discard"


@dataclass
class PeriodState:
    kind: Period = Period.NONATTACK
    since_ts: float = 0.0


@dataclass
class NominalProfile:
    np: float | None = None
    updates: int = 0
    set_at_ts: float | None = None

    def offer(self, score: float, ts: float) -> bool:
        """Lower the running minimum to ``score`` if it is smaller (or unset)."""
        if self.np is None or score < self.np:
            self.np = score
            self.updates += 1
            self.set_at_ts = ts
            return True
        return False


@dataclass(frozen=True)
class FilterDecision:
    verdict: Verdict
    score: float
    period: Period
    rewritten: bool
    threshold_used: float | None
    ts: float = 0.0
    header_full: bool = False


def parse_threshold_strategy(text: str):
    """``min`` (running minimum) or ``percentile:Q`` with Q in [0, 100]."""
    if text == "min":
        return "min"
    kind, _, arg = text.partition(":")
    if kind == "percentile":
        q = float(arg)
        if 0.0 <= q <= 100.0:
            return ("percentile", q)
    raise ValueError(f"bad threshold strategy {text!r}")


@dataclass
class FilterEngine:
    profile: ConfidenceProfile = field(
        default_factory=lambda: ConfidenceProfile(default_schema()))
    np_reset_on_nonattack: bool = False
    threshold_strategy: object = "min"
    score_mode: str = "mean"

    def __post_init__(self):
        if isinstance(self.threshold_strategy, str):
            self.threshold_strategy = parse_threshold_strategy(self.threshold_strategy)
        self.period = PeriodState()
        self.nominal = NominalProfile()
        self.threshold: float | None = None
        # only kept for the percentile extension
        self._nonattack_scores: list[float] = []

    @property
    def schema(self) -> AttributeSchema:
        return self.profile.schema

    def _compute_threshold(self) -> float | None:
        if self.threshold_strategy == "min":
            return self.nominal.np
        _, q = self.threshold_strategy
        if not self._nonattack_scores:
            return None
        return float(np.percentile(self._nonattack_scores, q))

    def set_period(self, kind: Period | str, ts: float = 0.0) -> None:
        kind = Period(kind)
        prev = self.period.kind
        if kind == prev == Period.ATTACK:
            return  # still the same attack period: threshold stays frozen
        self.period = PeriodState(kind, ts)
        if kind == Period.ATTACK:
            if self.profile.open_window.n_total:
                self.profile.close_window()
            self.threshold = self._compute_threshold()
            log.info("attack period from ts=%s, threshold=%s", ts, self.threshold)
        else:
            self.threshold = None
            if prev == Period.ATTACK and self.np_reset_on_nonattack:
                self.nominal = NominalProfile()
                self._nonattack_scores = []
            log.info("non-attack period from ts=%s", ts)

    def attributes_of(self, raw: RawPacket):
        return extract_attributes(PacketFields.from_parsed(parse_ipv4(raw)), self.schema)

    def process_packet(self, raw: RawPacket) -> tuple[FilterDecision, RawPacket | None]:
        """Run one packet through the algorithm for the current period.

        Returns the decision and the packet to forward (rewritten in a
        non-attack period, unchanged when accepted under attack, None when
        discarded).
        """
        attrs = self.attributes_of(raw)
        ts = raw.ts
        if self.period.kind == Period.NONATTACK:
            s = 1.0 if self.profile.is_empty else self.profile.score(attrs, self.score_mode)
            self.nominal.offer(s, ts)
            if self.threshold_strategy != "min":
                self._nonattack_scores.append(s)
            try:
                out = rewrite_header_with_option(raw, min(s, 1.0))
                rewritten, full = True, False
            except NoHeaderRoom:
                out, rewritten, full = raw, False, True
            self.profile.observe(attrs, ts)
            return FilterDecision(Verdict.ACCEPT, s, Period.NONATTACK, rewritten,
                                  None, ts, full), out

        if self.threshold is None:
            raise ThresholdUnset(ts)
        s = self.profile.score(attrs, self.score_mode)
        if s < self.threshold:
            return FilterDecision(Verdict.DISCARD, s, Period.ATTACK, False,
                                  self.threshold, ts), None
        return FilterDecision(Verdict.ACCEPT, s, Period.ATTACK, False,
                              self.threshold, ts), raw

    def reset(self) -> None:
        p = self.profile
        self.profile = ConfidenceProfile(p.schema, decay=p.decay,
                                         window_seconds=p.window_seconds,
                                         window_packets=p.window_packets)
        self.period = PeriodState()
        self.nominal = NominalProfile()
        self.threshold = None
        self._nonattack_scores = []

    def snapshot(self) -> dict:
        return {
            "engine_version": ENGINE_SNAPSHOT_VERSION,
            "period": self.period.kind.value,
            "np": self.nominal.np,
            "np_updates": self.nominal.updates,
            "threshold": self.threshold,
            "profile": self.profile.to_document(),
        }

    def __eq__(self, other):
        if not isinstance(other, FilterEngine):
            return NotImplemented
        return (self.profile == other.profile
                and self.profile.open_window == other.profile.open_window
                and self.period == other.period and self.nominal == other.nominal
                and self.threshold == other.threshold
                and self.threshold_strategy == other.threshold_strategy
                and self.np_reset_on_nonattack == other.np_reset_on_nonattack
                and self._nonattack_scores == other._nonattack_scores)


# functional spellings
def set_period(engine: FilterEngine, kind, ts: float = 0.0) -> FilterEngine:
    engine.set_period(kind, ts)
    return engine


def process_packet(engine: FilterEngine, raw: RawPacket):
    return engine.process_packet(raw)


def reset(engine: FilterEngine) -> FilterEngine:
    engine.reset()
    return engine

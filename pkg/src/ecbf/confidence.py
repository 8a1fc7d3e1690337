"""Windowed attribute / attribute-pair counters and the confidence queries over them.

Packets are counted into an open tumbling window. Closing the window folds
it into the cumulative aggregate (optionally decaying the old counts first),
and every confidence or score query reads the cumulative aggregate only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import (CorruptDocument, EmptyProfile, SchemaMismatch,
                     UnknownPair, VersionMismatch)
from .packet import AttributeSchema, check_vector

PROFILE_VERSION = 1
DEFAULT_WINDOW_SECONDS = 60.0
DEFAULT_WINDOW_PACKETS = 10_000

SCORE_MODES = ("mean", "sum", "min")


def value_key(v):
    """Sort key that orders integer values before the reserved string value."""
    return (1, v, 0) if isinstance(v, str) else (0, "", v)


@dataclass
class WindowCounter:
    n_schema: int
    n_pairs: int
    window_id: int = 0
    start_ts: float | None = None
    end_ts: float | None = None
    n_total: float = 0
    singles: list[dict] = field(default_factory=list)
    pairs: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if not self.singles:
            self.singles = [{} for _ in range(self.n_schema)]
        if not self.pairs:
            self.pairs = [{} for _ in range(self.n_pairs)]

    def add(self, attrs: Sequence, pair_index: Sequence[tuple[int, int]]) -> None:
        self.n_total += 1
        for i, v in enumerate(attrs):
            d = self.singles[i]
            d[v] = d.get(v, 0) + 1
        for k, (r, s) in enumerate(pair_index):
            d = self.pairs[k]
            key = (attrs[r], attrs[s])
            d[key] = d.get(key, 0) + 1

    def scale(self, factor: float) -> None:
        self.n_total *= factor
        for d in self.singles + self.pairs:
            for key in d:
                d[key] *= factor

    def merge(self, other: "WindowCounter") -> None:
        self.n_total += other.n_total
        for mine, theirs in zip(self.singles + self.pairs, other.singles + other.pairs):
            for key, c in theirs.items():
                mine[key] = mine.get(key, 0) + c


class ConfidenceProfile:
    """Frequency profile of legitimate traffic for one attribute schema.

    Windows are time based (``window_seconds`` of trace time) for packets
    observed with a timestamp and count based (``window_packets``) for
    packets observed without one.
    """

    def __init__(self, schema: AttributeSchema, *, decay: float = 1.0,
                 window_seconds: float = DEFAULT_WINDOW_SECONDS,
                 window_packets: int = DEFAULT_WINDOW_PACKETS):
        if not 0.0 < decay <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {decay}")
        if window_seconds <= 0 or window_packets <= 0:
            raise ValueError("window sizes must be positive")
        self.schema = schema
        self.decay = float(decay)
        self.window_seconds = float(window_seconds)
        self.window_packets = int(window_packets)
        self.windows_closed = 0
        self.cumulative = self._counter()
        self.open_window = self._counter()

    def _counter(self, window_id: int = 0) -> WindowCounter:
        return WindowCounter(self.schema.n, len(self.schema.pairs), window_id)

    # -- learning ---------------------------------------------------------

    def observe(self, attrs: Sequence, ts: float | None = None) -> None:
        check_vector(attrs, self.schema)
        w = self.open_window
        if w.n_total:
            if ts is None or w.start_ts is None:
                crossed = w.n_total >= self.window_packets
            else:
                crossed = ts >= w.start_ts + self.window_seconds
            if crossed:
                self.close_window()
                w = self.open_window
        if ts is not None:
            if w.start_ts is None:
                w.start_ts = ts
            w.end_ts = ts
        w.add(attrs, self.schema.pairs)

    def close_window(self) -> None:
        if self.decay != 1.0:
            self.cumulative.scale(self.decay)
        self.cumulative.merge(self.open_window)
        self.windows_closed += 1
        self.open_window = self._counter(self.windows_closed)

    def observe_many(self, vectors: Iterable[Sequence],
                     timestamps: Iterable[float] | None = None) -> None:
        if timestamps is None:
            for a in vectors:
                self.observe(a)
        else:
            for a, t in zip(vectors, timestamps):
                self.observe(a, t)

    # -- queries ----------------------------------------------------------

    @property
    def n_total(self):
        return self.cumulative.n_total

    @property
    def is_empty(self) -> bool:
        return self.cumulative.n_total == 0

    def _require_data(self):
        if self.cumulative.n_total == 0:
            raise EmptyProfile("cumulative profile holds no packets")

    def conf_single(self, i: int, value) -> float:
        self._require_data()
        if not 0 <= i < self.schema.n:
            raise SchemaMismatch(f"attribute index {i} out of range")
        return self.cumulative.singles[i].get(value, 0) / self.cumulative.n_total

    def conf_pair(self, k: int, values: tuple) -> float:
        self._require_data()
        if not 0 <= k < len(self.schema.pairs):
            raise UnknownPair(k)
        return self.cumulative.pairs[k].get(tuple(values), 0) / self.cumulative.n_total

    def pair_confidences(self, attrs: Sequence) -> list[float]:
        self._require_data()
        n = self.cumulative.n_total
        pc = self.cumulative.pairs
        return [pc[k].get((attrs[r], attrs[s]), 0) / n
                for k, (r, s) in enumerate(self.schema.pairs)]

    def score(self, attrs: Sequence, mode: str = "mean") -> float:
        """Weighted mean of the pair confidences of ``attrs``.

        ``sum`` and ``min`` are alternative combiners; only ``mean`` keeps
        the score commensurable with a single pair confidence.
        """
        check_vector(attrs, self.schema)
        confs = self.pair_confidences(attrs)
        w = self.schema.weights
        if mode == "mean":
            return sum(wk * c for wk, c in zip(w, confs)) / sum(w)
        if mode == "sum":
            return sum(wk * c for wk, c in zip(w, confs))
        if mode == "min":
            return min(c for wk, c in zip(w, confs) if wk > 0)
        raise ValueError(f"unknown score mode {mode!r}")

    def top_pairs(self, k: int, limit: int = 10) -> list[tuple[tuple, float]]:
        self._require_data()
        n = self.cumulative.n_total
        items = sorted(self.cumulative.pairs[k].items(),
                       key=lambda kv: (-kv[1], value_key(kv[0][0]), value_key(kv[0][1])))
        return [(key, c / n) for key, c in items[:limit]]

    def __eq__(self, other):
        if not isinstance(other, ConfidenceProfile):
            return NotImplemented
        return (self.schema == other.schema and self.decay == other.decay
                and self.windows_closed == other.windows_closed
                and self.window_seconds == other.window_seconds
                and self.window_packets == other.window_packets
                and self.cumulative.n_total == other.cumulative.n_total
                and self.cumulative.singles == other.cumulative.singles
                and self.cumulative.pairs == other.cumulative.pairs)

    # -- persistence ------------------------------------------------------

    def to_document(self) -> dict:
        """Serializable form of the cumulative state (the open window is not saved)."""
        c = self.cumulative
        singles = sorted(([i, v, cnt] for i, d in enumerate(c.singles) for v, cnt in d.items()),
                         key=lambda e: (e[0], value_key(e[1])))
        pairs = sorted(([k, vr, vs, cnt] for k, d in enumerate(c.pairs)
                        for (vr, vs), cnt in d.items()),
                       key=lambda e: (e[0], value_key(e[1]), value_key(e[2])))
        return {
            "version": PROFILE_VERSION,
            "schema": self.schema.to_dict(),
            "windows_closed": self.windows_closed,
            "decay": self.decay,
            "window_seconds": self.window_seconds,
            "window_packets": self.window_packets,
            "cumulative": {"n_total": c.n_total, "singles": singles, "pairs": pairs},
        }

    @classmethod
    def from_document(cls, doc: dict) -> "ConfidenceProfile":
        if not isinstance(doc, dict) or "version" not in doc:
            raise CorruptDocument("profile document has no version tag")
        if doc["version"] != PROFILE_VERSION:
            raise VersionMismatch(f"unsupported profile version {doc['version']!r}")
        try:
            schema = AttributeSchema.from_dict(doc["schema"])
            prof = cls(schema, decay=doc["decay"],
                       window_seconds=doc.get("window_seconds", DEFAULT_WINDOW_SECONDS),
                       window_packets=doc.get("window_packets", DEFAULT_WINDOW_PACKETS))
            prof.windows_closed = int(doc["windows_closed"])
            cum = doc["cumulative"]
            c = prof.cumulative
            c.n_total = cum["n_total"]
            for i, v, cnt in cum["singles"]:
                c.singles[i][v] = cnt
            for k, vr, vs, cnt in cum["pairs"]:
                c.pairs[k][(vr, vs)] = cnt
            prof.open_window = prof._counter(prof.windows_closed)
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise CorruptDocument(f"malformed profile document: {exc}") from exc
        return prof


def save_profile(profile: ConfidenceProfile) -> str:
    return json.dumps(profile.to_document(), sort_keys=True, indent=1) + "\n"


def load_profile(text: str) -> ConfidenceProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptDocument(f"not JSON: {exc}") from exc
    return ConfidenceProfile.from_document(doc)


# module-level aliases matching the operation names
def observe_packet(profile: ConfidenceProfile, attrs, ts=None) -> ConfidenceProfile:
    profile.observe(attrs, ts)
    return profile


def close_window(profile: ConfidenceProfile) -> ConfidenceProfile:
    profile.close_window()
    return profile


def conf_single(profile: ConfidenceProfile, i: int, value) -> float:
    return profile.conf_single(i, value)


def conf_pair(profile: ConfidenceProfile, k: int, values) -> float:
    return profile.conf_pair(k, values)


def score_packet(profile: ConfidenceProfile, attrs, mode: str = "mean") -> float:
    return profile.score(attrs, mode)

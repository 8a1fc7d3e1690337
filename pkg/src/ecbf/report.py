"""Per-packet decision records and the evaluation report computed from them."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .errors import ParseError

DECISION_COLUMNS = ("packet_index", "ts", "period", "score", "threshold",
                    "verdict", "rewritten", "label")
REPORT_VERSION = 1
HIST_BINS = 64
LABELS = ("legit", "attack", "unknown")
VERDICTS = ("accept", "discard")


@dataclass(frozen=True)
class DecisionRow:
    packet_index: int
    ts: float
    period: str
    score: float
    threshold: float | None
    verdict: str
    rewritten: bool
    label: str = "unknown"


def write_decisions(rows: Iterable[DecisionRow], path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECISION_COLUMNS)
        for r in rows:
            w.writerow([r.packet_index, f"{r.ts:.6f}", r.period, f"{r.score:.9f}",
                        "" if r.threshold is None else f"{r.threshold:.9f}",
                        r.verdict, "true" if r.rewritten else "false", r.label])
            n += 1
    return n


def read_decisions(path) -> list[DecisionRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DECISION_COLUMNS:
            raise ParseError(f"decisions file needs header {','.join(DECISION_COLUMNS)}", 1)
        for row in reader:
            if not row:
                continue
            try:
                idx, ts, period, score, thr, verdict, rw, label = row
                if verdict not in VERDICTS or label not in LABELS or rw not in ("true", "false"):
                    raise ValueError(f"bad row {row}")
                rows.append(DecisionRow(int(idx), float(ts), period, float(score),
                                        float(thr) if thr else None, verdict,
                                        rw == "true", label))
            except ValueError as exc:
                raise ParseError(str(exc), reader.line_num) from None
    return rows


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass
class EvalReport:
    counts: dict
    total: int
    fpr: float | None
    fnr: float | None
    precision: float | None
    recall: float | None
    bin_edges: list[float]
    score_histogram: dict
    threshold_trace: list = field(default_factory=list)
    report_version: int = REPORT_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1) + "\n"

    def histogram_csv(self) -> str:
        lines = ["bin_lo,bin_hi," + ",".join(LABELS)]
        e = self.bin_edges
        for b in range(HIST_BINS):
            cells = [str(self.score_histogram[lab][b]) for lab in LABELS]
            lines.append(f"{e[b]:.6f},{e[b + 1]:.6f}," + ",".join(cells))
        return "\n".join(lines) + "\n"


def evaluate(rows: list[DecisionRow]) -> EvalReport:
    """Confusion counts, error rates and score histograms; attack is the positive class."""
    counts = {lab: {v: 0 for v in VERDICTS} for lab in LABELS}
    scores = {lab: [] for lab in LABELS}
    trace = []
    last = object()
    for r in rows:
        counts[r.label][r.verdict] += 1
        scores[r.label].append(r.score)
        if r.threshold != last:
            trace.append([r.ts, r.threshold])
            last = r.threshold
    a_acc, a_dis = counts["attack"]["accept"], counts["attack"]["discard"]
    l_dis = counts["legit"]["discard"]
    discarded = sum(c["discard"] for c in counts.values())
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    hist = {lab: [int(x) for x in np.histogram(np.clip(scores[lab], 0.0, 1.0),
                                               bins=edges)[0]]
            for lab in LABELS}
    return EvalReport(
        counts=counts, total=len(rows),
        fpr=_ratio(a_acc, a_acc + a_dis),
        fnr=_ratio(l_dis, l_dis + counts["legit"]["accept"]),
        precision=_ratio(a_dis, discarded),
        recall=_ratio(a_dis, a_acc + a_dis),
        bin_edges=[float(x) for x in edges], score_histogram=hist,
        threshold_trace=trace,
    )

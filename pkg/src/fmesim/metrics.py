"""Throughput bins, per-flow counters, confidence intervals, trace checks."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from scipy import stats

BIN_US = 1_000_000


class BinLedger:
    """Per-(cell, direction) served-bit bins with fluid attribution.

    A frame's bits are spread uniformly over its realized service interval,
    so a server running at rate C can never put more than C * bin_length
    bits into one bin, and the bins of a flow sum to exactly the bits
    served. This is what makes the capacity bound a hard invariant instead
    of a boundary-rounding accident.
    """

    def __init__(self, bin_us: int = BIN_US):
        self.bin_us = int(bin_us)
        self.bins: dict[tuple[str, str], dict[int, float]] = defaultdict(
            lambda: defaultdict(float))

    def credit(self, cell: str, direction: str, start_us: int, end_us: int,
               bits: int) -> None:
        if end_us <= start_us:
            raise ValueError("empty service interval")
        series = self.bins[(cell, direction)]
        rate = bits / (end_us - start_us)
        t = start_us
        while t < end_us:
            edge = ((t // self.bin_us) + 1) * self.bin_us
            seg_end = min(edge, end_us)
            series[t // self.bin_us] += rate * (seg_end - t)
            t = seg_end

    def series(self, cell: str, direction: str) -> dict[int, float]:
        return dict(self.bins.get((cell, direction), {}))

    def total_bits(self, cell: str, direction: str) -> float:
        return sum(self.bins.get((cell, direction), {}).values())

    def max_bin_bits(self, cell: str, direction: str) -> float:
        series = self.bins.get((cell, direction), {})
        return max(series.values()) if series else 0.0

    def window_bits(self, cell: str, direction: str, start_us: int,
                    end_us: int) -> float:
        """Bits served inside [start_us, end_us); bounds must be bin-aligned."""
        if start_us % self.bin_us or end_us % self.bin_us:
            raise ValueError("window bounds must align to bin edges")
        first = start_us // self.bin_us
        last = end_us // self.bin_us
        series = self.bins.get((cell, direction), {})
        return sum(v for i, v in series.items() if first <= i < last)


@dataclass
class FlowStats:
    """Delivery accounting for one unidirectional application flow."""

    flow_id: str
    kind: str
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    bits_delivered: int = 0
    latency_sum_us: int = 0
    first_emit_us: int | None = None
    last_delivery_us: int | None = None
    last_seq: int = -1
    seq_violations: int = 0

    def on_sent(self, now_us: int) -> None:
        self.sent += 1
        if self.first_emit_us is None:
            self.first_emit_us = now_us

    def on_delivered(self, seq: int, size_bytes: int, created_us: int,
                     now_us: int) -> None:
        self.delivered += 1
        self.bits_delivered += size_bytes * 8
        self.latency_sum_us += now_us - created_us
        self.last_delivery_us = now_us
        if seq <= self.last_seq:
            self.seq_violations += 1
        self.last_seq = seq

    def on_dropped(self) -> None:
        self.dropped += 1

    def goodput_bps(self, horizon_us: int) -> float:
        if self.first_emit_us is None or horizon_us <= self.first_emit_us:
            return 0.0
        return self.bits_delivered / ((horizon_us - self.first_emit_us) / 1e6)

    def mean_latency_us(self) -> float:
        return self.latency_sum_us / self.delivered if self.delivered else float("nan")


@dataclass(frozen=True)
class CiSummary:
    mean: float
    half_width: float
    n: int

    @property
    def lo(self) -> float:
        return self.mean - self.half_width

    @property
    def hi(self) -> float:
        return self.mean + self.half_width


def summarize_ci(samples, confidence: float = 0.95) -> CiSummary:
    """Mean with a Student-t confidence half-width.

    A spread is only estimable from two or more samples; fewer is an error
    rather than a silently degenerate interval.
    """
    xs = [float(x) for x in samples]
    n = len(xs)
    if n < 2:
        raise ValueError(
            f"undefined interval: need at least 2 samples, got {n}")
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    t_mult = float(stats.t.ppf((1.0 + confidence) / 2.0, n - 1))
    return CiSummary(mean=mean, half_width=t_mult * math.sqrt(var / n), n=n)


# -- control-plane trace validation ------------------------------------------

ATTACH_SEQUENCE = (
    "UeAttachRequest",
    "AttachRequestToMme",
    "AttachHandshake",
    "CreateSessionRequest",
    "CreateSessionUpdate",
    "CreateSessionResponse",
    "BearerCreated",
    "UeNotify",
)
BOOTSTRAP_SEQUENCE = (
    "InterlayerDiscovery",
    "RouteActivationRequest",
    "RouteActivationResponse",
    "InterlayerUpdate",
)
BOOTSTRAP_STANDALONE_SEQUENCE = (
    "InterlayerDiscovery",
    "InterlayerUpdate",
)
SYNC_SEQUENCE = ("ContextSync", "ContextSyncAck")
DETACH_SEQUENCE = ("UeDetachRequest", "UeDetachAck")

_FAMILIES: dict[str, tuple[tuple[str, ...], ...]] = {
    "attach": (ATTACH_SEQUENCE,),
    "boot": (BOOTSTRAP_SEQUENCE, BOOTSTRAP_STANDALONE_SEQUENCE),
    "sync": (SYNC_SEQUENCE,),
    "detach": (DETACH_SEQUENCE,),
}

CONTROL_KINDS = frozenset(k for fam in _FAMILIES.values() for seq in fam for k in seq)


@dataclass(frozen=True)
class TraceViolation:
    corr_id: str
    time_us: int
    kind: str
    reason: str


def _corr_of(detail: str) -> str | None:
    for part in detail.split(";"):
        if part.startswith("corr="):
            return part[len("corr="):]
    return None


def validate_handshake_trace(rows) -> list[TraceViolation]:
    """Check every control transaction against its allowed message order.

    `rows` are (time_us, node, kind, detail) event-trace tuples. A
    transaction still in flight when the run ends is fine (any prefix of an
    allowed sequence passes); anything out of order, duplicated, or foreign
    to the transaction family is reported with its first offending event.
    """
    by_corr: dict[str, list[tuple[int, str]]] = defaultdict(list)
    violations: list[TraceViolation] = []
    for time_us, _node, kind, detail in rows:
        if kind not in CONTROL_KINDS:
            continue
        corr = _corr_of(detail)
        if corr is None:
            violations.append(TraceViolation("", time_us, kind,
                                             "control message without corr id"))
            continue
        by_corr[corr].append((time_us, kind))

    for corr, entries in by_corr.items():
        family = corr.split("-", 1)[0]
        patterns = _FAMILIES.get(family)
        if patterns is None:
            violations.append(TraceViolation(
                corr, entries[0][0], entries[0][1],
                f"unknown transaction family {family!r}"))
            continue
        kinds = [k for _, k in entries]
        if any(kinds == list(p[:len(kinds)]) for p in patterns):
            continue
        # locate the first index where no pattern matches any longer
        offending = 0
        for i in range(1, len(kinds) + 1):
            if not any(kinds[:i] == list(p[:i]) for p in patterns):
                offending = i - 1
                break
        violations.append(TraceViolation(
            corr, entries[offending][0], entries[offending][1],
            f"message {offending} out of order for family {family!r} "
            f"(saw {kinds})"))
    violations.sort(key=lambda v: (v.time_us, v.corr_id))
    return violations

"""Deterministic discrete-event kernel with labeled random substreams."""

from __future__ import annotations

import hashlib
import heapq
import struct
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

# Clock granularity is the integer microsecond. One LTE subframe (1 ms) and
# one radio frame (10 ms) both land exactly on this grid, so no protocol
# timer ever needs fractional ticks.
US_PER_MS = 1_000
US_PER_SUBFRAME = 1_000
US_PER_FRAME = 10_000
US_PER_S = 1_000_000


def ms_to_us(value: float) -> int:
    """Milliseconds to integer microseconds (rounded to the grid)."""
    return int(round(value * US_PER_MS))


def s_to_us(value: float) -> int:
    """Seconds to integer microseconds (rounded to the grid)."""
    return int(round(value * US_PER_S))


class SimError(Exception):
    pass


class SchedulingError(SimError):
    """An event was scheduled before the current simulation time."""


class UnknownTargetError(SimError):
    """An event fired for a target with no registered handler."""


class HandlerError(SimError):
    """An event handler raised; carries the offending event."""

    def __init__(self, event: "Event", cause: BaseException):
        super().__init__(
            f"handler failed for kind={event.kind!r} target={event.target!r} "
            f"at t={event.fire_time}us: {cause!r}"
        )
        self.event = event
        self.cause = cause


def substream(root_seed: int, label: str) -> np.random.Generator:
    """Independent reproducible generator keyed by (root_seed, label).

    The label is hashed into the seed material, so streams are
    order-independent: drawing from one stream never shifts another, and
    the same (seed, label) pair always restarts the same sequence.
    """
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = struct.unpack("<8L", digest[:32])
    ss = np.random.SeedSequence(entropy=[int(root_seed) & (2**64 - 1), *words])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Event:
    """A scheduled occurrence: deliver `payload` to `target` at `fire_time`."""

    fire_time: int          # absolute microseconds
    target: str             # node or component identifier
    kind: str               # tagged timer / message name
    payload: Any = None
    detail: str = ""        # free-form text copied into the event trace
    seq: int = -1           # insertion sequence, assigned by the simulator


class EventHandle:
    """Cancellation token returned by Simulator.schedule()."""

    __slots__ = ("event", "cancelled")

    def __init__(self, event: Event):
        self.event = event
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class TraceLog:
    """In-memory event trace, one row per delivered event."""

    HEADER = "time_us,node,kind,detail"

    def __init__(self) -> None:
        self.rows: list[tuple[int, str, str, str]] = []

    def record(self, time_us: int, node: str, kind: str, detail: str = "") -> None:
        self.rows.append((time_us, node, kind, detail))

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.HEADER + "\n")
            for t, node, kind, detail in self.rows:
                fh.write(f"{t},{node},{kind},{detail}\n")


_CALLBACK_TARGET = "__callback__"


class Simulator:
    """Totally ordered event queue over an integer microsecond clock.

    Ordering is (fire_time, insertion seq): ties at the same instant are
    delivered in scheduling order, which makes every run reproducible
    event-for-event for a given seed and workload.
    """

    def __init__(self, seed: int, trace: Optional[TraceLog] = None):
        self.seed = int(seed)
        self.now = 0
        self.trace = trace
        self._heap: list[tuple[int, int, Event, EventHandle]] = []
        self._seq = 0
        self._handlers: dict[str, Callable[["Simulator", Event], None]] = {}
        self._streams: dict[str, np.random.Generator] = {}
        self.scheduled_count = 0
        self.delivered_count = 0
        self.cancelled_count = 0

    # -- scheduling -------------------------------------------------------

    def register(self, target: str, handler: Callable[["Simulator", Event], None]) -> None:
        self._handlers[target] = handler

    def schedule(self, event: Event) -> EventHandle:
        if event.fire_time < self.now:
            raise SchedulingError(
                f"cannot schedule {event.kind!r} at t={event.fire_time}us; "
                f"clock is already at {self.now}us"
            )
        event.seq = self._seq
        self._seq += 1
        handle = EventHandle(event)
        heapq.heappush(self._heap, (event.fire_time, event.seq, event, handle))
        self.scheduled_count += 1
        return handle

    def schedule_in(self, delay_us: int, target: str, kind: str,
                    payload: Any = None, detail: str = "") -> EventHandle:
        return self.schedule(Event(self.now + int(delay_us), target, kind, payload, detail))

    def call_in(self, delay_us: int, fn: Callable[[], None], kind: str = "call") -> EventHandle:
        """Schedule a bare callback; used for module-internal timers."""
        return self.schedule(Event(self.now + int(delay_us), _CALLBACK_TARGET, kind, fn))

    def cancel(self, handle: EventHandle) -> None:
        if not handle.cancelled:
            handle.cancel()
            self.cancelled_count += 1

    def pending_count(self) -> int:
        return self.scheduled_count - self.delivered_count - self.cancelled_count

    # -- execution --------------------------------------------------------

    def rng_substream(self, label: str) -> np.random.Generator:
        """Named substream; repeated calls continue the same stream."""
        gen = self._streams.get(label)
        if gen is None:
            gen = substream(self.seed, label)
            self._streams[label] = gen
        return gen

    def _dispatch(self, event: Event) -> None:
        if event.target == _CALLBACK_TARGET:
            try:
                event.payload()
            except SimError:
                raise
            except Exception as exc:  # noqa: BLE001 - rewrapped with context
                raise HandlerError(event, exc) from exc
            return
        handler = self._handlers.get(event.target)
        if handler is None:
            raise UnknownTargetError(
                f"no handler registered for target {event.target!r} "
                f"(event kind={event.kind!r} at t={event.fire_time}us)"
            )
        try:
            handler(self, event)
        except SimError:
            raise
        except Exception as exc:  # noqa: BLE001 - rewrapped with context
            raise HandlerError(event, exc) from exc

    def run_until(self, t_end_us: int) -> int:
        """Deliver every event with fire_time <= t_end_us; returns count."""
        delivered = 0
        while self._heap and self._heap[0][0] <= t_end_us:
            fire_time, _seq, event, handle = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self.now = fire_time
            self.delivered_count += 1
            delivered += 1
            if self.trace is not None:
                self.trace.record(fire_time, event.target, event.kind, event.detail)
            self._dispatch(event)
        if t_end_us > self.now:
            self.now = t_end_us
        return delivered

    def run(self) -> int:
        """Drain the queue completely."""
        delivered = 0
        while self._heap:
            delivered += self.run_until(self._heap[0][0])
        return delivered

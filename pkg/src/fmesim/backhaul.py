"""Transmission servers, backhaul links, and disruption holding buffers."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .engine import Simulator

CONTROL_MESSAGE_BYTES = 200          # nominal wire size of control messages
DEFAULT_BACKHAUL_BPS = 20e6
DEFAULT_HOP_DELAY_US = 2_000
DEFAULT_DMA_CAPACITY_BYTES = 16 * 1024 * 1024


class TransmitServer:
    """Serializes frames onto a shared channel at a fixed bit rate.

    Whatever is submitted queues behind the current backlog; per-frame
    service time is size/rate. The optional observer receives the realized
    service interval of every frame, which is how throughput bins are fed.
    """

    def __init__(self, rate_bps: float,
                 observer: Optional[Callable[[int, int, int], None]] = None):
        self.rate_bps = float(rate_bps)
        self.observer = observer
        self.busy_until = 0

    def backlog_us(self, sim: Simulator) -> int:
        return max(0, self.busy_until - sim.now)

    def submit(self, sim: Simulator, size_bits: int,
               done: Callable[[], None]) -> tuple[int, int]:
        """Queue one frame; `done` fires when its last bit is served."""
        if size_bits <= 0:
            raise ValueError("frame must carry at least one bit")
        start = max(sim.now, self.busy_until)
        duration = max(1, math.ceil(size_bits / self.rate_bps * 1e6))
        end = start + duration
        self.busy_until = end
        if self.observer is not None:
            self.observer(start, end, size_bits)
        sim.call_in(end - sim.now, done, kind="tx-done")
        return start, end


@dataclass
class Frame:
    """One unit on the backhaul: a user packet or a control message."""

    dst: str                      # final destination node id
    size_bytes: int
    kind: str                     # "user" | "control"
    payload: Any = None
    src: str = ""


class BackhaulLink:
    """Point-to-point wireless backhaul link, one server per direction."""

    def __init__(self, a: str, b: str, capacity_bps: float = DEFAULT_BACKHAUL_BPS,
                 hop_delay_us: int = DEFAULT_HOP_DELAY_US):
        self.a = a
        self.b = b
        self.capacity_bps = capacity_bps
        self.hop_delay_us = int(hop_delay_us)
        self.up = True
        self._servers = {a: TransmitServer(capacity_bps),
                         b: TransmitServer(capacity_bps)}

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a

    def key(self) -> frozenset:
        return frozenset((self.a, self.b))

    def transmit(self, sim: Simulator, src: str, frame: Frame,
                 deliver: Callable[[Frame], None]) -> None:
        """Serialize the frame and deliver it to the far end after the
        propagation/processing delay. Caller checks `up` before use."""
        server = self._servers[src]

        def handoff() -> None:
            sim.call_in(self.hop_delay_us, lambda: deliver(frame), kind="hop-delay")

        server.submit(sim, frame.size_bytes * 8, handoff)


class HoldingBuffer:
    """FIFO byte-capacity buffer for frames awaiting a route (the
    disruption-management store). Overflow evicts the oldest frame."""

    def __init__(self, capacity_bytes: int = DEFAULT_DMA_CAPACITY_BYTES):
        self.capacity_bytes = int(capacity_bytes)
        self.frames: deque[Frame] = deque()
        self.held_bytes = 0
        self.evicted_count = 0

    def __len__(self) -> int:
        return len(self.frames)

    def push(self, frame: Frame) -> list[Frame]:
        """Append a frame; returns the frames evicted to make room."""
        evicted = []
        self.frames.append(frame)
        self.held_bytes += frame.size_bytes
        while self.held_bytes > self.capacity_bytes and len(self.frames) > 1:
            old = self.frames.popleft()
            self.held_bytes -= old.size_bytes
            self.evicted_count += 1
            evicted.append(old)
        if self.held_bytes > self.capacity_bytes:
            # single frame larger than the whole buffer
            old = self.frames.popleft()
            self.held_bytes -= old.size_bytes
            self.evicted_count += 1
            evicted.append(old)
        return evicted

    def pop(self) -> Frame:
        frame = self.frames.popleft()
        self.held_bytes -= frame.size_bytes
        return frame

    def pop_all(self) -> list[Frame]:
        out = list(self.frames)
        self.frames.clear()
        self.held_bytes = 0
        return out


@dataclass
class Tunnel:
    """Virtual point-to-point control/data association between nodes.

    State is derived: Up when the owner currently has a route to the peer,
    Disrupted when it does not, Flushing while a recovered route still has
    held frames draining ahead of fresh traffic.
    """

    kind: str                 # "vS1" | "vX2"
    owner: str
    peer: str
    route_ok: bool = True
    held: int = 0             # frames currently parked for this peer

    @property
    def state(self) -> str:
        if not self.route_ok:
            return "Disrupted"
        return "Flushing" if self.held > 0 else "Up"

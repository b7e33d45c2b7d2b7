"""Constant-bit-rate application flows riding the cellular user plane."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .engine import Simulator
from .fme import FmeNetwork
from .metrics import FlowStats

VOICE_PACKET_BYTES = 160       # 64 kb/s at a 20 ms cadence
VOICE_PERIOD_US = 20_000
VIDEO_PACKET_BYTES = 1_200     # 384 kb/s at a 25 ms cadence
VIDEO_PERIOD_US = 25_000

ADMISSION_POLL_US = 100_000


@dataclass(frozen=True)
class FlowSpec:
    """One unidirectional flow between a terminal and a terminal or server."""

    flow_id: str
    kind: str                  # "voice" | "video"
    src: str                   # ue id or "server"
    dst: str                   # ue id or "server"
    start_us: int
    stop_us: int
    packet_bytes: int
    period_us: int

    @property
    def rate_bps(self) -> float:
        return self.packet_bytes * 8 / (self.period_us / 1e6)


def voice_flow(flow_id: str, src: str, dst: str, start_us: int,
               stop_us: int) -> FlowSpec:
    return FlowSpec(flow_id, "voice", src, dst, start_us, stop_us,
                    VOICE_PACKET_BYTES, VOICE_PERIOD_US)


def video_flow(flow_id: str, src: str, dst: str, start_us: int,
               stop_us: int) -> FlowSpec:
    return FlowSpec(flow_id, "video", src, dst, start_us, stop_us,
                    VIDEO_PACKET_BYTES, VIDEO_PERIOD_US)


@dataclass
class Packet:
    flow_id: str
    seq: int
    size_bytes: int
    created_us: int
    dst_endpoint: str
    dst_node: str = ""


@dataclass
class _FlowRuntime:
    spec: FlowSpec
    started: bool = False
    next_seq: int = 0
    dst_node: str = ""


class TrafficEngine:
    """Emits flow packets once endpoints are ready and books the outcomes.

    A flow waits (polling) until its source is attached, its destination is
    attached or is the server, and, when the two ends sit in different
    cells, both bearers have been promoted end to end. Emission itself is
    a fixed cadence, so offered load is exact and runs are replayable.
    """

    def __init__(self, sim: Simulator, net: FmeNetwork,
                 flows: list[FlowSpec]):
        self.sim = sim
        self.net = net
        self.flows = {f.flow_id: _FlowRuntime(spec=f)
                      for f in sorted(flows, key=lambda f: f.flow_id)}
        self.stats = {f.flow_id: FlowStats(flow_id=f.flow_id, kind=f.kind)
                      for f in flows}
        net.deliver_hook = self._on_deliver
        net.drop_hook = self._on_drop

    def start(self) -> None:
        for fid in sorted(self.flows):
            rt = self.flows[fid]
            delay = max(0, rt.spec.start_us - self.sim.now)
            self.sim.call_in(delay, lambda r=rt: self._try_start(r),
                             kind="flow-admission")

    # -- admission ---------------------------------------------------------

    def _endpoints_ready(self, spec: FlowSpec) -> bool:
        src_cell = dst_cell = None
        if spec.src != "server":
            ok, scope = self.net.ue_ready(spec.src)
            if not ok:
                return False
            src_cell = self.net.serving_cell(spec.src)
            src_scope = scope
        if spec.dst != "server":
            ok, scope = self.net.ue_ready(spec.dst)
            if not ok:
                return False
            dst_cell = self.net.serving_cell(spec.dst)
            dst_scope = scope
        if spec.src != "server" and spec.dst != "server":
            if src_cell != dst_cell:
                # relayed neighbour-cell traffic needs both contexts known
                # beyond the local gateway
                if src_scope != "EndToEnd" or dst_scope != "EndToEnd":
                    return False
        if spec.dst != "server" and spec.src == "server":
            # the core can only address terminals it has a context for
            if dst_scope != "EndToEnd":
                return False
        return True

    def _try_start(self, rt: _FlowRuntime) -> None:
        if rt.started:
            return
        if self.sim.now >= rt.spec.stop_us:
            return
        if not self._endpoints_ready(rt.spec):
            self.sim.call_in(ADMISSION_POLL_US,
                             lambda: self._try_start(rt),
                             kind="flow-admission")
            return
        rt.started = True
        if rt.spec.dst != "server":
            rt.dst_node = self.net.serving_cell(rt.spec.dst)
        self._emit(rt)

    # -- emission ------------------------------------------------------------

    def _emit(self, rt: _FlowRuntime) -> None:
        spec = rt.spec
        if self.sim.now >= spec.stop_us:
            return
        packet = Packet(flow_id=spec.flow_id, seq=rt.next_seq,
                        size_bytes=spec.packet_bytes, created_us=self.sim.now,
                        dst_endpoint=spec.dst, dst_node=rt.dst_node)
        rt.next_seq += 1
        self.stats[spec.flow_id].on_sent(self.sim.now)
        if spec.src == "server":
            self.net.send_user_from_server(packet)
        else:
            self.net.send_user_from_ue(spec.src, packet)
        self.sim.call_in(spec.period_us, lambda: self._emit(rt),
                         kind="flow-emit")

    # -- accounting ------------------------------------------------------------

    def _on_deliver(self, packet: Packet, now_us: int) -> None:
        self.stats[packet.flow_id].on_delivered(
            packet.seq, packet.size_bytes, packet.created_us, now_us)

    def _on_drop(self, packet: Packet, reason: str) -> None:
        stats = self.stats.get(getattr(packet, "flow_id", ""))
        if stats is not None:
            stats.on_dropped()

    # -- report helpers ----------------------------------------------------------

    def flows_by_cell(self) -> dict[tuple[str, str], list[str]]:
        """Map (cell, direction) to the flow ids that load that server."""
        out: dict[tuple[str, str], list[str]] = {}
        for fid in sorted(self.flows):
            spec = self.flows[fid].spec
            if spec.src != "server":
                cell = self.net.serving_cell(spec.src)
                out.setdefault((cell, "ul"), []).append(fid)
            if spec.dst != "server":
                cell = self.net.serving_cell(spec.dst)
                out.setdefault((cell, "dl"), []).append(fid)
        return out

    def users_with_traffic(self, cell: str) -> set[str]:
        """Terminals in a cell that source or sink at least one flow."""
        users = set()
        for fid in sorted(self.flows):
            spec = self.flows[fid].spec
            for end in (spec.src, spec.dst):
                if end != "server" and self.net.serving_cell(end) == cell:
                    users.add(end)
        return users

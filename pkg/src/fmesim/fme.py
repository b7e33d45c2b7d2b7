"""Virtualized core agents at base stations: bootstrap, attach, sync, forwarding.

Each base station hosts local MME/GW agents so terminals can attach and get
bearers with or without a reachable core. Control transactions are traced as
ordered message sequences keyed by a correlation id; user frames ride radio
servers and the wireless backhaul, and park in per-destination holding
buffers whenever their route is gone.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .backhaul import (
    CONTROL_MESSAGE_BYTES,
    DEFAULT_BACKHAUL_BPS,
    DEFAULT_DMA_CAPACITY_BYTES,
    DEFAULT_HOP_DELAY_US,
    BackhaulLink,
    Frame,
    HoldingBuffer,
    Tunnel,
)
from .engine import Event, Simulator, ms_to_us
from .mobility import Position
from .radio import CellConfig, LINK_CLASSES, max_range_m, tdd_cell_capacity_bps
from .routing import RouteTable

# Control-plane pacing. These order the trace; they are not claims about
# real signaling latency.
RADIO_CTRL_DELAY_US = 1_000     # terminal <-> base station control hop
AGENT_HOP_DELAY_US = 100        # between agents inside one base station
SERVER_LINK_DELAY_US = 1_000    # core gateway <-> external server
SYNC_RETRY_PERIOD_US = 1_000_000


# -- gateway function prioritization ------------------------------------------

@dataclass(frozen=True)
class GwFunction:
    """One gateway capability with a priority rank and a resource cost."""

    name: str
    priority: int
    cost: float
    mandatory: bool = False


DEFAULT_GW_FUNCTIONS = (
    GwFunction("attach_session", priority=0, cost=1.0, mandatory=True),
    GwFunction("context_sync", priority=1, cost=1.0),
    GwFunction("external_gateway", priority=2, cost=1.0),
    GwFunction("d2d_authorization", priority=3, cost=1.0),
)


def gw_a_prioritize(functions, budget: float) -> list[str]:
    """Pick which gateway functions stay active under a resource budget.

    Mandatory functions are always kept (attach/session handling must not
    die with the budget); the rest are admitted greedily in priority order,
    skipping anything that no longer fits.
    """
    chosen: list[str] = []
    remaining = float(budget)
    ordered = sorted(functions,
                     key=lambda f: (not f.mandatory, f.priority, f.name))
    for f in ordered:
        if f.mandatory:
            chosen.append(f.name)
            remaining -= f.cost
        elif f.cost <= remaining + 1e-12:
            chosen.append(f.name)
            remaining -= f.cost
    return chosen


# -- control messages and per-terminal state -----------------------------------

@dataclass
class FmeMessage:
    kind: str
    corr_id: str
    src: str
    dst_component: str
    dst_node: str = ""
    ue_id: Optional[str] = None
    info: str = ""

    def __post_init__(self):
        if not self.dst_node:
            self.dst_node = self.dst_component.split(".", 1)[0]

    def detail(self) -> str:
        parts = [f"corr={self.corr_id}"]
        if self.ue_id:
            parts.append(f"ue={self.ue_id}")
        if self.info:
            parts.append(f"info={self.info}")
        return ";".join(parts)


@dataclass
class Bearer:
    bearer_id: str
    ue_id: str
    scope: str = "Local"        # Local | EndToEnd
    state: str = "Creating"     # Creating | Active | Released


@dataclass
class UeRecord:
    ue_id: str
    corr_id: str
    state: str = "Attaching"    # Attaching | Attached | Detached
    bearer: Optional[Bearer] = None
    epc_synced: bool = False
    sync_sent_us: Optional[int] = None
    sync_seq: int = 0
    pending_detach: bool = False


@dataclass
class CellularUe:
    ue_id: str
    cell_id: str
    position: Position
    state: str = "Detached"
    attach_count: int = 0


@dataclass
class FmeConfig:
    backhaul_bps: float = DEFAULT_BACKHAUL_BPS
    hop_delay_us: int = DEFAULT_HOP_DELAY_US
    backhaul_max_range_m: float = 1_600.0
    dma_capacity_bytes: int = DEFAULT_DMA_CAPACITY_BYTES
    gw_budget: float = 10.0
    sync_period_us: int = SYNC_RETRY_PERIOD_US
    cell: CellConfig = field(default_factory=CellConfig)


class _BackhaulNode:
    """Anything that terminates backhaul links: routes, tunnels, buffers."""

    def __init__(self, node_id: str, position: Position,
                 dma_capacity_bytes: int):
        self.id = node_id
        self.position = position
        self.routes = RouteTable()
        self.hold: dict[str, HoldingBuffer] = {}
        self.tunnels: dict[str, Tunnel] = {}
        self._dma_capacity = dma_capacity_bytes

    def buffer_for(self, dst: str) -> HoldingBuffer:
        buf = self.hold.get(dst)
        if buf is None:
            buf = HoldingBuffer(self._dma_capacity)
            self.hold[dst] = buf
        return buf

    def held_frames(self, dst: str) -> int:
        buf = self.hold.get(dst)
        return len(buf) if buf is not None else 0


class HenbNode(_BackhaulNode):
    """A base station with embedded core agents and its radio servers."""

    def __init__(self, sim: Simulator, node_id: str, position: Position,
                 cfg: FmeConfig, ledger=None):
        super().__init__(node_id, position, cfg.dma_capacity_bytes)
        from .backhaul import TransmitServer  # local import keeps header tidy
        dl_bps = tdd_cell_capacity_bps(cfg.cell, "dl")
        ul_bps = tdd_cell_capacity_bps(cfg.cell, "ul")
        def observer(direction):
            if ledger is None:
                return None
            return lambda s, e, b: ledger.credit(node_id, direction, s, e, b)
        self.dl_server = TransmitServer(dl_bps, observer=observer("dl"))
        self.ul_server = TransmitServer(ul_bps, observer=observer("ul"))
        self.ue_records: dict[str, UeRecord] = {}
        self.active_functions: list[str] = gw_a_prioritize(
            DEFAULT_GW_FUNCTIONS, cfg.gw_budget)
        self.bootstrapped = False

    @property
    def mode(self) -> str:
        return "ConnectedToEpc" if self.routes.reaches("epc") else "Standalone"

    def function_active(self, name: str) -> bool:
        return name in self.active_functions


class EpcNode(_BackhaulNode):
    """The surviving core: terminal directory plus backhaul termination."""

    def __init__(self, node_id: str, position: Position, cfg: FmeConfig):
        super().__init__(node_id, position, cfg.dma_capacity_bytes)
        self.directory: dict[str, str] = {}   # ue id -> serving cell id


class FmeNetwork:
    """Builds the node graph and runs every control and user-plane exchange."""

    def __init__(self, sim: Simulator, cfg: FmeConfig,
                 epc_position: Position,
                 henb_positions: dict[str, Position],
                 ledger=None):
        self.sim = sim
        self.cfg = cfg
        self.ledger = ledger
        self.epc = EpcNode("epc", epc_position, cfg)
        self.henbs: dict[str, HenbNode] = {
            hid: HenbNode(sim, hid, pos, cfg, ledger)
            for hid, pos in sorted(henb_positions.items())
        }
        self.nodes: dict[str, _BackhaulNode] = {"epc": self.epc,
                                                **self.henbs}
        self.ues: dict[str, CellularUe] = {}
        self.links: dict[frozenset, BackhaulLink] = {}
        self.control_log: list[tuple[int, str, str, str]] = []
        self.user_drops: dict[str, int] = {}
        self.control_evictions = 0
        self.deliver_hook: Optional[Callable[[Any, int], None]] = None
        self.drop_hook: Optional[Callable[[Any, str], None]] = None
        self._sync_loop_armed = False
        self._build_links()
        sim.register("epc", self._on_control_event)
        for henb_id in self.henbs:
            for component in (henb_id, f"{henb_id}.mme", f"{henb_id}.gw"):
                sim.register(component, self._on_control_event)
        self.recompute_topology()

    # -- construction ----------------------------------------------------

    def _build_links(self) -> None:
        wifi = LINK_CLASSES["wifi_backhaul"]
        reach = min(max_range_m(wifi), self.cfg.backhaul_max_range_m)
        ids = sorted(self.nodes)
        for i, a in enumerate(ids):
            for b in ids[i + 1:]:
                d = self.nodes[a].position.distance_to(self.nodes[b].position)
                if d <= reach:
                    link = BackhaulLink(a, b, self.cfg.backhaul_bps,
                                        self.cfg.hop_delay_us)
                    self.links[link.key()] = link
        for hid, henb in self.henbs.items():
            henb.tunnels["epc"] = Tunnel(kind="vS1", owner=hid, peer="epc")
            self.epc.tunnels[hid] = Tunnel(kind="vS1", owner="epc", peer=hid)
            for other in self.henbs:
                if other != hid:
                    henb.tunnels[other] = Tunnel(kind="vX2", owner=hid,
                                                 peer=other)

    def add_ue(self, ue_id: str, cell_id: str, position: Position) -> CellularUe:
        if cell_id not in self.henbs:
            raise ValueError(f"unknown cell {cell_id!r}")
        ue = CellularUe(ue_id=ue_id, cell_id=cell_id, position=position)
        self.ues[ue_id] = ue
        self.sim.register(ue_id, self._on_control_event)
        return ue

    # -- topology and disruption ------------------------------------------

    def set_link_state(self, a: str, b: str, up: bool) -> None:
        key = frozenset((a, b))
        link = self.links.get(key)
        if link is None:
            raise ValueError(f"no backhaul link between {a!r} and {b!r}")
        if link.up == up:
            return
        link.up = up
        self.recompute_topology()

    def recompute_topology(self) -> None:
        up_links = {k for k, l in self.links.items() if l.up}
        ids = sorted(self.nodes)
        for nid in ids:
            self.nodes[nid].routes.recompute(ids, up_links, nid)
        self._refresh_tunnels()
        self._release_held()
        self._sync_sweep(immediate=True)

    def _refresh_tunnels(self) -> None:
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            for peer, tunnel in node.tunnels.items():
                tunnel.route_ok = node.routes.reaches(peer)
                tunnel.held = node.held_frames(peer)

    def _release_held(self) -> None:
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            for dst in sorted(node.hold):
                if not node.routes.reaches(dst):
                    continue
                for frame in node.hold[dst].pop_all():
                    self._forward_from(nid, frame)
        self._refresh_tunnels()

    # -- low-level send helpers --------------------------------------------

    def _send_local(self, msg: FmeMessage, delay_us: int) -> None:
        self.sim.schedule(Event(self.sim.now + delay_us, msg.dst_component,
                                msg.kind, payload=msg, detail=msg.detail()))

    def _send_backhaul(self, src_node: str, msg: FmeMessage) -> None:
        frame = Frame(dst=msg.dst_node, size_bytes=CONTROL_MESSAGE_BYTES,
                      kind="control", payload=msg, src=src_node)
        self._forward_from(src_node, frame)

    def _forward_from(self, node_id: str, frame: Frame) -> None:
        if frame.dst == node_id:
            self._consume(node_id, frame)
            return
        node = self.nodes[node_id]
        next_hop = node.routes.next_hop(frame.dst)
        link = (self.links.get(frozenset((node_id, next_hop)))
                if next_hop is not None else None)
        if next_hop is None or link is None or not link.up:
            self._hold(node, frame)
            return
        link.transmit(self.sim, node_id, frame,
                      lambda fr, _nh=next_hop: self._forward_from(_nh, fr))

    def _hold(self, node: _BackhaulNode, frame: Frame) -> None:
        evicted = node.buffer_for(frame.dst).push(frame)
        for old in evicted:
            if old.kind == "user":
                self._drop(old.payload, "dma-evicted")
            else:
                self.control_evictions += 1
        tunnel = node.tunnels.get(frame.dst)
        if tunnel is not None:
            tunnel.held = node.held_frames(frame.dst)

    def _drop(self, packet, reason: str) -> None:
        self.user_drops[reason] = self.user_drops.get(reason, 0) + 1
        if self.drop_hook is not None:
            self.drop_hook(packet, reason)

    def _consume(self, node_id: str, frame: Frame) -> None:
        if frame.kind == "control":
            msg: FmeMessage = frame.payload
            self._send_local(msg, delay_us=0)
            return
        packet = frame.payload
        if node_id == "epc":
            self._epc_user_frame(packet)
        else:
            self._deliver_downlink(self.henbs[node_id], packet)

    # -- control event dispatch --------------------------------------------

    def _on_control_event(self, sim: Simulator, event: Event) -> None:
        msg: FmeMessage = event.payload
        self.control_log.append((sim.now, event.target, event.kind,
                                 event.detail))
        handler = getattr(self, f"_h_{_snake(event.kind)}", None)
        if handler is None:
            raise ValueError(f"no handler for control kind {event.kind!r}")
        handler(event.target, msg)

    # bootstrap ------------------------------------------------------------

    def bootstrap_all(self) -> None:
        for hid in sorted(self.henbs):
            self.bootstrap(hid)

    def bootstrap(self, henb_id: str) -> None:
        henb = self.henbs[henb_id]
        msg = FmeMessage(kind="InterlayerDiscovery",
                         corr_id=f"boot-{henb_id}", src=henb_id,
                         dst_component=henb_id)
        self._send_local(msg, delay_us=AGENT_HOP_DELAY_US)

    def _h_interlayer_discovery(self, component: str, msg: FmeMessage) -> None:
        henb = self.henbs[component]
        if henb.routes.reaches("epc"):
            req = FmeMessage(kind="RouteActivationRequest", corr_id=msg.corr_id,
                             src=component, dst_component="epc",
                             info=component)
            self._send_backhaul(component, req)
        else:
            update = FmeMessage(kind="InterlayerUpdate", corr_id=msg.corr_id,
                                src=component, dst_component=component)
            self._send_local(update, delay_us=AGENT_HOP_DELAY_US)

    def _h_route_activation_request(self, component: str,
                                    msg: FmeMessage) -> None:
        resp = FmeMessage(kind="RouteActivationResponse", corr_id=msg.corr_id,
                          src="epc", dst_component=msg.info)
        self._send_backhaul("epc", resp)

    def _h_route_activation_response(self, component: str,
                                     msg: FmeMessage) -> None:
        update = FmeMessage(kind="InterlayerUpdate", corr_id=msg.corr_id,
                            src=component, dst_component=component)
        self._send_local(update, delay_us=AGENT_HOP_DELAY_US)

    def _h_interlayer_update(self, component: str, msg: FmeMessage) -> None:
        self.henbs[component].bootstrapped = True

    # attach ----------------------------------------------------------------

    def attach_ue(self, ue_id: str) -> Optional[Bearer]:
        """Start (or short-circuit) the attach transaction for a terminal."""
        ue = self.ues[ue_id]
        henb = self.henbs[ue.cell_id]
        rec = henb.ue_records.get(ue_id)
        if rec is not None and rec.state in ("Attaching", "Attached"):
            return rec.bearer
        ue.attach_count += 1
        ue.state = "Attaching"
        corr = f"attach-{ue_id}-{ue.attach_count}"
        rec = UeRecord(ue_id=ue_id, corr_id=corr)
        henb.ue_records[ue_id] = rec
        msg = FmeMessage(kind="UeAttachRequest", corr_id=corr, src=ue_id,
                         dst_component=henb.id, ue_id=ue_id)
        self._send_local(msg, delay_us=RADIO_CTRL_DELAY_US)
        return None

    def _h_ue_attach_request(self, component: str, msg: FmeMessage) -> None:
        nxt = FmeMessage(kind="AttachRequestToMme", corr_id=msg.corr_id,
                         src=component, dst_component=f"{component}.mme",
                         ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_attach_request_to_mme(self, component: str, msg: FmeMessage) -> None:
        root = component.split(".", 1)[0]
        nxt = FmeMessage(kind="AttachHandshake", corr_id=msg.corr_id,
                         src=component, dst_component=root, ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_attach_handshake(self, component: str, msg: FmeMessage) -> None:
        nxt = FmeMessage(kind="CreateSessionRequest", corr_id=msg.corr_id,
                         src=f"{component}.mme",
                         dst_component=f"{component}.gw", ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_create_session_request(self, component: str,
                                  msg: FmeMessage) -> None:
        root = component.split(".", 1)[0]
        henb = self.henbs[root]
        rec = henb.ue_records[msg.ue_id]
        n = self.ues[msg.ue_id].attach_count
        rec.bearer = Bearer(bearer_id=f"brr-{msg.ue_id}-{n}", ue_id=msg.ue_id)
        nxt = FmeMessage(kind="CreateSessionUpdate", corr_id=msg.corr_id,
                         src=component, dst_component=component,
                         ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_create_session_update(self, component: str,
                                 msg: FmeMessage) -> None:
        root = component.split(".", 1)[0]
        nxt = FmeMessage(kind="CreateSessionResponse", corr_id=msg.corr_id,
                         src=component, dst_component=f"{root}.mme",
                         ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_create_session_response(self, component: str,
                                   msg: FmeMessage) -> None:
        root = component.split(".", 1)[0]
        nxt = FmeMessage(kind="BearerCreated", corr_id=msg.corr_id,
                         src=component, dst_component=root, ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=AGENT_HOP_DELAY_US)

    def _h_bearer_created(self, component: str, msg: FmeMessage) -> None:
        henb = self.henbs[component]
        rec = henb.ue_records[msg.ue_id]
        rec.bearer.state = "Active"
        rec.state = "Attached"
        nxt = FmeMessage(kind="UeNotify", corr_id=msg.corr_id, src=component,
                         dst_component=msg.ue_id, ue_id=msg.ue_id)
        self._send_local(nxt, delay_us=RADIO_CTRL_DELAY_US)

    def _h_ue_notify(self, component: str, msg: FmeMessage) -> None:
        ue = self.ues[component]
        ue.state = "Attached"
        henb = self.henbs[ue.cell_id]
        rec = henb.ue_records[component]
        if rec.pending_detach:
            rec.pending_detach = False
            self.detach_ue(component)
            return
        self._try_sync(henb, rec)
        self._arm_sync_loop()

    # context sync -----------------------------------------------------------

    def _try_sync(self, henb: HenbNode, rec: UeRecord) -> None:
        if rec.state != "Attached" or rec.epc_synced:
            return
        if not henb.function_active("context_sync"):
            return
        if not henb.routes.reaches("epc"):
            return
        if (rec.sync_sent_us is not None
                and self.sim.now - rec.sync_sent_us < self.cfg.sync_period_us):
            return
        rec.sync_seq += 1
        rec.sync_sent_us = self.sim.now
        # the attach epoch scopes the id: a later re-attach starts a fresh
        # record, and its transactions must not collide with this one's
        epoch = self.ues[rec.ue_id].attach_count
        msg = FmeMessage(kind="ContextSync",
                         corr_id=f"sync-{rec.ue_id}-{epoch}-{rec.sync_seq}",
                         src=henb.id, dst_component="epc", ue_id=rec.ue_id,
                         info=f"add:{henb.id}")
        self._send_backhaul(henb.id, msg)

    def _h_context_sync(self, component: str, msg: FmeMessage) -> None:
        op, _, henb_id = msg.info.partition(":")
        if op == "add":
            self.epc.directory[msg.ue_id] = henb_id
        else:
            self.epc.directory.pop(msg.ue_id, None)
        ack = FmeMessage(kind="ContextSyncAck", corr_id=msg.corr_id,
                         src="epc", dst_component=henb_id, ue_id=msg.ue_id,
                         info=op)
        self._send_backhaul("epc", ack)

    def _h_context_sync_ack(self, component: str, msg: FmeMessage) -> None:
        if msg.info != "add":
            return
        henb = self.henbs[component]
        rec = henb.ue_records.get(msg.ue_id)
        if rec is None or rec.state != "Attached":
            return
        rec.epc_synced = True
        if rec.bearer is not None and rec.bearer.state == "Active":
            rec.bearer.scope = "EndToEnd"

    def _arm_sync_loop(self) -> None:
        if self._sync_loop_armed:
            return
        if not self._any_unsynced():
            return
        self._sync_loop_armed = True
        self.sim.call_in(self.cfg.sync_period_us, self._sync_tick,
                         kind="sync-sweep")

    def _sync_tick(self) -> None:
        self._sync_loop_armed = False
        self._sync_sweep(immediate=False)
        self._arm_sync_loop()

    def _sync_sweep(self, immediate: bool) -> None:
        for hid in sorted(self.henbs):
            henb = self.henbs[hid]
            for ue_id in sorted(henb.ue_records):
                rec = henb.ue_records[ue_id]
                if immediate and rec.sync_sent_us is not None:
                    # recovery path: let a fresh attempt go out right away
                    rec.sync_sent_us = None
                self._try_sync(henb, rec)
        self._arm_sync_loop()

    def _any_unsynced(self) -> bool:
        return any(rec.state == "Attached" and not rec.epc_synced
                   for henb in self.henbs.values()
                   for rec in henb.ue_records.values())

    # detach ------------------------------------------------------------------

    def detach_ue(self, ue_id: str) -> None:
        ue = self.ues[ue_id]
        henb = self.henbs[ue.cell_id]
        rec = henb.ue_records.get(ue_id)
        if rec is None or rec.state == "Detached":
            return
        if rec.state == "Attaching":
            rec.pending_detach = True
            return
        msg = FmeMessage(kind="UeDetachRequest",
                         corr_id=f"detach-{ue_id}-{ue.attach_count}",
                         src=ue_id, dst_component=henb.id, ue_id=ue_id)
        self._send_local(msg, delay_us=RADIO_CTRL_DELAY_US)

    def _h_ue_detach_request(self, component: str, msg: FmeMessage) -> None:
        henb = self.henbs[component]
        rec = henb.ue_records[msg.ue_id]
        if rec.state == "Detached":
            return
        rec.state = "Detached"
        if rec.bearer is not None:
            rec.bearer.state = "Released"
        if rec.epc_synced and henb.routes.reaches("epc"):
            rec.sync_seq += 1
            epoch = self.ues[msg.ue_id].attach_count
            sync = FmeMessage(kind="ContextSync",
                              corr_id=f"sync-{msg.ue_id}-{epoch}"
                                      f"-{rec.sync_seq}",
                              src=component, dst_component="epc",
                              ue_id=msg.ue_id, info=f"remove:{component}")
            self._send_backhaul(component, sync)
        ack = FmeMessage(kind="UeDetachAck", corr_id=msg.corr_id,
                         src=component, dst_component=msg.ue_id,
                         ue_id=msg.ue_id)
        self._send_local(ack, delay_us=RADIO_CTRL_DELAY_US)

    def _h_ue_detach_ack(self, component: str, msg: FmeMessage) -> None:
        self.ues[component].state = "Detached"

    # -- user plane -------------------------------------------------------------

    def ue_ready(self, ue_id: str) -> tuple[bool, str]:
        """(attached, bearer scope) as seen by the serving base station."""
        ue = self.ues.get(ue_id)
        if ue is None:
            return False, ""
        rec = self.henbs[ue.cell_id].ue_records.get(ue_id)
        if rec is None or rec.state != "Attached" or rec.bearer is None:
            return False, ""
        return True, rec.bearer.scope

    def serving_cell(self, ue_id: str) -> str:
        return self.ues[ue_id].cell_id

    def send_user_from_ue(self, ue_id: str, packet) -> None:
        """Uplink entry: the terminal's frame contends for the cell's UL air."""
        ue = self.ues[ue_id]
        henb = self.henbs[ue.cell_id]
        rec = henb.ue_records.get(ue_id)
        if rec is None or rec.state != "Attached":
            self._drop(packet, "src-not-attached")
            return
        bits = packet.size_bytes * 8
        henb.ul_server.submit(self.sim, bits,
                              lambda: self._after_uplink(henb, packet))

    def _after_uplink(self, henb: HenbNode, packet) -> None:
        dst = packet.dst_endpoint
        if dst == "server":
            frame = Frame(dst="epc", size_bytes=packet.size_bytes,
                          kind="user", payload=packet, src=henb.id)
            self._forward_from(henb.id, frame)
            return
        dst_cell = packet.dst_node
        if dst_cell == henb.id:
            self._deliver_downlink(henb, packet)
        else:
            frame = Frame(dst=dst_cell, size_bytes=packet.size_bytes,
                          kind="user", payload=packet, src=henb.id)
            self._forward_from(henb.id, frame)

    def send_user_from_server(self, packet) -> None:
        """Downlink entry: external server hands the frame to the core."""
        self.sim.call_in(SERVER_LINK_DELAY_US,
                         lambda: self._epc_user_frame(packet),
                         kind="server-link")

    def _epc_user_frame(self, packet) -> None:
        if packet.dst_endpoint == "server":
            done = packet
            self.sim.call_in(SERVER_LINK_DELAY_US,
                             lambda: self.deliver_hook(done, self.sim.now)
                             if self.deliver_hook is not None else None,
                             kind="server-link")
            return
        henb_id = self.epc.directory.get(packet.dst_endpoint)
        if henb_id is None:
            self._drop(packet, "no-epc-context")
            return
        frame = Frame(dst=henb_id, size_bytes=packet.size_bytes, kind="user",
                      payload=packet, src="epc")
        self._forward_from("epc", frame)

    def _deliver_downlink(self, henb: HenbNode, packet) -> None:
        rec = henb.ue_records.get(packet.dst_endpoint)
        if rec is None or rec.state != "Attached":
            self._drop(packet, "dst-not-attached")
            return
        bits = packet.size_bytes * 8
        done = packet
        henb.dl_server.submit(
            self.sim, bits,
            lambda: self.deliver_hook(done, self.sim.now)
            if self.deliver_hook is not None else None)


def _snake(kind: str) -> str:
    out = []
    for i, ch in enumerate(kind):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)

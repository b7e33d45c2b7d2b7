"""Terminal-only device-to-device clustering once the serving cell is gone.

After an outage a terminal waits out an intervention delay, listens for two
beacon periods, and either joins a network it hears or founds one and starts
beaconing itself. Beacons live on a rigid frame grid; association is a
four-message random-access exchange with preamble contention and binary
exponential backoff; networks merge toward the lowest network id; members
fall back to listening when beacons stop; and every terminal keeps scanning
for the cell so the whole structure dissolves once coverage returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .engine import EventHandle, Simulator
from .mobility import Position

ROLE_CELL = "CellAttached"
ROLE_TOI_WAIT = "ToiWait"
ROLE_LISTENING = "Listening"
ROLE_BUE = "BUe"
ROLE_MEMBER = "Member"

FRAME_US = 10_000
SUBFRAME_US = 1_000

# physical channel plan within one frame (subframe indices)
EXPECTED_CHANNEL = {
    "beacon": "psbch",
    "msg1": "prach",
    "msg2": "pd2dsch",
    "msg3": "pusch_reserved",
    "msg4": "pd2dsch",
    "data": "pusch_reserved",
}
CHANNEL_SUBFRAMES = {
    "psbch": {0},
    "prach": {1},
    "pd2dsch": {2, 3, 4, 5, 6, 7},
    "pusch_reserved": {8, 9},
}


@dataclass
class D2dConfig:
    t_d_us: int = 80_000               # beacon period: eight frames
    toi_us: int = 200_000              # wait after losing the cell
    listen_periods: int = 2            # beacon periods spent listening
    defer_mod: int = 128               # first-beacon deferral slots
    n_preambles: int = 64
    max_rach_attempts: int = 8
    backoff_cap_periods: int = 16
    member_missed_limit: int = 2
    pbch_scan_period_us: int = 1_000_000
    range_m: float = 500.0
    enable_rotation: bool = False


@dataclass
class D2dUe:
    ue_id: str
    num: int
    position: Position
    role: str = ROLE_CELL
    network_id: Optional[int] = None
    serving_bue: Optional[str] = None
    last_beacon_us: int = -1
    pending_first_beacon: bool = False
    next_beacon_us: int = -1
    joining: bool = False
    rach_target: Optional[str] = None
    rach_attempt: int = 0
    beacon_handle: Optional[EventHandle] = None
    became_bue_us: Optional[int] = None
    joined_us: Optional[int] = None


class D2dCluster:
    """One population of terminals sharing a sidelink medium."""

    def __init__(self, sim: Simulator, cfg: Optional[D2dConfig] = None):
        self.sim = sim
        self.cfg = cfg or D2dConfig()
        self.ues: dict[str, D2dUe] = {}
        self.cell_available = True
        self.tx_log: list[tuple[int, str, str, str]] = []
        self._slot_beacons: dict[int, list[str]] = {}
        self._rach_buckets: dict[tuple[str, int], list[tuple[str, int]]] = {}
        self._reserved_usage: set[int] = set()

    # -- population --------------------------------------------------------

    def add_ue(self, ue_id: str, num: int, position: Position) -> D2dUe:
        ue = D2dUe(ue_id=ue_id, num=num, position=position)
        self.ues[ue_id] = ue
        return ue

    def _rng(self, ue_id: str):
        return self.sim.rng_substream(f"d2d/{ue_id}")

    def in_range(self, a: D2dUe, b: D2dUe) -> bool:
        return a.position.distance_to(b.position) <= self.cfg.range_m

    # -- cell state ----------------------------------------------------------

    def lose_cell(self) -> None:
        """Outage: every attached terminal starts the intervention timer."""
        self.cell_available = False
        for ue_id in sorted(self.ues):
            ue = self.ues[ue_id]
            if ue.role != ROLE_CELL:
                continue
            ue.role = ROLE_TOI_WAIT
            self.sim.call_in(self.cfg.toi_us,
                             lambda u=ue: self._start_listening(u),
                             kind="d2d-toi")
            stagger = (ue.num % 16) * FRAME_US
            self.sim.call_in(self.cfg.pbch_scan_period_us + stagger,
                             lambda u=ue: self._scan_tick(u),
                             kind="d2d-scan")

    def restore_cell(self) -> None:
        self.cell_available = True

    # -- listening and founding ------------------------------------------------

    def _start_listening(self, ue: D2dUe) -> None:
        ue.role = ROLE_LISTENING
        ue.joining = False
        ue.rach_target = None
        ue.rach_attempt = 0
        ue.network_id = None
        ue.serving_bue = None
        listen_us = self.cfg.listen_periods * self.cfg.t_d_us
        decision = -(-(self.sim.now + listen_us) // FRAME_US) * FRAME_US
        self.sim.call_in(decision - self.sim.now,
                         lambda: self._decide_bue(ue), kind="d2d-decide")

    def _decide_bue(self, ue: D2dUe) -> None:
        if ue.role != ROLE_LISTENING or ue.joining:
            return
        ue.role = ROLE_BUE
        ue.network_id = ue.num
        ue.became_bue_us = self.sim.now
        ue.pending_first_beacon = True
        defer = (ue.num % self.cfg.defer_mod) * FRAME_US
        ue.beacon_handle = self.sim.call_in(
            defer, lambda: self._beacon_tick(ue), kind="d2d-beacon")

    def _beacon_tick(self, ue: D2dUe) -> None:
        if ue.role != ROLE_BUE:
            return
        ue.pending_first_beacon = False
        slot = self.sim.now
        ue.next_beacon_us = slot + self.cfg.t_d_us
        self.tx_log.append((slot, ue.ue_id, "beacon", "psbch"))
        bucket = self._slot_beacons.setdefault(slot, [])
        if not bucket:
            self.sim.call_in(0, lambda s=slot: self._resolve_beacon_slot(s),
                             kind="d2d-slot-resolve")
        bucket.append(ue.ue_id)
        ue.beacon_handle = self.sim.call_in(
            self.cfg.t_d_us, lambda: self._beacon_tick(ue), kind="d2d-beacon")

    def _resolve_beacon_slot(self, slot: int) -> None:
        tx_ids = sorted(self._slot_beacons.pop(slot, []))
        snapshot = {tid: self.ues[tid].network_id for tid in tx_ids}
        for ue_id in sorted(self.ues):
            ue = self.ues[ue_id]
            heard = [tid for tid in tx_ids
                     if tid != ue_id and self.in_range(ue, self.ues[tid])]
            if len(heard) != 1:
                continue   # silence, or a collision erases the slot
            self._on_beacon(ue, heard[0], snapshot[heard[0]])

    def _on_beacon(self, ue: D2dUe, bue_id: str,
                   network_id: Optional[int]) -> None:
        if network_id is None:
            return
        if ue.role == ROLE_LISTENING and not ue.joining:
            self._begin_join(ue, bue_id)
        elif ue.role == ROLE_BUE:
            if ue.pending_first_beacon or network_id < (ue.network_id or 0):
                # someone else's network wins: stop beaconing, join theirs
                if ue.beacon_handle is not None:
                    self.sim.cancel(ue.beacon_handle)
                    ue.beacon_handle = None
                ue.role = ROLE_LISTENING
                ue.pending_first_beacon = False
                self._begin_join(ue, bue_id)
        elif ue.role == ROLE_MEMBER:
            if network_id == ue.network_id:
                ue.last_beacon_us = self.sim.now
                ue.serving_bue = bue_id

    # -- association (four-message random access) --------------------------------

    def _begin_join(self, ue: D2dUe, bue_id: str) -> None:
        ue.joining = True
        ue.rach_target = bue_id
        ue.rach_attempt = 0
        self._schedule_msg1(ue, backoff_periods=0)

    def _schedule_msg1(self, ue: D2dUe, backoff_periods: int) -> None:
        frame_now = (self.sim.now // FRAME_US) * FRAME_US
        t_msg1 = (frame_now + FRAME_US
                  + backoff_periods * self.cfg.t_d_us + SUBFRAME_US)
        self.sim.call_in(t_msg1 - self.sim.now,
                         lambda: self._send_msg1(ue), kind="d2d-msg1")

    def _send_msg1(self, ue: D2dUe) -> None:
        if ue.role != ROLE_LISTENING or not ue.joining:
            return
        target = ue.rach_target
        preamble = int(self._rng(ue.ue_id).integers(0, self.cfg.n_preambles))
        self.tx_log.append((self.sim.now, ue.ue_id, "msg1", "prach"))
        key = (target, self.sim.now)
        bucket = self._rach_buckets.setdefault(key, [])
        if not bucket:
            self.sim.call_in(0, lambda k=key: self._resolve_rach(k),
                             kind="d2d-rach-resolve")
        bucket.append((ue.ue_id, preamble))

    def _resolve_rach(self, key: tuple[str, int]) -> None:
        target_id, t = key
        entries = self._rach_buckets.pop(key, [])
        target = self.ues[target_id]
        if target.role != ROLE_BUE:
            for ue_id, _ in sorted(entries):
                self._rach_fail(self.ues[ue_id])
            return
        by_preamble: dict[int, list[str]] = {}
        for ue_id, preamble in entries:
            by_preamble.setdefault(preamble, []).append(ue_id)
        winners = sorted(ids[0] for ids in by_preamble.values()
                         if len(ids) == 1)
        losers = sorted(uid for ids in by_preamble.values()
                        if len(ids) > 1 for uid in ids)
        frame0 = (t // FRAME_US) * FRAME_US
        for k, ue_id in enumerate(winners):
            self._grant(self.ues[ue_id], target, frame0, k)
        for ue_id in losers:
            self._rach_fail(self.ues[ue_id])

    def _grant(self, ue: D2dUe, target: D2dUe, frame0: int, k: int) -> None:
        net_id = target.network_id
        t_msg2 = frame0 + 3 * SUBFRAME_US
        t_msg3 = frame0 + (k // 2) * FRAME_US + 8 * SUBFRAME_US \
            + (k % 2) * SUBFRAME_US
        t_msg4 = ((t_msg3 // FRAME_US) + 1) * FRAME_US + 2 * SUBFRAME_US
        self.sim.call_in(
            t_msg2 - self.sim.now,
            lambda: self._send_msg2(target, ue), kind="d2d-msg2")
        self.sim.call_in(
            t_msg3 - self.sim.now,
            lambda: self._send_msg3(ue, target), kind="d2d-msg3")
        self.sim.call_in(
            t_msg4 - self.sim.now,
            lambda: self._complete_join(ue, target, net_id), kind="d2d-msg4")

    def _send_msg2(self, target: D2dUe, ue: D2dUe) -> None:
        if target.role == ROLE_BUE:
            self.tx_log.append((self.sim.now, target.ue_id, "msg2",
                                "pd2dsch"))

    def _send_msg3(self, ue: D2dUe, target: D2dUe) -> None:
        if ue.joining and target.role == ROLE_BUE:
            self.tx_log.append((self.sim.now, ue.ue_id, "msg3",
                                "pusch_reserved"))

    def _complete_join(self, ue: D2dUe, target: D2dUe,
                       net_id: Optional[int]) -> None:
        if not ue.joining or ue.role != ROLE_LISTENING:
            return
        if target.role != ROLE_BUE or target.network_id != net_id:
            self._rach_fail(ue)
            return
        self.tx_log.append((self.sim.now, target.ue_id, "msg4", "pd2dsch"))
        ue.role = ROLE_MEMBER
        ue.network_id = net_id
        ue.serving_bue = target.ue_id
        ue.joining = False
        ue.last_beacon_us = self.sim.now
        ue.joined_us = self.sim.now
        self.sim.call_in(self.cfg.t_d_us + SUBFRAME_US,
                         lambda: self._member_watch(ue), kind="d2d-watch")

    def _rach_fail(self, ue: D2dUe) -> None:
        if not ue.joining:
            return
        ue.rach_attempt += 1
        if ue.rach_attempt >= self.cfg.max_rach_attempts:
            self._start_listening(ue)
            return
        cap = min(2 ** (ue.rach_attempt - 1), self.cfg.backoff_cap_periods)
        backoff = int(self._rng(ue.ue_id).integers(1, cap + 1))
        self._schedule_msg1(ue, backoff_periods=backoff)

    # -- membership upkeep ---------------------------------------------------

    def _member_watch(self, ue: D2dUe) -> None:
        if ue.role != ROLE_MEMBER:
            return
        silence = self.sim.now - ue.last_beacon_us
        limit = self.cfg.member_missed_limit * self.cfg.t_d_us + SUBFRAME_US
        if silence > limit:
            self._start_listening(ue)
            return
        self.sim.call_in(self.cfg.t_d_us, lambda: self._member_watch(ue),
                         kind="d2d-watch")

    # -- reserved data slots ----------------------------------------------------

    def reserve_data_slot(self, ue_id: str) -> int:
        """Book the next free reserved uplink slot for a member's burst."""
        ue = self.ues[ue_id]
        if ue.role != ROLE_MEMBER:
            raise ValueError(f"{ue_id} holds no membership to reserve under")
        t = ((self.sim.now // FRAME_US) + 1) * FRAME_US + 8 * SUBFRAME_US
        while t in self._reserved_usage:
            sub = (t % FRAME_US) // SUBFRAME_US
            t = t + SUBFRAME_US if sub == 8 else t + FRAME_US - SUBFRAME_US
        self._reserved_usage.add(t)
        self.sim.call_in(
            t - self.sim.now,
            lambda: self.tx_log.append((self.sim.now, ue_id, "data",
                                        "pusch_reserved")),
            kind="d2d-data")
        return t

    # -- cell return -------------------------------------------------------------

    def _scan_tick(self, ue: D2dUe) -> None:
        if ue.role == ROLE_CELL:
            return
        if not self.cell_available:
            self.sim.call_in(self.cfg.pbch_scan_period_us,
                             lambda: self._scan_tick(ue), kind="d2d-scan")
            return
        if ue.role == ROLE_BUE:
            self._leave_bue_role(ue)
        ue.role = ROLE_CELL
        ue.joining = False
        ue.network_id = None
        ue.serving_bue = None

    def _leave_bue_role(self, ue: D2dUe) -> None:
        if ue.beacon_handle is not None:
            self.sim.cancel(ue.beacon_handle)
            ue.beacon_handle = None
        if not self.cfg.enable_rotation:
            return
        members = sorted(
            (v for v in self.ues.values()
             if v.role == ROLE_MEMBER and v.network_id == ue.network_id
             and self.in_range(ue, v)),
            key=lambda v: v.num)
        if not members:
            return
        heir = members[0]
        heir.role = ROLE_BUE
        heir.network_id = ue.network_id
        heir.serving_bue = None
        heir.became_bue_us = self.sim.now
        heir.pending_first_beacon = False
        # take over the exact beacon grid: no slot is skipped, and the slot
        # is carried along in case the heir steps down before transmitting
        heir.next_beacon_us = ue.next_beacon_us
        heir.beacon_handle = self.sim.call_in(
            ue.next_beacon_us - self.sim.now,
            lambda: self._beacon_tick(heir), kind="d2d-beacon")

    # -- queries ----------------------------------------------------------------

    def roles(self) -> dict[str, str]:
        return {uid: self.ues[uid].role for uid in sorted(self.ues)}

    def networks(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {}
        for uid in sorted(self.ues):
            ue = self.ues[uid]
            if ue.role in (ROLE_BUE, ROLE_MEMBER) and ue.network_id is not None:
                out.setdefault(ue.network_id, []).append(uid)
        return out

    def beacon_times(self, ue_id: Optional[str] = None) -> list[int]:
        return [t for t, uid, kind, _ in self.tx_log
                if kind == "beacon" and (ue_id is None or uid == ue_id)]


def audit_channel_map(tx_log, frame_us: int = FRAME_US) -> list[str]:
    """Cross-check every logged transmission against the channel plan."""
    violations = []
    for t, ue_id, kind, channel in tx_log:
        expected = EXPECTED_CHANNEL.get(kind)
        if expected is None:
            violations.append(f"{t}us {ue_id}: unknown kind {kind!r}")
            continue
        if channel != expected:
            violations.append(
                f"{t}us {ue_id}: {kind} on {channel} (expected {expected})")
            continue
        subframe = (t % frame_us) // SUBFRAME_US
        if subframe not in CHANNEL_SUBFRAMES[channel]:
            violations.append(
                f"{t}us {ue_id}: {channel} in subframe {subframe}")
    return violations

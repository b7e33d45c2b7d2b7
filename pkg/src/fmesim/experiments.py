"""The two canonical experiment runners and their deterministic writers.

Runner one drives the three-cell recovery scenario: a row of base stations
with embedded core agents, a distant core reachable through one of them,
and a proportional application mix, measured in one-second bins over a
fixed window. Runner two sweeps the standalone beacon-election protocol
over coverage fraction and activity probability with a vectorized Monte
Carlo model of the slot-contention rule.

Both emit CSV/JSON with pinned column orders and float formats, so a given
(config, seed) pair reproduces byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .engine import Simulator, substream, US_PER_S
from .fme import FmeConfig, FmeNetwork
from .metrics import (BinLedger, FlowStats, summarize_ci,
                      validate_handshake_trace)
from .mobility import (DiscRegion, MOBILITY_TICK_MS, Position, waypoint_init,
                       waypoint_step)
from .radio import CellConfig, tdd_cell_capacity_bps
from .scenario import Scenario
from .traffic import FlowSpec, TrafficEngine, video_flow, voice_flow

ATTACH_START_US = 100_000
ATTACH_STRIDE_US = 1_000
RUN_TAIL_US = 50_000

THROUGHPUT_HEADER = "round,cell_id,direction,avg_bps,per_user_avg_bps,n_users"
D2D_HEADER = ("phi,q,p_beacon,p_lo,p_hi,delay_ms,delay_lo,delay_hi,"
              "drops,capped_fraction")

# Beacon-election timing: a joiner listens for two beacon periods before
# contending, and the delay metric is capped at one hundred periods.
FIG7_LISTEN_PERIODS = 2
FIG7_CAP_PERIODS = 100
FIG7_T_D_MS = 80.0
FIG7_REGION_RADIUS_M = 500.0
FIG7_RANGE_M = 65_000.0          # direct-mode budget range: clique regime


# --------------------------------------------------------------------------
# Three-cell scenario
# --------------------------------------------------------------------------

@dataclass
class RoundResult:
    """Everything one simulated round produced, metrics and handles both."""

    round_idx: int
    rows: list[dict]                      # per (cell, direction)
    flow_stats: dict[str, FlowStats]
    flow_specs: dict[str, FlowSpec]
    violations: list
    meas_start_us: int
    meas_end_us: int
    capacity_bps: dict[str, float]
    max_bin_bits: dict[tuple[str, str], float]
    sim: Simulator = field(repr=False, default=None)
    net: FmeNetwork = field(repr=False, default=None)
    eng: TrafficEngine = field(repr=False, default=None)
    ledger: BinLedger = field(repr=False, default=None)


@dataclass
class Fig6Result:
    rows: list[dict]                      # throughput.csv rows, all rounds
    summary: dict
    rounds: list[RoundResult] = field(repr=False, default_factory=list)


def build_network(sim: Simulator, scn: Scenario,
                  ledger: Optional[BinLedger] = None
                  ) -> tuple[FmeNetwork, list[str]]:
    """Node graph per the scenario geometry: a row of base stations and a
    core placed beyond the first one, so exactly one station has a direct
    core link and the rest relay."""
    n_cells = scn.get("area.n_cells")
    spacing = scn.get("area.henb_spacing_m")
    henbs = {f"henb{i + 1}": Position(i * spacing, 0.0)
             for i in range(n_cells)}
    epc_pos = Position(-scn.get("area.epc_offset_m"), 0.0)
    cfg = FmeConfig(
        backhaul_bps=scn.get("backhaul.capacity_bps"),
        hop_delay_us=scn.get("backhaul.hop_delay_us"),
        backhaul_max_range_m=scn.get("backhaul.max_range_m"),
        dma_capacity_bytes=scn.get("backhaul.dma_capacity_bytes"),
        gw_budget=scn.get("gw.budget"),
        cell=CellConfig(
            n_rb=scn.get("cell.n_rb"),
            tdd_config=scn.get("cell.tdd_config"),
            bits_per_symbol=scn.get("cell.bits_per_symbol"),
            code_rate=scn.get("cell.code_rate"),
        ),
    )
    net = FmeNetwork(sim, cfg, epc_pos, henbs, ledger=ledger)
    return net, sorted(henbs)


def build_flows(scn: Scenario, cells: list[str],
                cell_ues: dict[str, list[str]], stop_us: int,
                jitter: Callable[[], int]) -> list[FlowSpec]:
    """Application mix with a deterministic terminal assignment.

    Per cell: two-way voice calls take terminals pairwise from index 0,
    video streams take the next indices, and each adjacent cell pair adds
    two-way calls drawing one further terminal per cell per session (the
    middle cell serves both pairs, so it has the most loaded users).
    """
    n_voice = scn.get("apps.voice_sessions_per_cell")
    n_vup = scn.get("apps.video_ul_per_cell")
    n_vdn = scn.get("apps.video_dl_per_cell")
    n_inter = scn.get("apps.intercell_sessions_per_pair")
    cursor = {cell: 0 for cell in cells}

    def take(cell: str) -> str:
        ues = cell_ues[cell]
        if cursor[cell] >= len(ues):
            raise ValueError(
                f"cell {cell}: app mix needs more than {len(ues)} terminals")
        ue = ues[cursor[cell]]
        cursor[cell] += 1
        return ue

    flows: list[FlowSpec] = []
    for cell in cells:
        for s in range(n_voice):
            a, b = take(cell), take(cell)
            flows.append(voice_flow(f"{cell}-voi{s}-ab", a, b,
                                    jitter(), stop_us))
            flows.append(voice_flow(f"{cell}-voi{s}-ba", b, a,
                                    jitter(), stop_us))
        for v in range(n_vup):
            flows.append(video_flow(f"{cell}-vup{v}", take(cell), "server",
                                    jitter(), stop_us))
        for v in range(n_vdn):
            flows.append(video_flow(f"{cell}-vdn{v}", "server", take(cell),
                                    jitter(), stop_us))
    for ca, cb in zip(cells, cells[1:]):
        for s in range(n_inter):
            a, b = take(ca), take(cb)
            flows.append(voice_flow(f"x-{ca}-{cb}-{s}-ab", a, b,
                                    jitter(), stop_us))
            flows.append(voice_flow(f"x-{ca}-{cb}-{s}-ba", b, a,
                                    jitter(), stop_us))
    return flows


def expected_packets(spec: FlowSpec) -> int:
    span = spec.stop_us - spec.start_us
    return (span + spec.period_us - 1) // spec.period_us


def run_fig6_round(scn: Scenario, seed: int, round_idx: int,
                   instrument: Optional[Callable] = None) -> RoundResult:
    """One full round: bootstrap, place, attach, run traffic, measure.

    `instrument(sim, net, eng)` runs after setup and before the clock
    starts, for callers that want to inject faults or extra probes.
    """
    sim = Simulator(seed=seed)
    ledger = BinLedger()
    net, cells = build_network(sim, scn, ledger)
    net.bootstrap_all()

    radius = scn.get("area.cell_radius_m")
    ues_per_cell = scn.get("apps.ues_per_cell")
    cell_ues: dict[str, list[str]] = {}
    walkers: dict[str, tuple] = {}
    for cell in cells:
        rng_place = sim.rng_substream(f"fig6/r{round_idx}/place/{cell}")
        region = DiscRegion(net.henbs[cell].position, radius)
        ids = []
        for k in range(ues_per_cell):
            ue_id = f"{cell}-u{k:03d}"
            state = waypoint_init(region, rng_place)
            net.add_ue(ue_id, cell, state.position)
            ids.append(ue_id)
            walkers[ue_id] = (state, region)
        cell_ues[cell] = ids

    for i, ue_id in enumerate(sorted(net.ues)):
        sim.call_in(ATTACH_START_US + i * ATTACH_STRIDE_US,
                    lambda u=ue_id: net.attach_ue(u), kind="attach-start")

    warmup_us = int(round(scn.get("run.warmup_s") * US_PER_S))
    jitter_us = int(round(scn.get("run.jitter_s") * US_PER_S))
    duration_us = int(round(scn.get("run.duration_s") * US_PER_S))
    meas_start = warmup_us + jitter_us
    meas_end = meas_start + duration_us
    if meas_start % US_PER_S or meas_end % US_PER_S:
        raise ValueError("warmup_s + jitter_s and duration_s must land on "
                         "whole seconds so bins align")

    rng_jitter = sim.rng_substream(f"fig6/r{round_idx}/jitter")

    def jitter() -> int:
        if jitter_us <= 0:
            return warmup_us
        return warmup_us + int(rng_jitter.integers(0, jitter_us))

    flows = build_flows(scn, cells, cell_ues, meas_end, jitter)
    eng = TrafficEngine(sim, net, flows)
    eng.start()

    tick_us = MOBILITY_TICK_MS * 1_000
    rng_mob = sim.rng_substream(f"fig6/r{round_idx}/mobility")

    def mob_tick() -> None:
        for ue_id in sorted(walkers):
            state, region = walkers[ue_id]
            state = waypoint_step(state, MOBILITY_TICK_MS / 1e3, region,
                                  rng_mob)
            walkers[ue_id] = (state, region)
            net.ues[ue_id].position = state.position
        if sim.now < meas_end:
            sim.call_in(tick_us, mob_tick, kind="mobility")

    sim.call_in(tick_us, mob_tick, kind="mobility")

    outage_link = scn.get("outage.link")
    if outage_link:
        parts = outage_link.split("-")
        if len(parts) != 2:
            raise ValueError(f"outage.link must be 'nodeA-nodeB', "
                             f"got {outage_link!r}")
        a, b = parts
        at_us = meas_start + int(round(scn.get("outage.at_s") * US_PER_S))
        dur_us = int(round(scn.get("outage.duration_s") * US_PER_S))
        sim.call_in(at_us, lambda: net.set_link_state(a, b, False),
                    kind="outage-start")
        sim.call_in(at_us + dur_us, lambda: net.set_link_state(a, b, True),
                    kind="outage-end")

    if instrument is not None:
        instrument(sim, net, eng)

    sim.run_until(meas_end + RUN_TAIL_US)

    duration_s = duration_us / US_PER_S
    capacity = {"dl": tdd_cell_capacity_bps(net.cfg.cell, "dl"),
                "ul": tdd_cell_capacity_bps(net.cfg.cell, "ul")}
    rows: list[dict] = []
    max_bin: dict[tuple[str, str], float] = {}
    for cell in cells:
        users = eng.users_with_traffic(cell)
        for direction in ("dl", "ul"):
            bits = ledger.window_bits(cell, direction, meas_start, meas_end)
            avg_bps = bits / duration_s
            per_user = avg_bps / len(users) if users else 0.0
            rows.append({
                "round": round_idx + 1,
                "cell_id": cell,
                "direction": direction,
                "avg_bps": avg_bps,
                "per_user_avg_bps": per_user,
                "n_users": len(users),
            })
            series = ledger.series(cell, direction)
            window = [v for i, v in series.items()
                      if meas_start // US_PER_S <= i < meas_end // US_PER_S]
            max_bin[(cell, direction)] = max(window) if window else 0.0

    violations = validate_handshake_trace(net.control_log)
    return RoundResult(
        round_idx=round_idx,
        rows=rows,
        flow_stats=dict(eng.stats),
        flow_specs={fid: eng.flows[fid].spec for fid in eng.flows},
        violations=violations,
        meas_start_us=meas_start,
        meas_end_us=meas_end,
        capacity_bps=capacity,
        max_bin_bits=max_bin,
        sim=sim, net=net, eng=eng, ledger=ledger,
    )


def _flow_goodput_fraction(spec: FlowSpec, st: FlowStats) -> float:
    span_s = (spec.stop_us - spec.start_us) / US_PER_S
    if span_s <= 0:
        return 0.0
    return (st.bits_delivered / span_s) / spec.rate_bps


def run_fig6_scenario(scn: Scenario, seed: int) -> Fig6Result:
    n_rounds = scn.get("run.rounds")
    round_results = [run_fig6_round(scn, seed, r) for r in range(n_rounds)]
    rows = [row for rr in round_results for row in rr.rows]

    cells = sorted({row["cell_id"] for row in rows})
    cell_summary: dict[str, Any] = {}
    for cell in cells:
        per_dir: dict[str, Any] = {}
        for direction in ("dl", "ul"):
            per_user = [row["per_user_avg_bps"] for row in rows
                        if row["cell_id"] == cell
                        and row["direction"] == direction]
            avg = [row["avg_bps"] for row in rows
                   if row["cell_id"] == cell and row["direction"] == direction]
            if len(per_user) >= 2:
                ci = summarize_ci(per_user)
                lo, hi = ci.lo, ci.hi
                mean = ci.mean
            else:
                mean = per_user[0] if per_user else 0.0
                lo = hi = mean
            per_dir[direction] = {
                "mean_per_user_bps": round(mean, 3),
                "ci_lo": round(lo, 3),
                "ci_hi": round(hi, 3),
                "mean_bps": round(sum(avg) / len(avg), 3) if avg else 0.0,
            }
        n_users = [row["n_users"] for row in rows if row["cell_id"] == cell]
        cell_summary[cell] = {"n_users": n_users[0], **per_dir}

    sent = delivered = dropped = seq_violations = 0
    min_fraction = {"voice": math.inf, "video": math.inf}
    for rr in round_results:
        for fid, st in sorted(rr.flow_stats.items()):
            sent += st.sent
            delivered += st.delivered
            dropped += st.dropped
            seq_violations += st.seq_violations
            frac = _flow_goodput_fraction(rr.flow_specs[fid], st)
            min_fraction[st.kind] = min(min_fraction[st.kind], frac)
    for kind in min_fraction:
        if math.isinf(min_fraction[kind]):
            min_fraction[kind] = 0.0

    capacity = round_results[0].capacity_bps
    max_util = 0.0
    for rr in round_results:
        for (cell, direction), bits in rr.max_bin_bits.items():
            max_util = max(max_util, bits / capacity[direction])

    summary = {
        "experiment": "fig6",
        "scale": scn.scale,
        "seed": seed,
        "rounds": n_rounds,
        "duration_s": scn.get("run.duration_s"),
        "capacity_bps": {k: round(v, 3) for k, v in capacity.items()},
        "cells": cell_summary,
        "flows": {
            "count": len(round_results[0].flow_specs),
            "sent": sent,
            "delivered": delivered,
            "dropped": dropped,
            "seq_violations": seq_violations,
            "min_goodput_fraction": {
                k: round(v, 6) for k, v in sorted(min_fraction.items())},
        },
        "trace": {
            "rounds_validated": n_rounds,
            "violations": sum(len(rr.violations) for rr in round_results),
        },
        "max_bin_utilization": round(max_util, 6),
    }
    return Fig6Result(rows=rows, summary=summary, rounds=round_results)


# --------------------------------------------------------------------------
# Beacon-election Monte Carlo sweep
# --------------------------------------------------------------------------

@dataclass
class Fig7Result:
    rows: list[dict]
    summary: dict


def fig7_q_grid(start: float, stop: float, step: float) -> list[float]:
    if step <= 0 or stop < start:
        raise ValueError("activity grid needs step > 0 and stop >= start")
    n = int(round((stop - start) / step))
    grid = [round(start + i * step, 10) for i in range(n + 1)]
    for q in grid:
        if not 0.0 < q <= 1.0:
            raise ValueError(f"activity probability {q} outside (0, 1]")
    return grid


def candidate_count(phi: float, m: int) -> int:
    """Candidates per drop implied by the coverage fraction; the product
    must be integral or the sweep point is ill-posed."""
    raw = (1.0 - phi) * m
    nb = int(round(raw))
    if abs(raw - nb) > 1e-9:
        raise ValueError(
            f"coverage {phi} with m={m} yields non-integral "
            f"candidate count {raw}")
    if nb < 1:
        raise ValueError(f"coverage {phi} with m={m} leaves no candidates")
    return nb


def beacon_success_closed_form(nb: int, q: float) -> float:
    """Independent-activity slot rule: a regular decodes a beacon in one
    period iff exactly one of its nb in-range candidates transmits."""
    return nb * q * (1.0 - q) ** (nb - 1)


def run_fig7_point(seed: int, phi: float, q: float, *, m: int, drops: int,
                   region_radius_m: float = FIG7_REGION_RADIUS_M,
                   range_m: float = FIG7_RANGE_M,
                   t_d_ms: float = FIG7_T_D_MS) -> dict:
    nb = candidate_count(phi, m)
    n_reg = m - nb
    periods = FIG7_CAP_PERIODS - FIG7_LISTEN_PERIODS
    rng = substream(seed, f"fig7/phi={phi:.4f}/q={q:.4f}")

    # Geometry: every drop places m points uniformly in a disc; the first
    # nb indices are the designated candidates (points are exchangeable).
    radii = region_radius_m * np.sqrt(rng.random((drops, m)))
    theta = rng.random((drops, m)) * (2.0 * math.pi)
    xs = radii * np.cos(theta)
    ys = radii * np.sin(theta)
    dx = xs[:, :nb, None] - xs[:, None, nb:]
    dy = ys[:, :nb, None] - ys[:, None, nb:]
    in_range = ((dx * dx + dy * dy) <= range_m * range_m).astype(np.float32)

    activity = (rng.random((drops, periods, nb)) < q).astype(np.float32)
    arrivals = np.matmul(activity, in_range)          # (drops, periods, reg)
    success = arrivals == 1.0                         # exact small integers

    per_drop_p = success.mean(axis=(1, 2))
    p_ci = summarize_ci(per_drop_p)

    any_success = success.any(axis=1)                 # (drops, reg)
    k_first = success.argmax(axis=1) + 1              # 1-based period index
    delay_periods = np.where(any_success,
                             FIG7_LISTEN_PERIODS + k_first,
                             FIG7_CAP_PERIODS)
    per_drop_delay = (delay_periods * t_d_ms).mean(axis=1)
    d_ci = summarize_ci(per_drop_delay)
    capped_fraction = 1.0 - float(any_success.mean())

    return {
        "phi": phi,
        "q": q,
        "p_beacon": p_ci.mean,
        "p_lo": p_ci.lo,
        "p_hi": p_ci.hi,
        "delay_ms": d_ci.mean,
        "delay_lo": d_ci.lo,
        "delay_hi": d_ci.hi,
        "drops": drops,
        "capped_fraction": capped_fraction,
        "n_candidates": nb,
        "n_regulars": n_reg,
    }


def run_fig7_experiment(seed: int, *, m: int = 75,
                        phis: tuple[float, ...] = (0.8, 0.92),
                        q_grid: Optional[list[float]] = None,
                        drops: int = 2000) -> Fig7Result:
    if q_grid is None:
        q_grid = fig7_q_grid(0.05, 1.0, 0.05)
    rows: list[dict] = []
    for phi in phis:
        candidate_count(phi, m)     # fail fast before any sampling
        for q in q_grid:
            rows.append(run_fig7_point(seed, phi, q, m=m, drops=drops))

    per_phi: dict[str, Any] = {}
    for phi in phis:
        mine = [r for r in rows if r["phi"] == phi]
        best = max(mine, key=lambda r: r["p_beacon"])
        fastest = min(mine, key=lambda r: r["delay_ms"])
        nb = mine[0]["n_candidates"]
        oracle_err = max(abs(r["p_beacon"]
                             - beacon_success_closed_form(nb, r["q"]))
                         for r in mine)
        per_phi[f"{phi:g}"] = {
            "n_candidates": nb,
            "argmax_q": best["q"],
            "peak_p_beacon": round(best["p_beacon"], 6),
            "argmin_delay_q": fastest["q"],
            "min_delay_ms": round(fastest["delay_ms"], 3),
            "max_abs_err_vs_closed_form": round(oracle_err, 6),
        }

    summary = {
        "experiment": "fig7",
        "seed": seed,
        "m": m,
        "drops": drops,
        "phis": list(phis),
        "q_grid": q_grid,
        "per_phi": per_phi,
    }
    return Fig7Result(rows=rows, summary=summary)


# --------------------------------------------------------------------------
# Writers
# --------------------------------------------------------------------------

def write_throughput_csv(path: str, rows: list[dict]) -> None:
    lines = [THROUGHPUT_HEADER]
    for r in rows:
        lines.append(f"{r['round']},{r['cell_id']},{r['direction']},"
                     f"{r['avg_bps']:.3f},{r['per_user_avg_bps']:.3f},"
                     f"{r['n_users']}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_d2d_csv(path: str, rows: list[dict]) -> None:
    lines = [D2D_HEADER]
    for r in rows:
        lines.append(f"{r['phi']:.2f},{r['q']:.2f},"
                     f"{r['p_beacon']:.6f},{r['p_lo']:.6f},{r['p_hi']:.6f},"
                     f"{r['delay_ms']:.3f},{r['delay_lo']:.3f},"
                     f"{r['delay_hi']:.3f},{r['drops']},"
                     f"{r['capped_fraction']:.6f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_json(path: str, summary: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")

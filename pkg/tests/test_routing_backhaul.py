"""Hop-count routing, store-and-forward links, and disruption buffers."""

import pytest

from fmesim.backhaul import (
    DEFAULT_DMA_CAPACITY_BYTES,
    BackhaulLink,
    Frame,
    HoldingBuffer,
    TransmitServer,
    Tunnel,
)
from fmesim.engine import Simulator
from fmesim.routing import RouteTable, compute_routes

CHAIN_NODES = ["epc", "henb1", "henb2", "henb3"]
CHAIN_LINKS = {
    frozenset(("epc", "henb1")),
    frozenset(("henb1", "henb2")),
    frozenset(("henb2", "henb3")),
}


def test_chain_routes_have_expected_next_hops_and_costs():
    routes = compute_routes(CHAIN_NODES, CHAIN_LINKS, "henb3")
    assert routes["henb2"].next_hop == "henb2"
    assert routes["henb2"].cost == 1
    assert routes["henb1"].next_hop == "henb2"
    assert routes["henb1"].cost == 2
    assert routes["epc"].next_hop == "henb2"
    assert routes["epc"].cost == 3


def test_unreachable_destination_has_no_entry():
    links = {frozenset(("epc", "henb1"))}
    routes = compute_routes(CHAIN_NODES, links, "henb3")
    assert routes == {}


def test_equal_cost_tie_breaks_to_lowest_neighbour_id():
    nodes = ["a", "b", "c", "d"]
    links = {
        frozenset(("a", "b")),
        frozenset(("a", "c")),
        frozenset(("b", "d")),
        frozenset(("c", "d")),
    }
    routes = compute_routes(nodes, links, "a")
    assert routes["d"].cost == 2
    assert routes["d"].next_hop == "b"


def test_route_table_epoch_bumps_on_recompute():
    table = RouteTable()
    table.recompute(CHAIN_NODES, CHAIN_LINKS, "henb3")
    first = table.epoch
    assert table.reaches("epc")
    table.recompute(CHAIN_NODES, set(), "henb3")
    assert table.epoch == first + 1
    assert not table.reaches("epc")
    assert table.next_hop("epc") is None


def test_transmit_server_serializes_back_to_back_frames():
    sim = Simulator(seed=1)
    done = []
    server = TransmitServer(rate_bps=1_000_000)
    # 1000 bytes at 1 Mb/s = 8000 us of service per frame.
    server.submit(sim, 1000 * 8, lambda: done.append(sim.now))
    server.submit(sim, 1000 * 8, lambda: done.append(sim.now))
    server.submit(sim, 500 * 8, lambda: done.append(sim.now))
    sim.run()
    assert done == [8_000, 16_000, 20_000]


def test_transmit_server_observer_reports_service_intervals():
    sim = Simulator(seed=1)
    seen = []
    server = TransmitServer(rate_bps=1_000_000,
                            observer=lambda s, e, b: seen.append((s, e, b)))
    server.submit(sim, 8_000, lambda: None)
    server.submit(sim, 8_000, lambda: None)
    sim.run()
    assert seen == [(0, 8_000, 8_000), (8_000, 16_000, 8_000)]


def test_transmit_server_idle_gap_starts_service_at_submit_time():
    sim = Simulator(seed=1)
    seen = []
    server = TransmitServer(rate_bps=1_000_000,
                            observer=lambda s, e, b: seen.append((s, e, b)))
    server.submit(sim, 8_000, lambda: None)
    sim.call_in(50_000, lambda: server.submit(sim, 8_000, lambda: None))
    sim.run()
    assert seen == [(0, 8_000, 8_000), (50_000, 58_000, 8_000)]


def test_backhaul_link_adds_hop_delay_after_serialization():
    sim = Simulator(seed=1)
    got = []
    link = BackhaulLink("henb1", "henb2", capacity_bps=20_000_000,
                        hop_delay_us=2_000)
    frame = Frame(dst="henb2", size_bytes=1500, kind="user")
    # 1500 B at 20 Mb/s = 600 us serialization, then 2000 us propagation.
    link.transmit(sim, "henb1", frame, lambda fr: got.append((sim.now, fr)))
    sim.run()
    assert got == [(2_600, frame)]


def test_backhaul_link_directions_do_not_share_a_server():
    sim = Simulator(seed=1)
    got = []
    link = BackhaulLink("a", "b", capacity_bps=1_000_000, hop_delay_us=0)
    fa = Frame(dst="b", size_bytes=1000, kind="user")
    fb = Frame(dst="a", size_bytes=1000, kind="user")
    link.transmit(sim, "a", fa, lambda fr: got.append(("a->b", sim.now)))
    link.transmit(sim, "b", fb, lambda fr: got.append(("b->a", sim.now)))
    sim.run()
    assert sorted(got) == [("a->b", 8_000), ("b->a", 8_000)]


def test_holding_buffer_evicts_oldest_when_full():
    buf = HoldingBuffer(capacity_bytes=3_000)
    frames = [Frame(dst="epc", size_bytes=1_000, kind="user", payload=i)
              for i in range(4)]
    assert buf.push(frames[0]) == []
    assert buf.push(frames[1]) == []
    assert buf.push(frames[2]) == []
    evicted = buf.push(frames[3])
    assert [f.payload for f in evicted] == [0]
    assert buf.evicted_count == 1
    assert [f.payload for f in buf.pop_all()] == [1, 2, 3]
    assert buf.held_bytes == 0


def test_holding_buffer_rejects_frame_larger_than_capacity():
    buf = HoldingBuffer(capacity_bytes=100)
    big = Frame(dst="epc", size_bytes=200, kind="user", payload="x")
    evicted = buf.push(big)
    assert evicted == [big]
    assert buf.held_bytes == 0


def test_default_dma_capacity_is_sixteen_megabytes():
    assert DEFAULT_DMA_CAPACITY_BYTES == 16 * 1024 * 1024


def test_tunnel_state_is_derived_from_route_and_backlog():
    t = Tunnel(kind="vS1", owner="henb3", peer="epc")
    assert t.state == "Up"
    t.route_ok = False
    assert t.state == "Disrupted"
    t.held = 12
    assert t.state == "Disrupted"
    t.route_ok = True
    assert t.state == "Flushing"
    t.held = 0
    assert t.state == "Up"


def test_transmit_server_rejects_nonpositive_sizes():
    sim = Simulator(seed=1)
    server = TransmitServer(rate_bps=1e6)
    with pytest.raises(ValueError):
        server.submit(sim, 0, lambda: None)

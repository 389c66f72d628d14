"""Shared fixtures builders and independent oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np

import fbcoupler as fb

# Reference three-zone triangle: one node per zone, equal reactances,
# 100 MW thermal limits everywhere, slack at C.
TRI_BRANCHES = ("AB", "BC", "CA")


def trizone(**branch_overrides) -> fb.NetworkSnapshot:
    def branch(bid, a, b):
        kw = branch_overrides.get(bid, {})
        return fb.Branch(bid, a, b, reactance=1.0, f_max_thermal=100.0, **kw)

    return fb.NetworkSnapshot(
        nodes=(fb.Node("A", "A"), fb.Node("B", "B"), fb.Node("C", "C")),
        branches=(branch("AB", "A", "B"), branch("BC", "B", "C"), branch("CA", "C", "A")),
        zones=(fb.Zone("A", {"A": 1.0}), fb.Zone("B", {"B": 1.0}), fb.Zone("C", {"C": 1.0})),
        slack_node="C",
    )


def twozone(limit: float = 50.0) -> fb.NetworkSnapshot:
    """Two zones joined by a single radial line."""
    return fb.NetworkSnapshot(
        nodes=(fb.Node("N1", "A"), fb.Node("N2", "B")),
        branches=(fb.Branch("L1", "N1", "N2", reactance=1.0, f_max_thermal=limit),),
        zones=(fb.Zone("A", {"N1": 1.0}), fb.Zone("B", {"N2": 1.0})),
        slack_node="N2",
    )


def trizone_specs(both_directions: bool = True) -> list[fb.CnecSpec]:
    """Basecase CNEC specs covering every triangle branch (optionally both ways)."""
    specs = [fb.CnecSpec(element=b, tso="T") for b in TRI_BRANCHES]
    if both_directions:
        specs += [fb.CnecSpec(element=b, tso="T", direction=-1) for b in TRI_BRANCHES]
    return specs


def rejection_scheme(scheme_id, trigger_branch, node, amount) -> fb.SipsScheme:
    return fb.SipsScheme(
        id=scheme_id,
        input=fb.EventTrigger((trigger_branch,)),
        condition=fb.Condition.COMPONENT_OVERLOAD,
        action=fb.SchemeAction(
            kind=fb.ActionKind.GENERATION_REJECTION, node_id=node, amount_mw=amount
        ),
    )


def random_network(rng: np.random.Generator, n_nodes: int = 10, n_zones: int = 3,
                   extra_edges: int = 5) -> fb.NetworkSnapshot:
    """Random connected grid: a spanning tree plus extra chords."""
    nodes = tuple(
        fb.Node(f"N{i}", f"Z{i % n_zones}", gsk_basis=float(rng.uniform(0.5, 2.0)))
        for i in range(n_nodes)
    )
    edges: set[tuple[int, int]] = set()
    order = rng.permutation(n_nodes)
    for k in range(1, n_nodes):
        a = int(order[k])
        b = int(order[int(rng.integers(0, k))])
        edges.add((min(a, b), max(a, b)))
    target = min(n_nodes - 1 + extra_edges, n_nodes * (n_nodes - 1) // 2)
    while len(edges) < target:
        a, b = rng.integers(0, n_nodes, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    branches = tuple(
        fb.Branch(
            f"B{i}", f"N{a}", f"N{b}",
            reactance=float(rng.uniform(0.5, 2.0)),
            f_max_thermal=float(rng.uniform(50.0, 150.0)),
        )
        for i, (a, b) in enumerate(sorted(edges))
    )
    zones = tuple(
        fb.Zone(
            f"Z{z}",
            fb.default_gsk([n for n in nodes if n.zone_id == f"Z{z}"]),
        )
        for z in range(n_zones)
    )
    return fb.NetworkSnapshot(nodes=nodes, branches=branches, zones=zones,
                              slack_node="N0")


def random_balanced_injections(rng: np.random.Generator, net: fb.NetworkSnapshot,
                               scale: float = 50.0) -> dict[str, float]:
    raw = rng.uniform(-scale, scale, size=len(net.nodes))
    raw -= raw.mean()
    return {n.id: float(v) for n, v in zip(net.nodes, raw)}


# ---------------------------------------------------------------------------
# LP-free clearing oracle (merit order + breakpoint enumeration)
# ---------------------------------------------------------------------------


def zone_welfare(bids: list[fb.Bid], net_position: float) -> float:
    """Best welfare of one zone at a fixed net position, by merit order.

    Accepted volumes satisfy supply - demand = net_position.  Welfare is the
    maximum over the accepted-demand volume t of value(t) - cost(t + np),
    a concave piecewise-linear function whose optimum sits on a breakpoint.
    """
    supply = sorted((b for b in bids if b.side == "supply"), key=lambda b: b.price)
    demand = sorted((b for b in bids if b.side == "demand"), key=lambda b: -b.price)
    s_total = math.fsum(b.quantity for b in supply)
    d_total = math.fsum(b.quantity for b in demand)

    def demand_value(t: float) -> float:
        value, left = 0.0, t
        for b in demand:
            take = min(left, b.quantity)
            value += take * b.price
            left -= take
            if left <= 0:
                break
        return value

    def supply_cost(v: float) -> float:
        cost, left = 0.0, v
        for b in supply:
            take = min(left, b.quantity)
            cost += take * b.price
            left -= take
            if left <= 0:
                break
        return cost

    lo = max(0.0, -net_position)
    hi = min(d_total, s_total - net_position)
    if hi < lo - 1e-12:
        return -math.inf
    candidates = {lo, hi}
    acc = 0.0
    for b in demand:
        acc += b.quantity
        if lo <= acc <= hi:
            candidates.add(acc)
    acc = 0.0
    for b in supply:
        acc += b.quantity
        t = acc - net_position
        if lo <= t <= hi:
            candidates.add(t)
    return max(demand_value(t) - supply_cost(t + net_position) for t in candidates)


def enumerate_welfare_two_zones(book: fb.OrderBook, zone_a: str, zone_b: str,
                                np_lo: float, np_hi: float) -> float:
    """Exhaustive optimum over candidate net positions of a two-zone coupling."""
    bids_a = [b for b in book.bids if b.zone == zone_a]
    bids_b = [b for b in book.bids if b.zone == zone_b]
    candidates = {np_lo, np_hi, 0.0}

    def cumvol(bids, side):
        """Merit-order prefix volumes: ascending price supply, descending demand."""
        ordered = sorted(
            (b for b in bids if b.side == side),
            key=lambda b: b.price if side == "supply" else -b.price,
        )
        return [0.0] + list(np.cumsum([b.quantity for b in ordered]))

    # Kinks of either zone's welfare curve: merit-order prefix differences.
    s_a, d_a = cumvol(bids_a, "supply"), cumvol(bids_a, "demand")
    s_b, d_b = cumvol(bids_b, "supply"), cumvol(bids_b, "demand")
    for s in s_a:
        for d in d_a:
            candidates.add(s - d)
    for s in s_b:
        for d in d_b:
            candidates.add(-(s - d))
    best = -math.inf
    for np_a in candidates:
        if not (np_lo - 1e-12 <= np_a <= np_hi + 1e-12):
            continue
        np_a = min(max(np_a, np_lo), np_hi)
        w = zone_welfare(bids_a, np_a) + zone_welfare(bids_b, -np_a)
        best = max(best, w)
    return best


def np_interval_two_zones(domain, zone_a: str, big: float) -> tuple[float, float]:
    """Feasible interval of zone_a's net position in a two-zone domain."""
    lo, hi = -big, big
    if isinstance(domain, fb.NtcDomain):
        out = math.fsum(b.capacity for b in domain.borders if b.zone_from == zone_a)
        inc = math.fsum(b.capacity for b in domain.borders if b.zone_to == zone_a)
        return -inc, out
    for cnec in domain.cnecs:
        zones = sorted(cnec.ptdf_row)
        coeff = cnec.ptdf_row[zone_a] - cnec.ptdf_row[[z for z in zones if z != zone_a][0]]
        if abs(coeff) < 1e-12:
            continue
        bound = cnec.ram / coeff
        if coeff > 0:
            hi = min(hi, bound)
        else:
            lo = max(lo, bound)
    return lo, hi

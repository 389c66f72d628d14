"""DC network model: load flow and nodal/zonal PTDF computation.

Sign conventions
----------------
Branch flow is positive in the from_node -> to_node direction.  Injections
are MW, positive for generation.  Branch reactances are per-unit on a common
base; only reactance ratios enter the DC equations, so no base conversion is
performed and all powers stay MW end to end.

HVDC links are never part of the AC topology.  Their setpoints are folded
into the injection vector (withdrawal at from_node, delivery at to_node)
before every load flow, so AC flows react to HVDC dispatch without the links
appearing in the susceptance matrix.

All types are frozen and all operations are pure functions, so snapshots and
PTDF tables are safe to share across concurrent tasks.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IslandedNetwork,
    MissingGsk,
    UnbalancedInjections,
    ValidationError,
)

#: Tolerance on the sum of an injection (or net-position) vector, MW.
BALANCE_TOL_MW = 1e-6
#: Tolerance on the sum of GSK weights of a zone.
GSK_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Node:
    """A network node belonging to exactly one bidding zone.

    ``gsk_basis`` optionally carries the pro-rata basis (e.g. installed
    generation) used when a zone's GSK weights are derived rather than given.
    """

    id: str
    zone_id: str
    gsk_basis: float | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("node id must be non-empty", code="empty_id")
        if not self.zone_id:
            raise ValidationError(f"node {self.id}: zone_id must be non-empty", code="empty_id")
        if self.gsk_basis is not None and not self.gsk_basis >= 0.0:
            raise ValidationError(
                f"node {self.id}: gsk_basis must be >= 0", code="negative_gsk_basis"
            )


@dataclass(frozen=True)
class Branch:
    """An AC branch (line, transformer) with a thermal limit.

    ``reactance`` is per-unit and must be strictly positive; ``f_max_thermal``
    is the MW limit applied symmetrically to both flow directions.
    """

    id: str
    from_node: str
    to_node: str
    reactance: float
    f_max_thermal: float
    in_service: bool = True

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("branch id must be non-empty", code="empty_id")
        if self.from_node == self.to_node:
            raise ValidationError(
                f"branch {self.id}: from_node and to_node must differ", code="self_loop"
            )
        if not self.reactance > 0.0:
            raise ValidationError(
                f"branch {self.id}: reactance must be > 0", code="nonpositive_reactance"
            )
        if not self.f_max_thermal > 0.0:
            raise ValidationError(
                f"branch {self.id}: f_max_thermal must be > 0", code="nonpositive_limit"
            )


@dataclass(frozen=True)
class Zone:
    """A bidding zone with generation-shift-key weights over its nodes.

    The GSK maps node id -> dimensionless weight and distributes a zonal
    net-position change onto nodes.  Weights must be nonnegative and sum to 1;
    an empty map is allowed at construction (the zone then cannot be used for
    zonal PTDFs until weights are supplied).
    """

    id: str
    gsk: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("zone id must be non-empty", code="empty_id")
        object.__setattr__(self, "gsk", dict(self.gsk))
        for node_id, w in self.gsk.items():
            if not w >= 0.0:
                raise ValidationError(
                    f"zone {self.id}: gsk weight of node {node_id} must be >= 0",
                    code="negative_gsk",
                )
        if self.gsk:
            total = math.fsum(self.gsk.values())
            if abs(total - 1.0) > GSK_SUM_TOL:
                raise ValidationError(
                    f"zone {self.id}: gsk weights sum to {total!r}, expected 1",
                    code="gsk_sum",
                )


@dataclass(frozen=True)
class HvdcLink:
    """A controllable DC link modeled as a pair of fixed injections.

    A positive setpoint moves power from ``from_node`` to ``to_node``.
    """

    id: str
    from_node: str
    to_node: str
    setpoint: float
    capacity: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("hvdc id must be non-empty", code="empty_id")
        if self.from_node == self.to_node:
            raise ValidationError(
                f"hvdc {self.id}: from_node and to_node must differ", code="self_loop"
            )
        if not self.capacity > 0.0:
            raise ValidationError(
                f"hvdc {self.id}: capacity must be > 0", code="nonpositive_limit"
            )
        if abs(self.setpoint) > self.capacity:
            raise ValidationError(
                f"hvdc {self.id}: |setpoint| {abs(self.setpoint)!r} exceeds capacity"
                f" {self.capacity!r}",
                code="setpoint_bounds",
            )


@dataclass(frozen=True)
class Contingency:
    """An outage of one or more branches.

    An empty outage list denotes the basecase (N-0) and leaves the topology
    untouched.  Whether the outage splits the grid is checked when the
    contingency is applied, not at construction.
    """

    id: str
    outaged_branch_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("contingency id must be non-empty", code="empty_id")
        object.__setattr__(self, "outaged_branch_ids", tuple(self.outaged_branch_ids))
        if len(set(self.outaged_branch_ids)) != len(self.outaged_branch_ids):
            raise ValidationError(
                f"contingency {self.id}: duplicate branch ids", code="duplicate_id"
            )


@dataclass(frozen=True)
class NetworkSnapshot:
    """Immutable network state: nodes, branches, zones, HVDC links, slack.

    Construction validates referential integrity, zone GSK membership and
    connectivity of the in-service AC graph (single island required).
    """

    nodes: tuple[Node, ...]
    branches: tuple[Branch, ...]
    zones: tuple[Zone, ...]
    hvdc_links: tuple[HvdcLink, ...] = ()
    slack_node: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "zones", tuple(self.zones))
        object.__setattr__(self, "hvdc_links", tuple(self.hvdc_links))

        node_ids = [n.id for n in self.nodes]
        if len(set(node_ids)) != len(node_ids):
            raise ValidationError("node ids must be unique", code="duplicate_id")
        zone_ids = [z.id for z in self.zones]
        if len(set(zone_ids)) != len(zone_ids):
            raise ValidationError("zone ids must be unique", code="duplicate_id")
        branch_ids = [b.id for b in self.branches]
        if len(set(branch_ids)) != len(branch_ids):
            raise ValidationError("branch ids must be unique", code="duplicate_id")
        hvdc_ids = [h.id for h in self.hvdc_links]
        if len(set(hvdc_ids)) != len(hvdc_ids):
            raise ValidationError("hvdc ids must be unique", code="duplicate_id")

        known_nodes = set(node_ids)
        known_zones = set(zone_ids)
        for n in self.nodes:
            if n.zone_id not in known_zones:
                raise ValidationError(
                    f"node {n.id}: unknown zone {n.zone_id}", code="unknown_zone"
                )
        for b in self.branches:
            for end in (b.from_node, b.to_node):
                if end not in known_nodes:
                    raise ValidationError(
                        f"branch {b.id}: unknown node {end}", code="unknown_node"
                    )
        for h in self.hvdc_links:
            for end in (h.from_node, h.to_node):
                if end not in known_nodes:
                    raise ValidationError(
                        f"hvdc {h.id}: unknown node {end}", code="unknown_node"
                    )
        if self.slack_node not in known_nodes:
            raise ValidationError(
                f"slack_node {self.slack_node!r} is not a node", code="unknown_node"
            )
        for z in self.zones:
            members = {n.id for n in self.nodes if n.zone_id == z.id}
            extra = set(z.gsk) - members
            if extra:
                raise ValidationError(
                    f"zone {z.id}: gsk references nodes outside the zone: {sorted(extra)}",
                    code="gsk_membership",
                )
        _require_connected(self)

    # -- lookups -----------------------------------------------------------

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise ValidationError(f"unknown node {node_id}", code="unknown_node")

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise ValidationError(f"unknown branch {branch_id}", code="unknown_branch")

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise ValidationError(f"unknown zone {zone_id}", code="unknown_zone")

    def zone_nodes(self, zone_id: str) -> tuple[Node, ...]:
        return tuple(n for n in self.nodes if n.zone_id == zone_id)

    def node_index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def zone_ids(self) -> tuple[str, ...]:
        """Zone ids in canonical (sorted) order, as used for zonal PTDF columns."""
        return tuple(sorted(z.id for z in self.zones))

    def in_service_branches(self, outaged: Iterable[str] = ()) -> tuple[Branch, ...]:
        out = set(outaged)
        return tuple(b for b in self.branches if b.in_service and b.id not in out)


@dataclass(frozen=True)
class PtdfTable:
    """A branch x column sensitivity table (columns are nodes or zones).

    Entry (b, c) is the MW flow change on branch ``b`` per 1 MW injected at
    ``c`` and withdrawn at the slack.  The matrix is read-only.
    """

    branch_ids: tuple[str, ...]
    column_ids: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "branch_ids", tuple(self.branch_ids))
        object.__setattr__(self, "column_ids", tuple(self.column_ids))
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.branch_ids), len(self.column_ids)):
            raise ValidationError("ptdf matrix shape mismatch", code="shape")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def value(self, branch_id: str, column_id: str) -> float:
        return float(
            self.matrix[self.branch_ids.index(branch_id), self.column_ids.index(column_id)]
        )

    def row(self, branch_id: str) -> dict[str, float]:
        r = self.matrix[self.branch_ids.index(branch_id)]
        return {c: float(v) for c, v in zip(self.column_ids, r)}


def default_gsk(zone_nodes: Sequence[Node]) -> dict[str, float]:
    """Build default GSK weights for a zone: pro-rata on ``gsk_basis``.

    Falls back to uniform weights when no node carries a positive basis.
    Returns an empty map for an empty zone.
    """
    if not zone_nodes:
        return {}
    basis = {n.id: (n.gsk_basis or 0.0) for n in zone_nodes}
    total = math.fsum(basis.values())
    if total > 0.0:
        return {nid: v / total for nid, v in basis.items()}
    w = 1.0 / len(zone_nodes)
    return {n.id: w for n in zone_nodes}


# ---------------------------------------------------------------------------
# topology helpers
# ---------------------------------------------------------------------------


def _require_connected(net: NetworkSnapshot, outaged: Iterable[str] = ()) -> None:
    """Raise IslandedNetwork unless the in-service AC graph is one island."""
    branches = net.in_service_branches(outaged)
    if not net.nodes:
        raise ValidationError("network has no nodes", code="empty_network")
    adj: dict[str, list[str]] = {n.id: [] for n in net.nodes}
    for b in branches:
        adj[b.from_node].append(b.to_node)
        adj[b.to_node].append(b.from_node)
    start = net.nodes[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    if len(seen) != len(net.nodes):
        missing = sorted(set(adj) - seen)
        raise IslandedNetwork(
            f"network splits into islands; unreachable nodes: {missing}"
        )


def _resolve_outage(net: NetworkSnapshot, contingency: Contingency | None) -> frozenset[str]:
    """Validate a contingency against the snapshot and return its branch set."""
    if contingency is None:
        return frozenset()
    in_service = {b.id for b in net.branches if b.in_service}
    for bid in contingency.outaged_branch_ids:
        if bid not in in_service:
            raise ValidationError(
                f"contingency {contingency.id}: branch {bid} is unknown or out of service",
                code="unknown_branch",
            )
    return frozenset(contingency.outaged_branch_ids)


def _injection_vector(net: NetworkSnapshot, injections: Mapping[str, float]) -> np.ndarray:
    """Dense nodal injection vector with HVDC setpoints folded in.

    The user-supplied injections must balance to zero within BALANCE_TOL_MW;
    HVDC contributions are internally balanced and added afterwards.
    """
    index = net.node_index()
    vec = np.zeros(len(net.nodes))
    for node_id, mw in injections.items():
        if node_id not in index:
            raise ValidationError(f"injection at unknown node {node_id}", code="unknown_node")
        vec[index[node_id]] += float(mw)
    total = math.fsum(float(v) for v in injections.values())
    if abs(total) > BALANCE_TOL_MW:
        raise UnbalancedInjections(
            f"injections sum to {total!r} MW, expected 0 within {BALANCE_TOL_MW} MW"
        )
    for h in net.hvdc_links:
        vec[index[h.from_node]] -= h.setpoint
        vec[index[h.to_node]] += h.setpoint
    return vec


def _reduced_susceptance(
    net: NetworkSnapshot, branches: Sequence[Branch]
) -> tuple[np.ndarray, list[int]]:
    """Susceptance matrix with the slack row/column removed.

    Returns the reduced matrix and the list of non-slack node positions.
    """
    index = net.node_index()
    n = len(net.nodes)
    bmat = np.zeros((n, n))
    for b in branches:
        i, j = index[b.from_node], index[b.to_node]
        y = 1.0 / b.reactance
        bmat[i, i] += y
        bmat[j, j] += y
        bmat[i, j] -= y
        bmat[j, i] -= y
    slack = index[net.slack_node]
    keep = [k for k in range(n) if k != slack]
    return bmat[np.ix_(keep, keep)], keep


def _solve_angles(
    net: NetworkSnapshot, branches: Sequence[Branch], injections: np.ndarray
) -> np.ndarray:
    reduced, keep = _reduced_susceptance(net, branches)
    theta = np.zeros(len(net.nodes))
    if keep:
        theta[keep] = np.linalg.solve(reduced, injections[keep])
    return theta


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def dc_load_flow(
    net: NetworkSnapshot,
    injections: Mapping[str, float],
    *,
    outaged: Iterable[str] = (),
) -> dict[str, float]:
    """DC load flow: signed MW flow per in-service branch.

    ``injections`` maps node id -> MW (missing nodes inject 0) and must sum
    to zero within BALANCE_TOL_MW.  ``outaged`` removes additional branches
    from the topology (used for post-contingency flows).  Kirchhoff's current
    law holds at every node of the returned solution.

    Raises UnbalancedInjections if the injections do not balance and
    IslandedNetwork if the (reduced) topology is disconnected.
    """
    vec = _injection_vector(net, injections)
    branches = net.in_service_branches(outaged)
    _require_connected(net, outaged)
    theta = _solve_angles(net, branches, vec)
    index = net.node_index()
    return {
        b.id: float((theta[index[b.from_node]] - theta[index[b.to_node]]) / b.reactance)
        for b in branches
    }


def nodal_ptdf(net: NetworkSnapshot, *, outaged: Iterable[str] = ()) -> PtdfTable:
    """Nodal PTDF table: flow change per 1 MW node-to-slack transfer.

    The slack column is identically zero.  For any balanced injection vector
    p, ``matrix @ p`` reproduces dc_load_flow(p) to solver precision.
    """
    branches = net.in_service_branches(outaged)
    _require_connected(net, outaged)
    reduced, keep = _reduced_susceptance(net, branches)
    index = net.node_index()
    n = len(net.nodes)
    # Row b of M maps angles to the flow on b; restrict to non-slack columns.
    m = np.zeros((len(branches), n))
    for r, b in enumerate(branches):
        y = 1.0 / b.reactance
        m[r, index[b.from_node]] += y
        m[r, index[b.to_node]] -= y
    matrix = np.zeros((len(branches), n))
    if keep:
        matrix[:, keep] = np.linalg.solve(reduced, m[:, keep].T).T
    return PtdfTable(
        branch_ids=tuple(b.id for b in branches),
        column_ids=tuple(node.id for node in net.nodes),
        matrix=matrix,
    )


def zonal_ptdf(net: NetworkSnapshot, nodal: PtdfTable) -> PtdfTable:
    """Aggregate a nodal PTDF table to zones via GSK weights.

    Each zonal column is the GSK-weighted sum of the zone's nodal columns.
    Columns are ordered by sorted zone id.  Raises MissingGsk when a zone has
    no weights.
    """
    zone_ids = net.zone_ids()
    col_index = {c: k for k, c in enumerate(nodal.column_ids)}
    matrix = np.zeros((len(nodal.branch_ids), len(zone_ids)))
    for k, zid in enumerate(zone_ids):
        gsk = net.zone(zid).gsk
        if not gsk:
            raise MissingGsk(f"zone {zid} has no GSK weights")
        for node_id, w in sorted(gsk.items()):
            matrix[:, k] += w * nodal.matrix[:, col_index[node_id]]
    return PtdfTable(branch_ids=nodal.branch_ids, column_ids=zone_ids, matrix=matrix)


def post_contingency_ptdf(net: NetworkSnapshot, contingency: Contingency | None) -> PtdfTable:
    """Zonal PTDF on the outaged topology; rows of outaged branches absent.

    An empty (or None) contingency reproduces the basecase zonal table.
    Raises IslandedNetwork if the outage splits the grid.
    """
    outaged = _resolve_outage(net, contingency)
    return zonal_ptdf(net, nodal_ptdf(net, outaged=outaged))

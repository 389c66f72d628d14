"""Capacity domains: NTC borders and flow-based CNEC constraint sets.

A flow-based domain accepts a net-position vector NP when, for every CNEC c,

    sum_z  PTDF(c, z) * NP(z)  <=  RAM(c)

with the remaining available margin decomposed as

    RAM = f_max - f_rm - f_0 + f_ra + amr - f_aac - iva.

An NTC domain bounds each zone's net position by the sum of its directional
border capacities and additionally requires a feasible border-flow transport
(the standard relaxation; the box alone does not fix flows).

The iterative max-transfer process shifts generation/load between a source
and a sink GSK, applies every applicable non-costly remedial action per
contingency, and bisects for the largest transfer that keeps all monitored
elements within limits; the most limiting contingency is reported.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linprog

from .errors import (
    UnbalancedInjections,
    UnknownElement,
    ValidationError,
    ZoneMismatch,
)
from .grid import (
    BALANCE_TOL_MW,
    Contingency,
    NetworkSnapshot,
    PtdfTable,
    _resolve_outage,
    dc_load_flow,
    post_contingency_ptdf,
)
from .sips import EMPTY_REGISTRY, SchemeRegistry, simulate_sips

#: Epsilon keeping RAM strictly positive when the configured floor is 0.
RAM_EPSILON_MW = 1e-6
#: Feasibility slack used by membership checks, MW.
FEAS_TOL_MW = 1e-6
#: Default absolute bisection tolerance of max_transfer, MW.
BISECTION_TOL_MW = 0.01


@dataclass(frozen=True)
class RamBreakdown:
    """The seven margin terms of one CNEC, all MW.

    f_max is the maximum allowed flow, f_rm the reliability margin, f_0 the
    flow when every zone sits at NP = 0, f_ra the remedial-action increase,
    amr the adjustment keeping RAM positive, f_aac capacity already allocated
    to reserves and iva the individual validation adjustment.
    """

    f_max: float
    f_rm: float = 0.0
    f_0: float = 0.0
    f_ra: float = 0.0
    amr: float = 0.0
    f_aac: float = 0.0
    iva: float = 0.0

    def __post_init__(self) -> None:
        for name in ("f_rm", "f_ra", "amr", "f_aac", "iva"):
            if not getattr(self, name) >= 0.0:
                raise ValidationError(f"{name} must be >= 0", code="negative_term")
        for name in ("f_max", "f_0"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite", code="nonfinite")

    def ram(self) -> float:
        return (
            self.f_max - self.f_rm - self.f_0 + self.f_ra + self.amr - self.f_aac - self.iva
        )


def compute_ram(breakdown: RamBreakdown) -> float:
    """Remaining available margin of a CNEC from its term breakdown."""
    return breakdown.ram()


def apply_amr_policy(breakdown: RamBreakdown, ram_floor: float = 0.0) -> RamBreakdown:
    """Set the AMR term so that RAM reaches at least the floor.

    A floor of 0 still enforces strict positivity via RAM_EPSILON_MW.  AMR is
    recomputed from scratch (any existing AMR is discarded).
    """
    if not ram_floor >= 0.0:
        raise ValidationError("ram_floor must be >= 0", code="negative_floor")
    effective = ram_floor if ram_floor > 0.0 else RAM_EPSILON_MW
    without = replace(breakdown, amr=0.0)
    amr = max(0.0, effective - without.ram())
    return replace(breakdown, amr=amr)


@dataclass(frozen=True)
class Ptc:
    """Power transfer corridor: an aggregate of branches with a combined limit.

    The corridor flow is the signed sum of member flows; the MW limit is an
    exogenous input (it may encode a non-thermal constraint).
    """

    id: str
    member_branch_ids: tuple[str, ...]
    direction_signs: tuple[int, ...]
    limit: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "member_branch_ids", tuple(self.member_branch_ids))
        object.__setattr__(self, "direction_signs", tuple(self.direction_signs))
        if len(self.member_branch_ids) < 2:
            raise ValidationError(f"ptc {self.id}: needs >= 2 members", code="few_members")
        if len(self.member_branch_ids) != len(self.direction_signs):
            raise ValidationError(
                f"ptc {self.id}: one direction sign per member required", code="sign_count"
            )
        if any(s not in (-1, 1) for s in self.direction_signs):
            raise ValidationError(f"ptc {self.id}: signs must be +-1", code="bad_sign")
        if not self.limit > 0.0:
            raise ValidationError(f"ptc {self.id}: limit must be > 0", code="nonpositive_limit")

    def flow(self, branch_flows: Mapping[str, float]) -> float:
        return math.fsum(
            s * branch_flows[b] for b, s in zip(self.member_branch_ids, self.direction_signs)
        )


@dataclass(frozen=True)
class Cnec:
    """A monitored element (branch or corridor), optionally under contingency.

    ``ptdf_row`` maps every coupling zone to the monitored-direction
    sensitivity; ``direction`` is +1 when the monitored sense equals the
    element's from->to orientation, -1 for the reverse.  A CNEC without a
    contingency is a basecase constraint.
    """

    id: str
    element_id: str
    tso: str
    ptdf_row: Mapping[str, float]
    ram_breakdown: RamBreakdown
    contingency: Contingency | None = None
    direction: int = 1

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("cnec id must be non-empty", code="empty_id")
        if self.direction not in (-1, 1):
            raise ValidationError(f"cnec {self.id}: direction must be +-1", code="bad_sign")
        object.__setattr__(self, "ptdf_row", dict(self.ptdf_row))

    @property
    def ram(self) -> float:
        return self.ram_breakdown.ram()


@dataclass(frozen=True)
class FlowBasedDomain:
    """The PTDF/RAM constraint set over an ordered zone list."""

    cnecs: tuple[Cnec, ...]
    zones: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cnecs", tuple(self.cnecs))
        object.__setattr__(self, "zones", tuple(self.zones))
        if len(set(self.zones)) != len(self.zones):
            raise ValidationError("domain zones must be unique", code="duplicate_id")
        ids = [c.id for c in self.cnecs]
        if len(set(ids)) != len(ids):
            raise ValidationError("cnec ids must be unique", code="duplicate_id")
        zone_set = set(self.zones)
        for c in self.cnecs:
            if not zone_set <= set(c.ptdf_row):
                raise ValidationError(
                    f"cnec {c.id}: ptdf_row must cover every coupling zone",
                    code="ptdf_coverage",
                )


@dataclass(frozen=True)
class BorderCapacity:
    """Allocated capacity of one directed bidding-zone border."""

    zone_from: str
    zone_to: str
    capacity: float

    def __post_init__(self) -> None:
        if self.zone_from == self.zone_to:
            raise ValidationError("border endpoints must differ", code="self_loop")
        if not self.capacity >= 0.0:
            raise ValidationError("border capacity must be >= 0", code="negative_capacity")

    @property
    def id(self) -> str:
        return f"{self.zone_from}>{self.zone_to}"


@dataclass(frozen=True)
class NtcDomain:
    """Directional border capacities bounding zonal net positions."""

    borders: tuple[BorderCapacity, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "borders", tuple(self.borders))
        pairs = [(b.zone_from, b.zone_to) for b in self.borders]
        if len(set(pairs)) != len(pairs):
            raise ValidationError(
                "at most one capacity entry per ordered zone pair", code="duplicate_border"
            )

    @property
    def zones(self) -> tuple[str, ...]:
        return tuple(sorted({z for b in self.borders for z in (b.zone_from, b.zone_to)}))


@dataclass(frozen=True)
class CnecSpec:
    """Declarative CNEC definition consumed by build_fb_domain.

    ``element`` names a branch or a corridor; ``f_max`` overrides the element
    limit when given.  ``ra_uplift`` is the declared F_RA if the builder's
    uplift map carries no entry for this CNEC.
    """

    element: str
    contingency: Contingency | None = None
    tso: str = ""
    id: str | None = None
    direction: int = 1
    f_max: float | None = None
    f_rm: float = 0.0
    f_aac: float = 0.0
    iva: float = 0.0
    ra_uplift: float = 0.0

    def __post_init__(self) -> None:
        if not self.element:
            raise ValidationError("cnec element must be non-empty", code="empty_id")
        if self.direction not in (-1, 1):
            raise ValidationError("cnec direction must be +-1", code="bad_sign")

    def cnec_id(self) -> str:
        if self.id:
            return self.id
        name = self.element if self.direction > 0 else f"{self.element}:rev"
        return f"{name}@{self.contingency.id}" if self.contingency else name


def _check_np(zones: Sequence[str], net_positions: Mapping[str, float]) -> None:
    if set(net_positions) != set(zones):
        raise ZoneMismatch(
            f"net positions cover {sorted(net_positions)}, domain zones are {sorted(zones)}"
        )
    total = math.fsum(net_positions.values())
    if abs(total) > BALANCE_TOL_MW:
        raise UnbalancedInjections(f"net positions sum to {total!r} MW, expected 0")


# ---------------------------------------------------------------------------
# flow-based domain construction
# ---------------------------------------------------------------------------


def _element_row(
    element: str,
    direction: int,
    table: PtdfTable,
    ptcs: Mapping[str, Ptc],
) -> dict[str, float]:
    if element in table.branch_ids:
        raw = table.row(element)
    elif element in ptcs:
        ptc = ptcs[element]
        raw = {z: 0.0 for z in table.column_ids}
        for member, sign in zip(ptc.member_branch_ids, ptc.direction_signs):
            if member not in table.branch_ids:
                raise UnknownElement(
                    f"ptc {element}: member branch {member} unavailable in this topology"
                )
            for z, v in table.row(member).items():
                raw[z] += sign * v
    else:
        raise UnknownElement(f"monitored element {element} unavailable in this topology")
    return {z: direction * v for z, v in raw.items()}


def _element_flow(
    element: str,
    direction: int,
    flows: Mapping[str, float],
    ptcs: Mapping[str, Ptc],
) -> float:
    if element in flows:
        return direction * flows[element]
    if element in ptcs:
        return direction * ptcs[element].flow(flows)
    raise UnknownElement(f"monitored element {element} unavailable in this topology")


def _element_limit(
    net: NetworkSnapshot, element: str, ptcs: Mapping[str, Ptc]
) -> float:
    if element in ptcs:
        return ptcs[element].limit
    for b in net.branches:
        if b.id == element:
            return b.f_max_thermal
    raise UnknownElement(f"unknown monitored element {element}")


def build_fb_domain(
    net: NetworkSnapshot,
    cnec_specs: Sequence[CnecSpec],
    basecase_np: Mapping[str, float] | None = None,
    ra_uplifts: Mapping[str, float] | None = None,
    *,
    ptcs: Sequence[Ptc] = (),
    basecase_injections: Mapping[str, float] | None = None,
    ram_floor: float = 0.0,
) -> FlowBasedDomain:
    """Construct the flow-based domain around a basecase.

    Per CNEC: the PTDF row comes from the zonal table of its (possibly
    outaged) topology; f_0 re-references the basecase flow so that membership
    at the basecase net positions reproduces that flow; f_ra comes from
    ``ra_uplifts`` (falling back to the spec's declared uplift, clamped at
    0); the AMR policy is applied last.

    The basecase intra-zonal dispatch pattern may be given nodally via
    ``basecase_injections``; otherwise ``basecase_np`` is spread over each
    zone's GSK (which makes f_0 vanish up to rounding).
    """
    zones = net.zone_ids()
    np_base = {z: 0.0 for z in zones}
    if basecase_np is not None:
        unknown = set(basecase_np) - set(zones)
        if unknown:
            raise ZoneMismatch(f"basecase NP references unknown zones {sorted(unknown)}")
        np_base.update({z: float(v) for z, v in basecase_np.items()})

    if basecase_injections is not None:
        injections = dict(basecase_injections)
        derived = {z: 0.0 for z in zones}
        for node_id, mw in injections.items():
            derived[net.node(node_id).zone_id] += float(mw)
        if basecase_np is not None:
            for z in zones:
                if abs(derived[z] - np_base[z]) > BALANCE_TOL_MW:
                    raise ValidationError(
                        f"basecase injections and basecase NP disagree for zone {z}",
                        code="basecase_mismatch",
                    )
        np_base = derived
    else:
        injections = {}
        for z in zones:
            gsk = net.zone(z).gsk
            if np_base[z] and not gsk:
                raise ZoneMismatch(f"zone {z}: nonzero basecase NP but no GSK")
            for node_id, w in gsk.items():
                injections[node_id] = injections.get(node_id, 0.0) + w * np_base[z]
    total = math.fsum(np_base.values())
    if abs(total) > BALANCE_TOL_MW:
        raise UnbalancedInjections(f"basecase NP sums to {total!r} MW, expected 0")

    uplifts = dict(ra_uplifts or {})
    ptc_map = {p.id: p for p in ptcs}

    # One PTDF table and one basecase flow solution per distinct topology.
    tables: dict[str | None, PtdfTable] = {}
    flows: dict[str | None, Mapping[str, float]] = {}
    cnecs: list[Cnec] = []
    for spec in cnec_specs:
        cont = spec.contingency
        key = cont.id if cont is not None else None
        if key not in tables:
            tables[key] = post_contingency_ptdf(net, cont)
            flows[key] = dc_load_flow(net, injections, outaged=_resolve_outage(net, cont))
        table = tables[key]

        row = _element_row(spec.element, spec.direction, table, ptc_map)
        base_flow = _element_flow(spec.element, spec.direction, flows[key], ptc_map)
        f_0 = base_flow - math.fsum(row[z] * np_base[z] for z in zones)
        f_max = spec.f_max if spec.f_max is not None else _element_limit(net, spec.element, ptc_map)
        cnec_id = spec.cnec_id()
        f_ra = max(0.0, uplifts.get(cnec_id, spec.ra_uplift))
        breakdown = RamBreakdown(
            f_max=f_max, f_rm=spec.f_rm, f_0=f_0, f_ra=f_ra, f_aac=spec.f_aac, iva=spec.iva
        )
        cnecs.append(
            Cnec(
                id=cnec_id,
                element_id=spec.element,
                tso=spec.tso,
                ptdf_row=row,
                ram_breakdown=apply_amr_policy(breakdown, ram_floor),
                contingency=cont,
                direction=spec.direction,
            )
        )
    return FlowBasedDomain(cnecs=tuple(cnecs), zones=zones)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def domain_contains(
    domain: FlowBasedDomain | NtcDomain,
    net_positions: Mapping[str, float],
    *,
    tol_mw: float = FEAS_TOL_MW,
) -> tuple[bool, tuple[str, ...]]:
    """Membership test returning (contained, violated constraint ids).

    Flow-based: every CNEC inequality is checked.  NTC: the per-zone bounds
    (net position within the summed inbound/outbound capacities) plus a
    border-flow transport feasibility check.
    """
    if isinstance(domain, FlowBasedDomain):
        _check_np(domain.zones, net_positions)
        ordered = sorted(domain.zones)
        violated = tuple(
            c.id
            for c in domain.cnecs
            if math.fsum(c.ptdf_row[z] * net_positions[z] for z in ordered)
            > c.ram + tol_mw
        )
        return (not violated, violated)

    zones = domain.zones
    _check_np(zones, net_positions)
    violated: list[str] = []
    for z in zones:
        outbound = math.fsum(b.capacity for b in domain.borders if b.zone_from == z)
        inbound = math.fsum(b.capacity for b in domain.borders if b.zone_to == z)
        if net_positions[z] > outbound + tol_mw:
            violated.append(f"np_upper:{z}")
        if net_positions[z] < -inbound - tol_mw:
            violated.append(f"np_lower:{z}")
    if not violated and not _transport_feasible(domain, net_positions):
        violated.append("transport")
    return (not violated, tuple(violated))


def _transport_feasible(domain: NtcDomain, net_positions: Mapping[str, float]) -> bool:
    """Does a border-flow assignment within capacities realize these NPs?"""
    zones = domain.zones
    nf = len(domain.borders)
    a_eq = np.zeros((len(zones), nf))
    for j, border in enumerate(domain.borders):
        a_eq[zones.index(border.zone_from), j] = 1.0
        a_eq[zones.index(border.zone_to), j] = -1.0
    b_eq = np.array([net_positions[z] for z in zones])
    if nf == 0:
        return bool(np.all(np.abs(b_eq) <= FEAS_TOL_MW))
    res = linprog(
        np.zeros(nf),
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(0.0, b.capacity) for b in domain.borders],
        method="highs",
    )
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise RuntimeError(f"transport feasibility solve failed: {res.message}")


# ---------------------------------------------------------------------------
# iterative max-transfer process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Border:
    """A directed bidding-zone border, the target of one NTC computation."""

    zone_from: str
    zone_to: str

    def __post_init__(self) -> None:
        if self.zone_from == self.zone_to:
            raise ValidationError("border endpoints must differ", code="self_loop")


@dataclass(frozen=True)
class ShiftSpec:
    """Source/sink shift keys of the max-transfer process.

    Node weights default to the zones' GSKs.  ``headroom_mw`` is the upper
    search bracket (how much generation/load can be shifted); it defaults to
    the sum of in-service thermal limits, a safe overestimate.
    """

    source_zone: str
    sink_zone: str
    source_weights: Mapping[str, float] | None = None
    sink_weights: Mapping[str, float] | None = None
    headroom_mw: float | None = None

    def __post_init__(self) -> None:
        if self.source_zone == self.sink_zone:
            raise ValidationError("shift source and sink must differ", code="self_loop")
        if self.headroom_mw is not None and not self.headroom_mw > 0.0:
            raise ValidationError("headroom_mw must be > 0", code="nonpositive_limit")


@dataclass(frozen=True)
class MaxTransferResult:
    """Outcome of the iterative max-transfer process.

    ``limiting_contingency_id`` is None when the basecase (N-0) binds alone;
    ties within the bisection tolerance resolve to the lexicographically
    smallest contingency id.  When T=0 already violates a limit the transfer
    is 0, ``feasible_at_zero`` is False and ``diagnostics`` carries the
    violated elements.
    """

    transfer_mw: float
    limiting_contingency_id: str | None
    binding_element_id: str | None
    per_scenario_mw: Mapping[str | None, float]
    feasible_at_zero: bool
    diagnostics: tuple[str, ...] = ()
    target_flow_mw: float | None = None


def _shift_weights(net: NetworkSnapshot, spec: ShiftSpec) -> tuple[dict, dict]:
    def resolve(zone_id: str, given: Mapping[str, float] | None) -> dict[str, float]:
        if given is not None:
            total = math.fsum(given.values())
            if abs(total - 1.0) > 1e-9 or any(w < 0 for w in given.values()):
                raise ValidationError(
                    f"shift weights for {zone_id} must be >= 0 and sum to 1", code="gsk_sum"
                )
            return dict(given)
        gsk = net.zone(zone_id).gsk
        if not gsk:
            raise ZoneMismatch(f"zone {zone_id}: no GSK weights for the shift")
        return dict(gsk)

    return resolve(spec.source_zone, spec.source_weights), resolve(
        spec.sink_zone, spec.sink_weights
    )


def max_transfer(
    net: NetworkSnapshot,
    target: Border | Cnec,
    contingencies: Sequence[Contingency] = (),
    ra_set: SchemeRegistry | None = None,
    shift_spec: ShiftSpec | None = None,
    *,
    ptcs: Sequence[Ptc] = (),
    base_injections: Mapping[str, float] | None = None,
    tol_mw: float = BISECTION_TOL_MW,
) -> MaxTransferResult:
    """Largest transfer keeping all limits respected under every contingency.

    For each scenario (N-0 plus each contingency) the transfer is shifted
    between the source and sink keys, applicable non-costly remedial actions
    from ``ra_set`` are played through the scheme simulator, and the largest
    feasible transfer is found by bisection.  The overall result is the
    scenario minimum.  For a CNEC target the monitored element's flow at the
    optimum is additionally reported (its F_max candidate).
    """
    if isinstance(target, Border):
        if shift_spec is None:
            shift_spec = ShiftSpec(target.zone_from, target.zone_to)
        monitored: tuple[str, int] | None = None
        extra: tuple[Contingency, ...] = ()
    else:
        if shift_spec is None:
            raise ValidationError(
                "a CNEC target requires an explicit shift_spec", code="missing_shift"
            )
        monitored = (target.element_id, target.direction)
        extra = (target.contingency,) if target.contingency is not None else ()

    registry = ra_set if ra_set is not None else EMPTY_REGISTRY
    src, snk = _shift_weights(net, shift_spec)
    ptc_list = tuple(ptcs)
    base = dict(base_injections or {})

    scenarios: list[Contingency | None] = [None]
    seen = set()
    for c in tuple(contingencies) + extra:
        if c.id not in seen:
            seen.add(c.id)
            scenarios.append(c)

    headroom = shift_spec.headroom_mw
    if headroom is None:
        headroom = math.fsum(b.f_max_thermal for b in net.in_service_branches())

    def injections_at(transfer: float) -> dict[str, float]:
        inj = dict(base)
        for node_id, w in src.items():
            inj[node_id] = inj.get(node_id, 0.0) + transfer * w
        for node_id, w in snk.items():
            inj[node_id] = inj.get(node_id, 0.0) - transfer * w
        return inj

    def evaluate(transfer: float, contingency: Contingency | None):
        """(feasible, violated element ids, simulation result or None)."""
        try:
            sim = simulate_sips(net, injections_at(transfer), contingency, registry)
        except Exception as exc:  # islanding or cascade overflow is infeasible
            from .errors import CascadeLimitExceeded, IslandedNetwork

            if isinstance(exc, (CascadeLimitExceeded, IslandedNetwork)):
                return False, (f"simulation:{type(exc).__name__}",), None
            raise
        violated = [o.element_id for o in sim.overloads]
        for p in ptc_list:
            flow = p.flow(sim.flows)
            if abs(flow) > p.limit + 1e-9:
                violated.append(p.id)
        return (not violated, tuple(sorted(violated)), sim)

    per_scenario: dict[str | None, float] = {}
    binding_elements: dict[str | None, tuple[str, ...]] = {}
    zero_diag: tuple[str, ...] = ()
    feasible_at_zero = True
    for contingency in scenarios:
        key = contingency.id if contingency is not None else None
        ok0, viol0, _ = evaluate(0.0, contingency)
        if not ok0:
            per_scenario[key] = 0.0
            binding_elements[key] = viol0
            feasible_at_zero = False
            zero_diag = zero_diag + viol0
            continue
        lo, hi = 0.0, headroom
        ok_hi, viol_hi, _ = evaluate(hi, contingency)
        if ok_hi:  # nothing binds within the shiftable headroom
            per_scenario[key] = hi
            binding_elements[key] = ()
            continue
        while hi - lo > tol_mw:
            mid = 0.5 * (lo + hi)
            ok_mid, viol_mid, _ = evaluate(mid, contingency)
            if ok_mid:
                lo = mid
            else:
                hi = mid
                viol_hi = viol_mid
        per_scenario[key] = lo
        binding_elements[key] = viol_hi

    transfer = min(per_scenario.values())
    binding_keys = [k for k, t in per_scenario.items() if t <= transfer + tol_mw]
    named = sorted(k for k in binding_keys if k is not None)
    limiting = named[0] if named else None
    # Report the binding element of the scenario that actually limits.
    limit_key = limiting if limiting in binding_keys else None
    if limit_key not in binding_elements:
        limit_key = binding_keys[0]
    elements = binding_elements.get(limit_key, ())
    binding_element = min(elements) if elements else None

    target_flow = None
    if monitored is not None:
        scenario = extra[0] if extra else None
        _, _, sim = evaluate(transfer, scenario)
        if sim is not None:
            target_flow = _element_flow(
                monitored[0], monitored[1], sim.flows, {p.id: p for p in ptc_list}
            )

    return MaxTransferResult(
        transfer_mw=transfer,
        limiting_contingency_id=limiting,
        binding_element_id=binding_element,
        per_scenario_mw=per_scenario,
        feasible_at_zero=feasible_at_zero,
        diagnostics=tuple(dict.fromkeys(zero_diag)),
        target_flow_mw=target_flow,
    )


def ntc_from_borders(
    net: NetworkSnapshot,
    borders: Sequence[Border],
    contingencies: Sequence[Contingency] = (),
    ra_set: SchemeRegistry | None = None,
    *,
    ptcs: Sequence[Ptc] = (),
    tol_mw: float = BISECTION_TOL_MW,
) -> NtcDomain:
    """Run max_transfer per border direction and pack the capacities."""
    caps = []
    for border in borders:
        result = max_transfer(
            net, border, contingencies, ra_set, ptcs=ptcs, tol_mw=tol_mw
        )
        caps.append(BorderCapacity(border.zone_from, border.zone_to, result.transfer_mw))
    return NtcDomain(borders=tuple(caps))

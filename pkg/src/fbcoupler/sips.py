"""Resource classification and an event-driven protection-scheme simulator.

Classification sorts operational resources into three overlapping buckets:
ancillary services (provided by network users, available regardless of
disturbances), remedial actions (taken only against detected or forecasted
disturbances) and SIPS (automatic, curative remedial actions).

The simulator plays armed schemes against a dispatched network under a
contingency: triggers are either event-based (an element outage) or
response-based (a steady-state flow threshold).  Fired actions modify
injections or topology, the system is rebalanced through a balancing GSK and
flows are re-solved until no further scheme fires.  Only component-overload
conditions with MW-expressible actions are simulatable in a DC model; other
condition tags are accepted but inert (their schemes can still contribute
declared capacity uplifts).
"""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from .errors import CascadeLimitExceeded, ValidationError
from .grid import Contingency, NetworkSnapshot, _injection_vector, _resolve_outage, dc_load_flow

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, domain imports sips
    from .domain import Cnec, ShiftSpec

#: Hard cap on firing rounds to guard against scheme loops.
MAX_ROUNDS = 10


class Trigger(str, enum.Enum):
    MANUAL = "manual"
    AUTOMATIC = "automatic"
    INHERENT = "inherent"


class Timing(str, enum.Enum):
    PREVENTIVE = "preventive"
    CURATIVE = "curative"
    NOT_APPLICABLE = "not_applicable"


class Provider(str, enum.Enum):
    NETWORK_USER = "network_user"
    OPERATOR = "operator"


class Condition(str, enum.Enum):
    """Critical system conditions a scheme targets."""

    COMPONENT_OVERLOAD = "component_overload"
    ABNORMAL_VOLTAGE = "abnormal_voltage"
    TRANSIENT_ANGLE_INSTABILITY = "transient_angle_instability"
    SMALL_SIGNAL_ANGLE_INSTABILITY = "small_signal_angle_instability"
    VOLTAGE_INSTABILITY = "voltage_instability"
    FREQUENCY_INSTABILITY = "frequency_instability"


class ActionKind(str, enum.Enum):
    """Mitigative action families, ordered by cost."""

    GRID_RECONFIGURATION = "grid_reconfiguration"
    VAR_RESCHEDULING = "var_rescheduling"
    HVDC_CONTROL = "hvdc_control"
    GENERATOR_P_CONTROL = "generator_p_control"
    GENERATION_REJECTION = "generation_rejection"
    LOAD_SHEDDING = "load_shedding"


#: Condition tags whose steady-state effect a DC model can represent.
SIMULATABLE_CONDITIONS = frozenset({Condition.COMPONENT_OVERLOAD})
#: Actions with a DC, MW-expressible effect (reactive rescheduling has none).
SIMULATABLE_ACTIONS = frozenset(ActionKind) - {ActionKind.VAR_RESCHEDULING}


@dataclass(frozen=True)
class ResourceProfile:
    """How a resource is triggered, timed, provided and tied to disturbances."""

    name: str
    trigger: Trigger
    timing: Timing
    provider: Provider
    disturbance_linked: bool

    def __post_init__(self) -> None:
        if self.trigger is Trigger.INHERENT and self.timing is not Timing.NOT_APPLICABLE:
            raise ValidationError(
                f"{self.name}: an inherently provided resource has no timing",
                code="inherent_timing",
            )


@dataclass(frozen=True)
class Classification:
    is_ancillary_service: bool
    is_remedial_action: bool
    is_sips: bool

    def __post_init__(self) -> None:
        if self.is_sips and not self.is_remedial_action:
            raise ValidationError("SIPS must also be remedial actions", code="sips_not_ra")


def classify(profile: ResourceProfile) -> Classification:
    """Place a resource in the ancillary-service / RA / SIPS buckets.

    Remedial actions are disturbance-linked; ancillary services are provided
    by network users (inherent provision qualifies); SIPS are the automatic
    and curative remedial actions.
    """
    is_ra = profile.disturbance_linked
    is_as = profile.provider is Provider.NETWORK_USER
    is_sips = (
        is_ra and profile.trigger is Trigger.AUTOMATIC and profile.timing is Timing.CURATIVE
    )
    return Classification(is_as, is_ra, is_sips)


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventTrigger:
    """Fires when any of the listed elements is outaged or switched out."""

    element_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "element_ids", tuple(self.element_ids))


@dataclass(frozen=True)
class ResponseTrigger:
    """Fires when |flow| on the monitored element exceeds the threshold."""

    element_id: str
    threshold_mw: float

    def __post_init__(self) -> None:
        if not self.threshold_mw > 0.0:
            raise ValidationError("response threshold must be > 0 MW", code="bad_threshold")


@dataclass(frozen=True)
class SchemeAction:
    """A mitigative action with kind-specific parameters.

    grid_reconfiguration: branch_id (+ to_service flag)
    hvdc_control:         link_id, delta_mw
    generator_p_control:  node_id, delta_mw
    generation_rejection: node_id, amount_mw (>0)
    load_shedding:        node_id, amount_mw (>0)
    var_rescheduling:     declarative only (no DC effect)

    Actions may be declared without their parameters (a registry entry that
    documents a scheme rather than simulating it); such schemes are inert in
    the simulator but can still back declared capacity uplifts.
    """

    kind: ActionKind
    node_id: str | None = None
    branch_id: str | None = None
    link_id: str | None = None
    amount_mw: float | None = None
    delta_mw: float | None = None
    to_service: bool = False

    def __post_init__(self) -> None:
        if self.amount_mw is not None and not self.amount_mw >= 0.0:
            raise ValidationError(
                f"{self.kind.value}: amount_mw must be >= 0", code="bad_amount"
            )
        if self.delta_mw is not None and not math.isfinite(self.delta_mw):
            raise ValidationError(
                f"{self.kind.value}: delta_mw must be finite", code="bad_amount"
            )

    @property
    def complete(self) -> bool:
        """Whether the parameters needed to apply the action are present."""
        k = self.kind
        if k in (ActionKind.GENERATION_REJECTION, ActionKind.LOAD_SHEDDING):
            return bool(self.node_id) and self.amount_mw is not None
        if k is ActionKind.GENERATOR_P_CONTROL:
            return bool(self.node_id) and self.delta_mw is not None
        if k is ActionKind.HVDC_CONTROL:
            return bool(self.link_id) and self.delta_mw is not None
        if k is ActionKind.GRID_RECONFIGURATION:
            return bool(self.branch_id)
        return False

    @property
    def target(self) -> str:
        return self.node_id or self.branch_id or self.link_id or ""


@dataclass(frozen=True)
class SipsScheme:
    """Input (trigger), logic (condition) and output (action) of one scheme."""

    id: str
    input: EventTrigger | ResponseTrigger
    condition: Condition
    action: SchemeAction
    armed: bool = True
    operators: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValidationError("scheme id must be non-empty", code="empty_id")
        object.__setattr__(self, "operators", tuple(self.operators))

    @property
    def simulatable(self) -> bool:
        return (
            self.condition in SIMULATABLE_CONDITIONS
            and self.action.kind in SIMULATABLE_ACTIONS
            and self.action.complete
        )


@dataclass(frozen=True)
class SchemeRegistry:
    """An immutable set of schemes plus the system balancing GSK.

    ``balancing_gsk`` (node id -> weight, summing to 1) receives the
    counterpart of any injection-changing action.  When None, the counterpart
    is spread uniformly over the nodes whose injection sign opposes the
    action node's pre-action injection (loads back off a generation
    rejection, generators back off a load shedding), falling back to all
    other nodes.
    """

    schemes: tuple[SipsScheme, ...] = ()
    balancing_gsk: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "schemes", tuple(self.schemes))
        ids = [s.id for s in self.schemes]
        if len(set(ids)) != len(ids):
            raise ValidationError("scheme ids must be unique", code="duplicate_id")
        if self.balancing_gsk is not None:
            gsk = dict(self.balancing_gsk)
            if not gsk:
                raise ValidationError("balancing_gsk must be non-empty", code="empty_gsk")
            for w in gsk.values():
                if not w >= 0.0:
                    raise ValidationError(
                        "balancing_gsk weights must be >= 0", code="negative_gsk"
                    )
            total = math.fsum(gsk.values())
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(
                    f"balancing_gsk weights sum to {total!r}, expected 1", code="gsk_sum"
                )
            object.__setattr__(self, "balancing_gsk", gsk)


EMPTY_REGISTRY = SchemeRegistry()


@dataclass(frozen=True)
class ActionRecord:
    """One applied action in the firing log."""

    round_no: int
    scheme_id: str
    action_kind: str
    target: str
    requested_mw: float
    applied_mw: float


@dataclass(frozen=True)
class Overload:
    element_id: str
    flow_mw: float
    limit_mw: float


@dataclass(frozen=True)
class SipsSimulationResult:
    flows: Mapping[str, float]
    fired: tuple[str, ...]
    log: tuple[ActionRecord, ...]
    overloads: tuple[Overload, ...]
    rounds: int
    injections: Mapping[str, float]


class _SimState:
    """Mutable working state of one simulation run."""

    def __init__(self, net: NetworkSnapshot, dispatch: Mapping[str, float], outaged: frozenset[str]):
        self.net = net
        self.injections = {n.id: 0.0 for n in net.nodes}
        for node_id, mw in dispatch.items():
            self.injections[node_id] += float(mw)
        self.service = {b.id: b.in_service and b.id not in outaged for b in net.branches}
        self.events = set(outaged)
        self.hvdc_setpoints = {h.id: h.setpoint for h in net.hvdc_links}

    def snapshot(self) -> NetworkSnapshot:
        """Snapshot reflecting current switching states and HVDC setpoints."""
        dirty_branches = any(self.service[b.id] != b.in_service for b in self.net.branches)
        dirty_hvdc = any(
            self.hvdc_setpoints[h.id] != h.setpoint for h in self.net.hvdc_links
        )
        if not dirty_branches and not dirty_hvdc:
            return self.net
        return replace(
            self.net,
            branches=tuple(
                replace(b, in_service=self.service[b.id]) for b in self.net.branches
            ),
            hvdc_links=tuple(
                replace(h, setpoint=self.hvdc_setpoints[h.id]) for h in self.net.hvdc_links
            ),
        )

    def flows(self) -> dict[str, float]:
        return dc_load_flow(self.snapshot(), self.injections)


def _balancing_weights(
    state: _SimState, registry: SchemeRegistry, action_node: str
) -> dict[str, float]:
    if registry.balancing_gsk is not None:
        for nid in registry.balancing_gsk:
            if nid not in state.injections:
                raise ValidationError(
                    f"balancing_gsk references unknown node {nid}", code="unknown_node"
                )
        return dict(registry.balancing_gsk)
    sign = state.injections[action_node]
    counterpart = [
        nid
        for nid, inj in state.injections.items()
        if nid != action_node and inj * sign < 0.0
    ]
    if not counterpart:
        counterpart = [nid for nid in state.injections if nid != action_node]
    w = 1.0 / len(counterpart)
    return {nid: w for nid in sorted(counterpart)}


def _apply_action(
    state: _SimState, registry: SchemeRegistry, scheme: SipsScheme, round_no: int
) -> ActionRecord:
    act = scheme.action
    kind = act.kind

    if kind is ActionKind.GRID_RECONFIGURATION:
        bid = act.branch_id
        if bid not in state.service:
            raise ValidationError(f"unknown branch {bid}", code="unknown_branch")
        applied = 0.0
        if state.service[bid] != act.to_service:
            state.service[bid] = act.to_service
            if not act.to_service:
                state.events.add(bid)
            applied = 1.0
        return ActionRecord(round_no, scheme.id, kind.value, bid, 0.0, applied)

    if kind is ActionKind.HVDC_CONTROL:
        link = next((h for h in state.net.hvdc_links if h.id == act.link_id), None)
        if link is None:
            raise ValidationError(f"unknown hvdc link {act.link_id}", code="unknown_element")
        current = state.hvdc_setpoints[link.id]
        new = min(link.capacity, max(-link.capacity, current + act.delta_mw))
        state.hvdc_setpoints[link.id] = new
        return ActionRecord(round_no, scheme.id, kind.value, link.id, act.delta_mw, new - current)

    # Injection-changing actions: shift delta at the node, counterpart via GSK.
    node = act.node_id
    if node not in state.injections:
        raise ValidationError(f"unknown node {node}", code="unknown_node")
    if kind is ActionKind.GENERATION_REJECTION:
        available = max(0.0, state.injections[node])
        delta = -min(act.amount_mw, available)
        requested = -act.amount_mw
    elif kind is ActionKind.LOAD_SHEDDING:
        available = max(0.0, -state.injections[node])
        delta = min(act.amount_mw, available)
        requested = act.amount_mw
    else:  # generator_p_control
        delta = act.delta_mw
        requested = act.delta_mw
    weights = _balancing_weights(state, registry, node)
    state.injections[node] += delta
    for nid, w in weights.items():
        state.injections[nid] -= delta * w
    return ActionRecord(round_no, scheme.id, kind.value, node, requested, delta)


def _triggered(scheme: SipsScheme, state: _SimState, flows: Mapping[str, float]) -> bool:
    trig = scheme.input
    if isinstance(trig, EventTrigger):
        return bool(set(trig.element_ids) & state.events)
    flow = flows.get(trig.element_id)
    return flow is not None and abs(flow) > trig.threshold_mw


def simulate_sips(
    net: NetworkSnapshot,
    dispatch: Mapping[str, float],
    contingency: Contingency | None,
    registry: SchemeRegistry,
    *,
    max_rounds: int = MAX_ROUNDS,
) -> SipsSimulationResult:
    """Play armed schemes against a dispatched network under a contingency.

    Applies the outage, then repeatedly: evaluate triggers against the
    current state, fire the newly triggered schemes in ascending-id order,
    rebalance and re-solve, until a round fires nothing.  Each scheme fires
    at most once.  Raises CascadeLimitExceeded when schemes still want to
    fire after ``max_rounds`` rounds; propagates IslandedNetwork when the
    outage (or a reconfiguration) splits the grid.
    """
    outaged = _resolve_outage(net, contingency)
    _injection_vector(net, dispatch)  # balance + node validation
    state = _SimState(net, dispatch, outaged)

    candidates = [s for s in registry.schemes if s.armed and s.simulatable]
    fired: list[str] = []
    log: list[ActionRecord] = []
    flows = state.flows()
    rounds = 0
    while True:
        pending = sorted(
            (s for s in candidates if s.id not in fired and _triggered(s, state, flows)),
            key=lambda s: s.id,
        )
        if not pending:
            break
        rounds += 1
        if rounds > max_rounds:
            raise CascadeLimitExceeded(
                f"schemes still firing after {max_rounds} rounds: "
                f"{[s.id for s in pending]}"
            )
        for scheme in pending:
            log.append(_apply_action(state, registry, scheme, rounds))
            fired.append(scheme.id)
        flows = state.flows()

    overloads = tuple(
        Overload(b.id, flows[b.id], b.f_max_thermal)
        for b in net.branches
        if state.service[b.id] and abs(flows[b.id]) > b.f_max_thermal + 1e-9
    )
    return SipsSimulationResult(
        flows=dict(flows),
        fired=tuple(fired),
        log=tuple(log),
        overloads=overloads,
        rounds=rounds,
        injections=dict(state.injections),
    )


def capacity_uplift(
    net: NetworkSnapshot,
    cnec: "Cnec",
    registry: SchemeRegistry,
    shift_spec: "ShiftSpec",
    *,
    tol_mw: float = 0.01,
) -> float:
    """Transfer-capacity gain a scheme registry provides on a CNEC's scenario.

    Runs the iterative max-transfer process with and without the registry
    (the CNEC supplies the contingency context) and returns the difference,
    clipped at 0 against bisection noise.
    """
    from .domain import max_transfer  # deferred: domain imports this module

    contingencies = (cnec.contingency,) if cnec.contingency is not None else ()
    with_ra = max_transfer(
        net, cnec, contingencies, registry, shift_spec, tol_mw=tol_mw
    )
    without_ra = max_transfer(
        net, cnec, contingencies, EMPTY_REGISTRY, shift_spec, tol_mw=tol_mw
    )
    return max(0.0, with_ra.transfer_mw - without_ra.transfer_mw)

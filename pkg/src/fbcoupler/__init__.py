"""fbcoupler: zonal electricity-market engine with flow-based capacity domains.

Builds NTC and flow-based (PTDF/RAM) capacity domains from a DC network
model, clears welfare-maximizing market couplings with shadow-price
extraction, simulates system-integrity protection schemes as capacity
enhancers, and computes the lower-bound economic value of remedial actions.
"""

from .coupling import Bid, CouplingResult, OrderBook, couple, surplus_decomposition
from .domain import (
    Border,
    BorderCapacity,
    Cnec,
    CnecSpec,
    FlowBasedDomain,
    MaxTransferResult,
    NtcDomain,
    Ptc,
    RamBreakdown,
    ShiftSpec,
    apply_amr_policy,
    build_fb_domain,
    compute_ram,
    domain_contains,
    max_transfer,
    ntc_from_borders,
)
from .grid import (
    Branch,
    Contingency,
    HvdcLink,
    NetworkSnapshot,
    Node,
    PtdfTable,
    Zone,
    dc_load_flow,
    default_gsk,
    nodal_ptdf,
    post_contingency_ptdf,
    zonal_ptdf,
)
from .sips import (
    ActionKind,
    Classification,
    Condition,
    EventTrigger,
    Provider,
    ResourceProfile,
    ResponseTrigger,
    SchemeAction,
    SchemeRegistry,
    SipsScheme,
    SipsSimulationResult,
    Timing,
    Trigger,
    capacity_uplift,
    classify,
    simulate_sips,
)
from .valuation import (
    CneSnapshotRecord,
    ValuationReport,
    active_constraint_report,
    aggregate_by_tso,
    ra_value_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "Bid",
    "Border",
    "BorderCapacity",
    "Branch",
    "Classification",
    "Cnec",
    "CnecSpec",
    "CneSnapshotRecord",
    "Condition",
    "Contingency",
    "CouplingResult",
    "EventTrigger",
    "FlowBasedDomain",
    "HvdcLink",
    "MaxTransferResult",
    "NetworkSnapshot",
    "Node",
    "NtcDomain",
    "OrderBook",
    "Provider",
    "Ptc",
    "PtdfTable",
    "RamBreakdown",
    "ResourceProfile",
    "ResponseTrigger",
    "SchemeAction",
    "SchemeRegistry",
    "ShiftSpec",
    "SipsScheme",
    "SipsSimulationResult",
    "Timing",
    "Trigger",
    "ValuationReport",
    "Zone",
    "active_constraint_report",
    "aggregate_by_tso",
    "apply_amr_policy",
    "build_fb_domain",
    "capacity_uplift",
    "classify",
    "compute_ram",
    "couple",
    "dc_load_flow",
    "default_gsk",
    "domain_contains",
    "max_transfer",
    "nodal_ptdf",
    "ntc_from_borders",
    "post_contingency_ptdf",
    "ra_value_lower_bound",
    "simulate_sips",
    "surplus_decomposition",
    "zonal_ptdf",
]

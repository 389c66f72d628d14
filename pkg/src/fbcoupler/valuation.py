"""Lower-bound economic valuation of remedial actions from CNEC snapshots.

A published flow-based snapshot row carries, per CNEC and hour, the RAM
breakdown, the forecast and post-coupling flows, the flow bounds and the
constraint's shadow price.  The remedial-action contribution f_ra relaxed the
constraint by f_ra MW, so the surplus gained is at least f_ra * lambda: a
lower bound, since without the contribution the constraint would have been
tighter and the shadow price almost certainly higher.

Aggregation keeps everything in MWh and EUR internally (records are hourly,
so MW and MWh coincide); display-scale conversion happens only at report
emission.  Timestamps are stored in UTC; report writers convert for display.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import DuplicateRecord, UnknownHour, ValidationError

#: Slack allowed on ingested RAM-breakdown consistency (published data is rounded).
RAM_CONSISTENCY_TOL_MW = 0.5
#: Slack when deciding whether the post-coupling flow sits on a bound.
ACTIVE_FLOW_TOL_MW = 0.5


def _as_utc(value: datetime) -> datetime:
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


@dataclass(frozen=True)
class CneSnapshotRecord:
    """One CNEC-hour of a published flow-based domain with coupling outcome.

    ``fref`` is the two-day-ahead forecast flow the linearization was built
    around; ``flow_fb`` the expected post-coupling flow, bounded by
    ``min_flow`` / ``max_flow``.  A positive shadow price requires the flow
    to sit on one of its bounds (the constraint is active).
    """

    hour: datetime
    cnec_id: str
    tso: str
    fmax: float
    frm: float
    f0: float
    fra: float
    amr: float
    faac: float
    iva: float
    ram: float
    fref: float
    flow_fb: float
    min_flow: float
    max_flow: float
    shadow_price: float
    ptdfs: Mapping[str, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hour", _as_utc(self.hour))
        object.__setattr__(self, "ptdfs", dict(self.ptdfs))
        if not self.cnec_id:
            raise ValidationError("cnec_id must be non-empty", code="empty_id")
        if not self.fra >= 0.0:
            raise ValidationError(f"{self.cnec_id}: fra must be >= 0", code="negative_term")
        if not self.shadow_price >= 0.0:
            raise ValidationError(
                f"{self.cnec_id}: shadow_price must be >= 0", code="negative_shadow_price"
            )
        recomputed = (
            self.fmax - self.frm - self.f0 + self.fra + self.amr - self.faac - self.iva
        )
        if abs(recomputed - self.ram) > RAM_CONSISTENCY_TOL_MW:
            raise ValidationError(
                f"{self.cnec_id}: ram {self.ram!r} inconsistent with breakdown"
                f" {recomputed!r} beyond {RAM_CONSISTENCY_TOL_MW} MW",
                code="ram_inconsistent",
            )
        if not (self.min_flow - 1e-9 <= self.flow_fb <= self.max_flow + 1e-9):
            raise ValidationError(
                f"{self.cnec_id}: flow_fb {self.flow_fb!r} outside"
                f" [{self.min_flow!r}, {self.max_flow!r}]",
                code="flow_bounds",
            )
        if self.shadow_price > 0.0:
            gap = min(
                abs(self.flow_fb - self.max_flow), abs(self.flow_fb - self.min_flow)
            )
            if gap > ACTIVE_FLOW_TOL_MW:
                raise ValidationError(
                    f"{self.cnec_id}: positive shadow price but flow_fb is"
                    f" {gap!r} MW away from both bounds",
                    code="inactive_constraint",
                )


def ra_value_lower_bound(record: CneSnapshotRecord) -> float:
    """Lower bound on the surplus the RA contribution provided: f_ra * lambda."""
    return record.fra * record.shadow_price


@dataclass(frozen=True)
class RecordValue:
    hour: datetime
    cnec_id: str
    tso: str
    fra_mwh: float
    value_eur: float


@dataclass(frozen=True)
class ValuationReport:
    """Per-record values, per-TSO totals and cumulative hourly series."""

    records: tuple[RecordValue, ...]
    tso_value_eur: Mapping[str, float]
    tso_fra_mwh: Mapping[str, float]
    cumulative_eur: Mapping[str, tuple[tuple[datetime, float], ...]]
    total_value_eur: float
    total_fra_mwh: float


def aggregate_by_tso(
    records: Sequence[CneSnapshotRecord],
    window: tuple[datetime, datetime] | None = None,
) -> ValuationReport:
    """Sum f_ra volumes and f_ra * lambda values per TSO over a time window.

    ``window`` is a half-open [start, end) interval in any timezone; None
    aggregates everything.  Records are processed in canonical (hour, tso,
    cnec) order, so the result is independent of input order.  Raises
    DuplicateRecord when one CNEC appears twice in the same hour.
    """
    seen: set[tuple[str, datetime]] = set()
    for r in records:
        key = (r.cnec_id, r.hour)
        if key in seen:
            raise DuplicateRecord(f"cnec {r.cnec_id} occurs twice for {r.hour.isoformat()}")
        seen.add(key)

    if window is not None:
        start, end = _as_utc(window[0]), _as_utc(window[1])
        selected = [r for r in records if start <= r.hour < end]
    else:
        selected = list(records)
    selected.sort(key=lambda r: (r.hour, r.tso, r.cnec_id))

    per_record = tuple(
        RecordValue(r.hour, r.cnec_id, r.tso, r.fra, ra_value_lower_bound(r))
        for r in selected
    )
    tsos = sorted({r.tso for r in selected})
    tso_value = {
        t: math.fsum(rv.value_eur for rv in per_record if rv.tso == t) for t in tsos
    }
    tso_fra = {
        t: math.fsum(rv.fra_mwh for rv in per_record if rv.tso == t) for t in tsos
    }

    hours = sorted({r.hour for r in selected})
    cumulative: dict[str, tuple[tuple[datetime, float], ...]] = {}
    for t in tsos:
        series = []
        running = 0.0
        for h in hours:
            running += math.fsum(
                rv.value_eur for rv in per_record if rv.tso == t and rv.hour == h
            )
            series.append((h, running))
        cumulative[t] = tuple(series)

    return ValuationReport(
        records=per_record,
        tso_value_eur=tso_value,
        tso_fra_mwh=tso_fra,
        cumulative_eur=cumulative,
        total_value_eur=math.fsum(tso_value[t] for t in tsos),
        total_fra_mwh=math.fsum(tso_fra[t] for t in tsos),
    )


def active_constraint_report(
    records: Sequence[CneSnapshotRecord], hour: datetime
) -> tuple[CneSnapshotRecord, ...]:
    """Active constraints of one hour, sorted by descending shadow price.

    Includes every CNEC with a positive shadow price; ties break on
    ascending cnec id.  Raises UnknownHour when the hour has no records.
    """
    h = _as_utc(hour)
    of_hour = [r for r in records if r.hour == h]
    if not of_hour:
        raise UnknownHour(f"no records for hour {h.isoformat()}")
    active = [r for r in of_hour if r.shadow_price > 0.0]
    active.sort(key=lambda r: (-r.shadow_price, r.cnec_id))
    return tuple(active)

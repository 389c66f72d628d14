"""Parsers and exporters for every file format the engine speaks.

CSV files follow RFC 4180 (UTF-8, comma separator, CRLF line ends, '.'
decimal point, no locale dependence).  Floats are emitted in Python's
shortest round-trip representation, so export -> parse -> export is
byte-stable across platforms.  JSON documents are emitted with sorted keys
and two-space indentation.

Parsers enforce all type invariants at parse time and raise ParseError for
structural problems (bad syntax, wrong header, wrong types) or
ValidationError for invariant breaches, both carrying machine-readable codes
plus file/line/field context.  Snapshot ingestion is the exception: rows
failing invariants are collected (and logged), never silently dropped.
"""

from __future__ import annotations

import csv
import importlib.resources
import io
import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

from .coupling import Bid, CouplingResult, OrderBook
from .domain import (
    BorderCapacity,
    Cnec,
    CnecSpec,
    FlowBasedDomain,
    NtcDomain,
    RamBreakdown,
)
from .errors import ParseError, ValidationError
from .grid import (
    Branch,
    Contingency,
    HvdcLink,
    NetworkSnapshot,
    Node,
    Zone,
    default_gsk,
)
from .sips import (
    ActionKind,
    Condition,
    EventTrigger,
    ResponseTrigger,
    SchemeAction,
    SchemeRegistry,
    SipsScheme,
)
from .valuation import CneSnapshotRecord, ValuationReport

logger = logging.getLogger(__name__)

RAM_TERM_COLUMNS = ("fmax", "frm", "f0", "fra", "amr", "faac", "iva", "ram")
ORDERBOOK_HEADER = ("zone", "side", "price_eur_mwh", "quantity_mw")
NTC_HEADER = ("zone_from", "zone_to", "capacity_mw")
SNAPSHOT_FIXED = (
    "hour",
    "cnec_id",
    "tso",
    *RAM_TERM_COLUMNS,
    "fref",
    "flow_fb",
    "min_flow",
    "max_flow",
    "shadow_price",
)


def _fmt(value: float) -> str:
    """Shortest round-trip decimal representation of a float (-0.0 folded)."""
    return repr(float(value) + 0.0)


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(exc), code="io_error", path=str(path)) from exc


def _load_json(path):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON: {exc.msg}", code="json_malformed", path=str(path), line=exc.lineno
        ) from exc


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _rewrap(exc: ValidationError, path) -> ValidationError:
    return ValidationError(
        exc.message, code=exc.code, path=str(path), line=exc.line, field=exc.field
    )


def _expect(obj, kinds, what, path, *, field=None, line=None):
    if isinstance(obj, bool) and bool not in (kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ParseError(
            f"expected {what}, got {obj!r}", code="bad_type", path=str(path),
            field=field, line=line,
        )
    if not isinstance(obj, kinds):
        raise ParseError(
            f"expected {what}, got {type(obj).__name__}", code="bad_type",
            path=str(path), field=field, line=line,
        )
    return obj


def _req(obj: dict, key: str, path, *, line=None):
    if key not in obj:
        raise ParseError("missing field", code="missing_field", path=str(path),
                         field=key, line=line)
    return obj[key]


def _num(obj: dict, key: str, path, *, default=None, line=None) -> float | None:
    if key not in obj or obj[key] is None:
        return default
    return float(_expect(obj[key], (int, float), "a number", path, field=key, line=line))


def _csv_rows(path) -> list[list[str]]:
    text = _read_text(path)
    return list(csv.reader(io.StringIO(text)))


def _csv_text(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerows(rows)
    return buf.getvalue()


def _check_header(got: Sequence[str], expected: Sequence[str], path) -> None:
    if tuple(got) != tuple(expected):
        raise ParseError(
            f"bad header {list(got)!r}, expected {list(expected)!r}",
            code="bad_header", path=str(path),
        )


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


def parse_network(path) -> NetworkSnapshot:
    """Read a network snapshot from its JSON file.

    Zones without an explicit ``gsk`` map get the default construction:
    pro-rata on the nodes' ``gsk_basis``, uniform when no basis is present.
    """
    doc = _expect(_load_json(path), dict, "an object", path)
    try:
        nodes = tuple(
            Node(
                id=_expect(_req(n, "id", path), str, "a string", path, field="id"),
                zone_id=_expect(_req(n, "zone_id", path), str, "a string", path, field="zone_id"),
                gsk_basis=_num(n, "gsk_basis", path),
            )
            for n in _expect(_req(doc, "nodes", path), list, "a list", path, field="nodes")
        )
        branches = tuple(
            Branch(
                id=_expect(_req(b, "id", path), str, "a string", path, field="id"),
                from_node=_req(b, "from_node", path),
                to_node=_req(b, "to_node", path),
                reactance=_num(b, "reactance", path, default=float("nan")),
                f_max_thermal=_num(b, "f_max_thermal", path, default=float("nan")),
                in_service=bool(b.get("in_service", True)),
            )
            for b in _expect(_req(doc, "branches", path), list, "a list", path, field="branches")
        )
        zones = []
        for z in _expect(_req(doc, "zones", path), list, "a list", path, field="zones"):
            zid = _expect(_req(z, "id", path), str, "a string", path, field="id")
            raw = z.get("gsk")
            if raw is None:
                gsk = default_gsk([n for n in nodes if n.zone_id == zid])
            else:
                gsk = {
                    k: float(_expect(v, (int, float), "a number", path, field=f"gsk.{k}"))
                    for k, v in _expect(raw, dict, "an object", path, field="gsk").items()
                }
            zones.append(Zone(id=zid, gsk=gsk))
        hvdc = tuple(
            HvdcLink(
                id=_expect(_req(h, "id", path), str, "a string", path, field="id"),
                from_node=_req(h, "from_node", path),
                to_node=_req(h, "to_node", path),
                setpoint=_num(h, "setpoint", path, default=0.0),
                capacity=_num(h, "capacity", path, default=float("nan")),
            )
            for h in _expect(doc.get("hvdc_links", []), list, "a list", path, field="hvdc_links")
        )
        return NetworkSnapshot(
            nodes=nodes,
            branches=branches,
            zones=tuple(zones),
            hvdc_links=hvdc,
            slack_node=_expect(
                _req(doc, "slack_node", path), str, "a string", path, field="slack_node"
            ),
        )
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def export_network(net: NetworkSnapshot) -> str:
    doc = {
        "nodes": [
            {"id": n.id, "zone_id": n.zone_id}
            | ({"gsk_basis": n.gsk_basis} if n.gsk_basis is not None else {})
            for n in net.nodes
        ],
        "branches": [
            {
                "id": b.id,
                "from_node": b.from_node,
                "to_node": b.to_node,
                "reactance": b.reactance,
                "f_max_thermal": b.f_max_thermal,
                "in_service": b.in_service,
            }
            for b in net.branches
        ],
        "zones": [{"id": z.id, "gsk": dict(sorted(z.gsk.items()))} for z in net.zones],
        "hvdc_links": [
            {
                "id": h.id,
                "from_node": h.from_node,
                "to_node": h.to_node,
                "setpoint": h.setpoint,
                "capacity": h.capacity,
            }
            for h in net.hvdc_links
        ],
        "slack_node": net.slack_node,
    }
    return _dump_json(doc)


# ---------------------------------------------------------------------------
# contingencies, CNEC specs, injections
# ---------------------------------------------------------------------------


def _decode_contingency(obj, path) -> Contingency:
    _expect(obj, dict, "an object", path, field="contingency")
    return Contingency(
        id=_expect(_req(obj, "id", path), str, "a string", path, field="id"),
        outaged_branch_ids=tuple(
            _expect(x, str, "a string", path, field="outaged_branch_ids")
            for x in _expect(
                _req(obj, "outaged_branch_ids", path), list, "a list", path,
                field="outaged_branch_ids",
            )
        ),
    )


def _encode_contingency(c: Contingency) -> dict:
    return {"id": c.id, "outaged_branch_ids": list(c.outaged_branch_ids)}


def parse_contingencies(path) -> tuple[Contingency, ...]:
    doc = _expect(_load_json(path), list, "a list", path)
    try:
        return tuple(_decode_contingency(c, path) for c in doc)
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def export_contingencies(contingencies: Sequence[Contingency]) -> str:
    return _dump_json([_encode_contingency(c) for c in contingencies])


def parse_cnecs(path) -> tuple[CnecSpec, ...]:
    """Read CNEC definitions (element ref, optional contingency, RAM inputs)."""
    doc = _expect(_load_json(path), list, "a list", path)
    specs = []
    try:
        for item in doc:
            _expect(item, dict, "an object", path)
            cont = item.get("contingency")
            specs.append(
                CnecSpec(
                    element=_expect(
                        _req(item, "element", path), str, "a string", path, field="element"
                    ),
                    contingency=None if cont is None else _decode_contingency(cont, path),
                    tso=_expect(item.get("tso", ""), str, "a string", path, field="tso"),
                    id=item.get("id"),
                    direction=int(_num(item, "direction", path, default=1.0)),
                    f_max=_num(item, "f_max", path),
                    f_rm=_num(item, "f_rm", path, default=0.0),
                    f_aac=_num(item, "f_aac", path, default=0.0),
                    iva=_num(item, "iva", path, default=0.0),
                    ra_uplift=_num(item, "ra_uplift", path, default=0.0),
                )
            )
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc
    return tuple(specs)


def export_cnecs(specs: Sequence[CnecSpec]) -> str:
    out = []
    for s in specs:
        item = {
            "element": s.element,
            "contingency": None if s.contingency is None else _encode_contingency(s.contingency),
            "tso": s.tso,
            "direction": s.direction,
            "f_max": s.f_max,
            "f_rm": s.f_rm,
            "f_aac": s.f_aac,
            "iva": s.iva,
            "ra_uplift": s.ra_uplift,
        }
        if s.id is not None:
            item["id"] = s.id
        out.append(item)
    return _dump_json(out)


def parse_injections(path) -> dict[str, float]:
    doc = _expect(_load_json(path), dict, "an object", path)
    return {
        _expect(k, str, "a string", path): float(
            _expect(v, (int, float), "a number", path, field=k)
        )
        for k, v in doc.items()
    }


def export_injections(injections: Mapping[str, float]) -> str:
    return _dump_json({k: float(v) for k, v in injections.items()})


# ---------------------------------------------------------------------------
# order books
# ---------------------------------------------------------------------------


def parse_orderbook(path, hour: datetime | None = None) -> OrderBook:
    rows = _csv_rows(path)
    if not rows:
        raise ParseError("empty file", code="bad_header", path=str(path))
    _check_header(rows[0], ORDERBOOK_HEADER, path)
    bids = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(
                f"expected 4 fields, got {len(row)}", code="bad_row", path=str(path), line=i
            )
        try:
            bids.append(
                Bid(zone=row[0], side=row[1], price=float(row[2]), quantity=float(row[3]))
            )
        except ValueError as exc:
            raise ParseError(str(exc), code="bad_number", path=str(path), line=i) from exc
        except ValidationError as exc:
            raise ValidationError(
                exc.message, code=exc.code, path=str(path), line=i
            ) from exc
    try:
        return OrderBook(bids=tuple(bids), hour=hour)
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def export_orderbook(book: OrderBook) -> str:
    rows = [list(ORDERBOOK_HEADER)]
    rows += [
        [b.zone, b.side, _fmt(b.price), _fmt(b.quantity)] for b in book.bids
    ]
    return _csv_text(rows)


# ---------------------------------------------------------------------------
# capacity domains
# ---------------------------------------------------------------------------


def export_fb_domain(domain: FlowBasedDomain) -> str:
    header = ["id", "tso"] + [f"ptdf_{z}" for z in domain.zones] + list(RAM_TERM_COLUMNS)
    rows = [header]
    for c in domain.cnecs:
        b = c.ram_breakdown
        rows.append(
            [c.id, c.tso]
            + [_fmt(c.ptdf_row[z]) for z in domain.zones]
            + [_fmt(v) for v in (b.f_max, b.f_rm, b.f_0, b.f_ra, b.amr, b.f_aac, b.iva)]
            + [_fmt(b.ram())]
        )
    return _csv_text(rows)


def parse_fb_domain(path) -> FlowBasedDomain:
    """Read a flow-based domain back from its CSV export.

    The format carries no element/contingency references, so reconstructed
    CNECs use their id as element reference and no contingency.
    """
    rows = _csv_rows(path)
    if not rows:
        raise ParseError("empty file", code="bad_header", path=str(path))
    header = rows[0]
    if header[:2] != ["id", "tso"] or tuple(header[-8:]) != RAM_TERM_COLUMNS:
        raise ParseError(
            "expected header id,tso,ptdf_<zone>...,fmax,frm,f0,fra,amr,faac,iva,ram",
            code="bad_header", path=str(path),
        )
    ptdf_cols = header[2:-8]
    if any(not c.startswith("ptdf_") for c in ptdf_cols):
        raise ParseError("ptdf columns must be named ptdf_<zone>", code="bad_header",
                         path=str(path))
    zones = tuple(c[len("ptdf_"):] for c in ptdf_cols)
    cnecs = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}",
                code="bad_row", path=str(path), line=i,
            )
        try:
            values = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ParseError(str(exc), code="bad_number", path=str(path), line=i) from exc
        terms = values[len(zones):]
        breakdown = RamBreakdown(
            f_max=terms[0], f_rm=terms[1], f_0=terms[2], f_ra=terms[3],
            amr=terms[4], f_aac=terms[5], iva=terms[6],
        )
        if abs(breakdown.ram() - terms[7]) > 1e-6:
            raise ValidationError(
                f"cnec {row[0]}: ram column {terms[7]!r} does not match the"
                f" term breakdown {breakdown.ram()!r}",
                code="ram_inconsistent", path=str(path), line=i,
            )
        try:
            cnecs.append(
                Cnec(
                    id=row[0],
                    element_id=row[0],
                    tso=row[1],
                    ptdf_row=dict(zip(zones, values[: len(zones)])),
                    ram_breakdown=breakdown,
                )
            )
        except ValidationError as exc:
            raise ValidationError(exc.message, code=exc.code, path=str(path), line=i) from exc
    try:
        return FlowBasedDomain(cnecs=tuple(cnecs), zones=zones)
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def export_ntc_domain(domain: NtcDomain) -> str:
    rows = [list(NTC_HEADER)]
    rows += [[b.zone_from, b.zone_to, _fmt(b.capacity)] for b in domain.borders]
    return _csv_text(rows)


def parse_ntc_domain(path) -> NtcDomain:
    rows = _csv_rows(path)
    if not rows:
        raise ParseError("empty file", code="bad_header", path=str(path))
    _check_header(rows[0], NTC_HEADER, path)
    borders = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise ParseError(
                f"expected 3 fields, got {len(row)}", code="bad_row", path=str(path), line=i
            )
        try:
            borders.append(BorderCapacity(row[0], row[1], float(row[2])))
        except ValueError as exc:
            raise ParseError(str(exc), code="bad_number", path=str(path), line=i) from exc
        except ValidationError as exc:
            raise ValidationError(exc.message, code=exc.code, path=str(path), line=i) from exc
    try:
        return NtcDomain(borders=tuple(borders))
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def sniff_domain_kind(path) -> str:
    """'ntc' when the file carries border rows, else 'fb'."""
    text = _read_text(path)
    first = text.splitlines()[0] if text else ""
    return "ntc" if first.startswith("zone_from") else "fb"


def load_domain(path, kind: str = "auto") -> FlowBasedDomain | NtcDomain:
    resolved = sniff_domain_kind(path) if kind == "auto" else kind
    if resolved == "ntc":
        return parse_ntc_domain(path)
    if resolved == "fb":
        return parse_fb_domain(path)
    raise ValidationError(f"unknown domain kind {kind!r}", code="bad_kind")


# ---------------------------------------------------------------------------
# coupling results
# ---------------------------------------------------------------------------


def export_coupling_result(result: CouplingResult, book: OrderBook) -> str:
    doc = {
        "hour": book.hour.isoformat() if book.hour else None,
        "np": {z: result.np[z] for z in sorted(result.np)},
        "zonal_price": {z: result.zonal_price[z] for z in sorted(result.zonal_price)},
        "system_price": result.system_price,
        "accepted": [
            {
                "zone": b.zone,
                "side": b.side,
                "price_eur_mwh": b.price,
                "quantity_mw": b.quantity,
                "fraction": f,
            }
            for b, f in zip(book.bids, result.accepted)
        ],
        "consumer_surplus": result.consumer_surplus,
        "producer_surplus": result.producer_surplus,
        "congestion_rent": result.congestion_rent,
        "total_surplus": result.total_surplus,
        "shadow_price": {k: result.shadow_price[k] for k in sorted(result.shadow_price)},
        "binding": sorted(result.binding),
        "dual_objective": result.dual_objective,
        "dual_gap": result.dual_gap,
    }
    return _dump_json(doc)


def parse_coupling_result(path) -> tuple[CouplingResult, OrderBook]:
    doc = _expect(_load_json(path), dict, "an object", path)
    try:
        bids = tuple(
            Bid(a["zone"], a["side"], float(a["price_eur_mwh"]), float(a["quantity_mw"]))
            for a in _req(doc, "accepted", path)
        )
        hour_raw = doc.get("hour")
        book = OrderBook(
            bids=bids, hour=datetime.fromisoformat(hour_raw) if hour_raw else None
        )
        result = CouplingResult(
            np={k: float(v) for k, v in _req(doc, "np", path).items()},
            zonal_price={k: float(v) for k, v in _req(doc, "zonal_price", path).items()},
            accepted=tuple(float(a["fraction"]) for a in doc["accepted"]),
            consumer_surplus=float(_req(doc, "consumer_surplus", path)),
            producer_surplus=float(_req(doc, "producer_surplus", path)),
            congestion_rent=float(_req(doc, "congestion_rent", path)),
            total_surplus=float(_req(doc, "total_surplus", path)),
            shadow_price={k: float(v) for k, v in _req(doc, "shadow_price", path).items()},
            binding=frozenset(_req(doc, "binding", path)),
            system_price=float(_req(doc, "system_price", path)),
            dual_objective=float(_req(doc, "dual_objective", path)),
            dual_gap=float(_req(doc, "dual_gap", path)),
        )
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(str(exc), code="bad_type", path=str(path)) from exc
    return result, book


# ---------------------------------------------------------------------------
# CNEC snapshots
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class SnapshotParseResult:
    records: tuple[CneSnapshotRecord, ...]
    rejected: tuple[RejectedRow, ...]


def export_snapshots(records: Sequence[CneSnapshotRecord]) -> str:
    zones = sorted({z for r in records for z in r.ptdfs})
    header = list(SNAPSHOT_FIXED) + [f"ptdf_{z}" for z in zones]
    rows = [header]
    for r in records:
        rows.append(
            [
                r.hour.astimezone(timezone.utc).isoformat(),
                r.cnec_id,
                r.tso,
                _fmt(r.fmax),
                _fmt(r.frm),
                _fmt(r.f0),
                _fmt(r.fra),
                _fmt(r.amr),
                _fmt(r.faac),
                _fmt(r.iva),
                _fmt(r.ram),
                _fmt(r.fref),
                _fmt(r.flow_fb),
                _fmt(r.min_flow),
                _fmt(r.max_flow),
                _fmt(r.shadow_price),
            ]
            + [_fmt(r.ptdfs.get(z, 0.0)) for z in zones]
        )
    return _csv_text(rows)


def parse_snapshots(path) -> SnapshotParseResult:
    """Ingest CNEC snapshot rows; invalid rows are logged and reported, not raised."""
    rows = _csv_rows(path)
    if not rows:
        raise ParseError("empty file", code="bad_header", path=str(path))
    header = rows[0]
    if tuple(header[: len(SNAPSHOT_FIXED)]) != SNAPSHOT_FIXED:
        raise ParseError(
            f"bad header, expected it to start with {','.join(SNAPSHOT_FIXED)}",
            code="bad_header", path=str(path),
        )
    ptdf_cols = header[len(SNAPSHOT_FIXED):]
    if any(not c.startswith("ptdf_") for c in ptdf_cols):
        raise ParseError("trailing columns must be named ptdf_<zone>",
                         code="bad_header", path=str(path))
    zones = [c[len("ptdf_"):] for c in ptdf_cols]

    records: list[CneSnapshotRecord] = []
    rejected: list[RejectedRow] = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            if len(row) != len(header):
                raise ValueError(f"expected {len(header)} fields, got {len(row)}")
            hour = datetime.fromisoformat(row[0])
            nums = [float(v) for v in row[3:]]
            records.append(
                CneSnapshotRecord(
                    hour=hour,
                    cnec_id=row[1],
                    tso=row[2],
                    fmax=nums[0], frm=nums[1], f0=nums[2], fra=nums[3],
                    amr=nums[4], faac=nums[5], iva=nums[6], ram=nums[7],
                    fref=nums[8], flow_fb=nums[9], min_flow=nums[10],
                    max_flow=nums[11], shadow_price=nums[12],
                    ptdfs=dict(zip(zones, nums[13:])),
                )
            )
        except (ValueError, ValidationError) as exc:
            reason = exc.message if isinstance(exc, ValidationError) else str(exc)
            logger.warning("rejected snapshot row %d of %s: %s", i, path, reason)
            rejected.append(RejectedRow(line=i, reason=reason))
    return SnapshotParseResult(records=tuple(records), rejected=tuple(rejected))


# ---------------------------------------------------------------------------
# schemes
# ---------------------------------------------------------------------------


def _decode_scheme(obj, path) -> SipsScheme:
    _expect(obj, dict, "an object", path)
    raw_inp = _expect(_req(obj, "input", path), dict, "an object", path, field="input")
    kind = _req(raw_inp, "type", path)
    if kind == "event_based":
        inp = EventTrigger(
            element_ids=tuple(
                _expect(x, str, "a string", path, field="trigger_element_ids")
                for x in raw_inp.get("trigger_element_ids", [])
            )
        )
    elif kind == "response_based":
        inp = ResponseTrigger(
            element_id=_req(raw_inp, "monitored_element_id", path),
            threshold_mw=float(_req(raw_inp, "threshold_mw", path)),
        )
    else:
        raise ParseError(
            f"unknown input type {kind!r}", code="bad_type", path=str(path), field="input"
        )
    raw_act = _expect(_req(obj, "action", path), dict, "an object", path, field="action")
    try:
        action_kind = ActionKind(_req(raw_act, "kind", path))
        condition = Condition(_req(obj, "condition", path))
    except ValueError as exc:
        raise ParseError(str(exc), code="bad_tag", path=str(path)) from exc
    action = SchemeAction(
        kind=action_kind,
        node_id=raw_act.get("node_id"),
        branch_id=raw_act.get("branch_id"),
        link_id=raw_act.get("link_id"),
        amount_mw=_num(raw_act, "amount_mw", path),
        delta_mw=_num(raw_act, "delta_mw", path),
        to_service=bool(raw_act.get("to_service", False)),
    )
    return SipsScheme(
        id=_expect(_req(obj, "id", path), str, "a string", path, field="id"),
        input=inp,
        condition=condition,
        action=action,
        armed=bool(obj.get("armed", True)),
        operators=tuple(obj.get("operators", [])),
    )


def _encode_scheme(s: SipsScheme) -> dict:
    if isinstance(s.input, EventTrigger):
        inp = {"type": "event_based", "trigger_element_ids": list(s.input.element_ids)}
    else:
        inp = {
            "type": "response_based",
            "monitored_element_id": s.input.element_id,
            "threshold_mw": s.input.threshold_mw,
        }
    action: dict = {"kind": s.action.kind.value}
    for key in ("node_id", "branch_id", "link_id", "amount_mw", "delta_mw"):
        value = getattr(s.action, key)
        if value is not None:
            action[key] = value
    if s.action.to_service:
        action["to_service"] = True
    return {
        "id": s.id,
        "armed": s.armed,
        "condition": s.condition.value,
        "operators": list(s.operators),
        "input": inp,
        "action": action,
    }


def _decode_registry(doc, path) -> SchemeRegistry:
    if isinstance(doc, list):
        doc = {"schemes": doc}
    _expect(doc, dict, "an object or list", path)
    schemes = tuple(
        _decode_scheme(s, path)
        for s in _expect(_req(doc, "schemes", path), list, "a list", path, field="schemes")
    )
    gsk = doc.get("balancing_gsk")
    try:
        return SchemeRegistry(
            schemes=schemes,
            balancing_gsk=None if gsk is None else {k: float(v) for k, v in gsk.items()},
        )
    except ValidationError as exc:
        raise _rewrap(exc, path) from exc


def parse_schemes(path) -> SchemeRegistry:
    return _decode_registry(_load_json(path), path)


def export_schemes(registry: SchemeRegistry) -> str:
    doc = {
        "schemes": [_encode_scheme(s) for s in registry.schemes],
        "balancing_gsk": (
            None
            if registry.balancing_gsk is None
            else {k: float(v) for k, v in sorted(registry.balancing_gsk.items())}
        ),
    }
    return _dump_json(doc)


def load_table2_registry() -> SchemeRegistry:
    """The bundled registry of survey scheme combinations per operator."""
    resource = importlib.resources.files("fbcoupler").joinpath("data/table2_registry.json")
    with importlib.resources.as_file(resource) as p:
        return parse_schemes(p)


# ---------------------------------------------------------------------------
# valuation reports
# ---------------------------------------------------------------------------


def _zone_info(tz: str) -> ZoneInfo:
    try:
        return ZoneInfo(tz)
    except Exception as exc:
        raise ValidationError(f"unknown timezone {tz!r}", code="bad_timezone") from exc


def _display_hour(dt: datetime, zone: ZoneInfo) -> str:
    return dt.astimezone(zone).isoformat()


def write_valuation_reports(report: ValuationReport, out_dir, tz: str = "UTC") -> list[Path]:
    """Write the per-TSO totals, record values, cumulative series and plot.

    Hours are displayed in ``tz``; the data itself stays UTC internally.
    Returns the written paths.
    """
    zone = _zone_info(tz)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    rows = [["tso", "fra_mwh", "value_eur"]]
    for tso in sorted(report.tso_value_eur):
        rows.append([tso, _fmt(report.tso_fra_mwh[tso]), _fmt(report.tso_value_eur[tso])])
    rows.append(["TOTAL", _fmt(report.total_fra_mwh), _fmt(report.total_value_eur)])
    p = out / "valuation_by_tso.csv"
    p.write_text(_csv_text(rows), encoding="utf-8")
    paths.append(p)

    rows = [["hour", "cnec_id", "tso", "fra_mwh", "value_eur"]]
    for rv in report.records:
        rows.append(
            [_display_hour(rv.hour, zone), rv.cnec_id, rv.tso, _fmt(rv.fra_mwh), _fmt(rv.value_eur)]
        )
    p = out / "record_values.csv"
    p.write_text(_csv_text(rows), encoding="utf-8")
    paths.append(p)

    rows = [["hour", "tso", "cumulative_eur"]]
    hours = sorted({h for series in report.cumulative_eur.values() for h, _ in series})
    for h in hours:
        for tso in sorted(report.cumulative_eur):
            value = dict(report.cumulative_eur[tso]).get(h)
            if value is not None:
                rows.append([_display_hour(h, zone), tso, _fmt(value)])
    p = out / "cumulative_value.csv"
    p.write_text(_csv_text(rows), encoding="utf-8")
    paths.append(p)

    p = out / "cumulative_value.svg"
    p.write_text(_cumulative_svg(report, zone), encoding="utf-8")
    paths.append(p)
    return paths


def write_active_constraint_report(
    records: Sequence[CneSnapshotRecord], path, tz: str = "UTC"
) -> Path:
    """Write the active-constraint table (descending shadow price) as CSV."""
    zone = _zone_info(tz)
    rows = [
        [
            "cnec_id", "tso", "hour", "shadow_price", "fmax", "fra", "fref",
            "flow_fb", "min_flow", "max_flow",
        ]
    ]
    for r in records:
        rows.append(
            [
                r.cnec_id, r.tso, _display_hour(r.hour, zone), _fmt(r.shadow_price),
                _fmt(r.fmax), _fmt(r.fra), _fmt(r.fref), _fmt(r.flow_fb),
                _fmt(r.min_flow), _fmt(r.max_flow),
            ]
        )
    p = Path(path)
    p.write_text(_csv_text(rows), encoding="utf-8")
    return p


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _cumulative_svg(report: ValuationReport, zone: ZoneInfo) -> str:
    """Deterministic SVG of the cumulative value series, one line per TSO."""
    width, height = 860.0, 420.0
    left, right, top, bottom = 80.0, 840.0, 30.0, 360.0
    tsos = sorted(report.cumulative_eur)
    hours = sorted({h for series in report.cumulative_eur.values() for h, _ in series})
    y_max = max(
        [v for series in report.cumulative_eur.values() for _, v in series] or [0.0]
    )
    y_max = y_max if y_max > 0 else 1.0

    def x_at(i: int) -> float:
        if len(hours) <= 1:
            return (left + right) / 2.0
        return left + (right - left) * i / (len(hours) - 1)

    def y_at(v: float) -> float:
        return bottom - (bottom - top) * v / y_max

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<line x1="{left:.2f}" y1="{bottom:.2f}" x2="{right:.2f}" y2="{bottom:.2f}"'
        ' stroke="black" stroke-width="1"/>',
        f'<line x1="{left:.2f}" y1="{top:.2f}" x2="{left:.2f}" y2="{bottom:.2f}"'
        ' stroke="black" stroke-width="1"/>',
        '<text x="10" y="20" font-family="monospace" font-size="13">'
        "Cumulative remedial-action value [EUR]</text>",
    ]
    for k in range(5):
        v = y_max * k / 4.0
        y = y_at(v)
        parts.append(
            f'<line x1="{left - 4:.2f}" y1="{y:.2f}" x2="{left:.2f}" y2="{y:.2f}"'
            ' stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8:.2f}" y="{y + 4:.2f}" font-family="monospace"'
            f' font-size="11" text-anchor="end">{v:.6g}</text>'
        )
    if hours:
        for i in (0, len(hours) - 1) if len(hours) > 1 else (0,):
            parts.append(
                f'<text x="{x_at(i):.2f}" y="{bottom + 16:.2f}" font-family="monospace"'
                f' font-size="11" text-anchor="middle">'
                f"{_display_hour(hours[i], zone)}</text>"
            )
    hour_pos = {h: i for i, h in enumerate(hours)}
    for n, tso in enumerate(tsos):
        color = _PALETTE[n % len(_PALETTE)]
        pts = " ".join(
            f"{x_at(hour_pos[h]):.2f},{y_at(v):.2f}" for h, v in report.cumulative_eur[tso]
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        y_leg = top + 16.0 * n
        parts.append(
            f'<line x1="{right - 150:.2f}" y1="{y_leg:.2f}" x2="{right - 130:.2f}"'
            f' y2="{y_leg:.2f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{right - 124:.2f}" y="{y_leg + 4:.2f}" font-family="monospace"'
            f' font-size="12">{tso}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"

"""Command-line surface tying the engine together.

Subcommands: ptdf, domain, couple, max-transfer, compare-ntc-fb, sips-sim,
ra-value.  Exit codes: 0 success, 1 validation/usage problems, 2 infeasible
or islanded cases.  All output is byte-deterministic for identical inputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from datetime import datetime
from pathlib import Path

from . import fileio
from .coupling import couple
from .domain import Border, ShiftSpec, build_fb_domain, max_transfer, ntc_from_borders
from .errors import (
    CascadeLimitExceeded,
    DuplicateRecord,
    EngineError,
    Infeasible,
    IslandedNetwork,
    MismatchedResult,
    MissingGsk,
    ParseError,
    UnbalancedInjections,
    UnknownElement,
    UnknownHour,
    ValidationError,
    ZoneMismatch,
)
from .grid import Contingency, _resolve_outage, nodal_ptdf, post_contingency_ptdf
from .sips import simulate_sips
from .valuation import active_constraint_report, aggregate_by_tso

_VALIDATION_ERRORS = (
    ParseError,
    ValidationError,
    ZoneMismatch,
    MismatchedResult,
    DuplicateRecord,
    UnknownHour,
    UnknownElement,
    MissingGsk,
    UnbalancedInjections,
)
_INFEASIBLE_ERRORS = (IslandedNetwork, Infeasible, CascadeLimitExceeded)


class _Parser(argparse.ArgumentParser):
    """argparse parser exiting 1 (not 2) on usage errors, with usage text."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _split_csv_list(raw: str | None) -> tuple[str, ...]:
    if not raw:
        return ()
    return tuple(part for part in raw.split(",") if part)


def _parse_borders(raw: str) -> tuple[Border, ...]:
    borders = []
    for token in _split_csv_list(raw):
        if ">" not in token:
            raise ValidationError(
                f"border {token!r} must look like FROM>TO", code="bad_border"
            )
        zone_from, zone_to = token.split(">", 1)
        borders.append(Border(zone_from, zone_to))
    return tuple(borders)


def _load_contingencies(path: str | None) -> tuple[Contingency, ...]:
    return fileio.parse_contingencies(path) if path else ()


def _load_schemes(path: str | None):
    return fileio.parse_schemes(path) if path else None


def _parse_hour(raw: str) -> datetime:
    try:
        return datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValidationError(f"bad hour {raw!r}: {exc}", code="bad_hour") from exc


# ---------------------------------------------------------------------------
# handlers
# ---------------------------------------------------------------------------


def _cmd_ptdf(args) -> int:
    net = fileio.parse_network(args.network)
    outage_ids = _split_csv_list(args.outage)
    contingency = Contingency("cli-outage", outage_ids) if outage_ids else None
    if args.nodal:
        table = nodal_ptdf(net, outaged=_resolve_outage(net, contingency))
    else:
        table = post_contingency_ptdf(net, contingency)
    rows = [["branch_id"] + [f"ptdf_{c}" for c in table.column_ids]]
    for i, bid in enumerate(table.branch_ids):
        rows.append([bid] + [fileio._fmt(v) for v in table.matrix[i]])
    _emit(fileio._csv_text(rows), args.out)
    return 0


def _cmd_domain(args) -> int:
    net = fileio.parse_network(args.network)
    if args.kind == "fb":
        if not args.cnecs:
            raise ValidationError("--cnecs is required for --kind fb", code="missing_arg")
        specs = fileio.parse_cnecs(args.cnecs)
        basecase_np = fileio.parse_injections(args.basecase_np) if args.basecase_np else None
        base_inj = (
            fileio.parse_injections(args.basecase_injections)
            if args.basecase_injections
            else None
        )
        uplifts = fileio.parse_injections(args.ra_uplifts) if args.ra_uplifts else None
        domain = build_fb_domain(
            net,
            specs,
            basecase_np,
            uplifts,
            basecase_injections=base_inj,
            ram_floor=args.ram_floor,
        )
        _emit(fileio.export_fb_domain(domain), args.out)
    else:
        if not args.borders:
            raise ValidationError("--borders is required for --kind ntc", code="missing_arg")
        domain = ntc_from_borders(
            net,
            _parse_borders(args.borders),
            _load_contingencies(args.contingencies),
            _load_schemes(args.schemes),
            tol_mw=args.tol,
        )
        _emit(fileio.export_ntc_domain(domain), args.out)
    return 0


def _cmd_couple(args) -> int:
    hour = _parse_hour(args.hour) if args.hour else None
    book = fileio.parse_orderbook(args.book, hour=hour)
    domain = fileio.load_domain(args.domain, args.domain_kind)
    result = couple(book, domain)
    _emit(fileio.export_coupling_result(result, book), args.out)
    return 0


def _cmd_max_transfer(args) -> int:
    net = fileio.parse_network(args.network)
    shift = ShiftSpec(
        source_zone=args.source_zone,
        sink_zone=args.sink_zone,
        headroom_mw=args.headroom,
    )
    result = max_transfer(
        net,
        Border(args.source_zone, args.sink_zone),
        _load_contingencies(args.contingencies),
        _load_schemes(args.schemes),
        shift,
        tol_mw=args.tol,
    )
    lines = [
        f"transfer_mw={fileio._fmt(result.transfer_mw)}",
        f"limiting_contingency={result.limiting_contingency_id or 'N-0'}",
        f"binding_element={result.binding_element_id or '-'}",
    ]
    for key in sorted(result.per_scenario_mw, key=lambda k: (k is not None, k or "")):
        label = key if key is not None else "N-0"
        lines.append(f"scenario {label}: {fileio._fmt(result.per_scenario_mw[key])}")
    if not result.feasible_at_zero:
        lines.append(f"infeasible_at_zero: {','.join(result.diagnostics)}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 2 if not result.feasible_at_zero else 0


def _cmd_compare(args) -> int:
    net = fileio.parse_network(args.network)
    book = fileio.parse_orderbook(args.book)
    specs = fileio.parse_cnecs(args.cnecs)
    fb = build_fb_domain(net, specs, ram_floor=args.ram_floor)
    ntc = ntc_from_borders(
        net,
        _parse_borders(args.borders),
        _load_contingencies(args.contingencies),
        _load_schemes(args.schemes),
    )
    fb_result = couple(book, fb)
    ntc_result = couple(book, ntc)
    lines = [
        f"fb_total_surplus_eur={fileio._fmt(fb_result.total_surplus)}",
        f"ntc_total_surplus_eur={fileio._fmt(ntc_result.total_surplus)}",
        f"surplus_delta_eur={fileio._fmt(fb_result.total_surplus - ntc_result.total_surplus)}",
    ]
    for z in sorted(fb_result.np):
        lines.append(
            f"zone {z}: np_fb={fileio._fmt(fb_result.np[z])}"
            f" price_fb={fileio._fmt(fb_result.zonal_price[z])}"
            f" np_ntc={fileio._fmt(ntc_result.np.get(z, 0.0))}"
            f" price_ntc={fileio._fmt(ntc_result.zonal_price.get(z, 0.0))}"
        )
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _cmd_sips_sim(args) -> int:
    net = fileio.parse_network(args.network)
    dispatch = fileio.parse_injections(args.dispatch)
    registry = fileio.parse_schemes(args.schemes)
    outage_ids = _split_csv_list(args.outage)
    contingency = (
        Contingency(args.contingency_id or "cli-outage", outage_ids) if outage_ids else None
    )
    sim = simulate_sips(net, dispatch, contingency, registry)
    doc = {
        "fired": list(sim.fired),
        "rounds": sim.rounds,
        "flows": {k: sim.flows[k] for k in sorted(sim.flows)},
        "injections": {k: sim.injections[k] for k in sorted(sim.injections)},
        "overloads": [
            {"element_id": o.element_id, "flow_mw": o.flow_mw, "limit_mw": o.limit_mw}
            for o in sim.overloads
        ],
        "log": [
            {
                "round": entry.round_no,
                "scheme_id": entry.scheme_id,
                "action": entry.action_kind,
                "target": entry.target,
                "requested_mw": entry.requested_mw,
                "applied_mw": entry.applied_mw,
            }
            for entry in sim.log
        ],
    }
    _emit(fileio._dump_json(doc), args.out)
    return 0


def _cmd_ra_value(args) -> int:
    parsed = fileio.parse_snapshots(args.snapshots)
    window = None
    if args.window:
        window = (_parse_hour(args.window[0]), _parse_hour(args.window[1]))
    report = aggregate_by_tso(parsed.records, window)
    tz = args.tz or os.environ.get("FBCOUPLER_TZ", "UTC")
    lines = [f"total_value_eur={fileio._fmt(report.total_value_eur)}"]
    for tso in sorted(report.tso_value_eur):
        lines.append(
            f"tso {tso}: fra_mwh={fileio._fmt(report.tso_fra_mwh[tso])}"
            f" value_eur={fileio._fmt(report.tso_value_eur[tso])}"
        )
    lines.append(f"rejected_rows={len(parsed.rejected)}")
    if args.out_dir:
        for p in fileio.write_valuation_reports(report, args.out_dir, tz):
            lines.append(f"wrote {p}")
    if args.hour:
        active = active_constraint_report(parsed.records, _parse_hour(args.hour))
        for r in active:
            lines.append(
                f"active {r.cnec_id}: shadow_price={fileio._fmt(r.shadow_price)}"
                f" fra={fileio._fmt(r.fra)} flow_fb={fileio._fmt(r.flow_fb)}"
            )
        if args.out_dir:
            p = fileio.write_active_constraint_report(
                active, Path(args.out_dir) / "active_constraints.csv", tz
            )
            lines.append(f"wrote {p}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="fbcoupler", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("ptdf", help="emit the (post-contingency) PTDF table as CSV")
    p.add_argument("--network", required=True)
    p.add_argument("--outage", help="comma-separated branch ids to outage")
    p.add_argument("--nodal", action="store_true", help="emit nodal instead of zonal PTDFs")
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_ptdf)

    p = sub.add_parser("domain", help="build and export a capacity domain")
    p.add_argument("--kind", choices=("fb", "ntc"), required=True)
    p.add_argument("--network", required=True)
    p.add_argument("--cnecs", help="CNEC spec JSON (fb)")
    p.add_argument("--basecase-np", help="zone->MW JSON (fb)")
    p.add_argument("--basecase-injections", help="node->MW JSON (fb)")
    p.add_argument("--ra-uplifts", help="cnec->MW JSON (fb)")
    p.add_argument("--ram-floor", type=float, default=0.0)
    p.add_argument("--borders", help="comma-separated FROM>TO pairs (ntc)")
    p.add_argument("--contingencies", help="contingency JSON (ntc)")
    p.add_argument("--schemes", help="scheme registry JSON (ntc)")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_domain)

    p = sub.add_parser("couple", help="clear an order book over a domain")
    p.add_argument("--book", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--domain-kind", choices=("auto", "fb", "ntc"), default="auto")
    p.add_argument("--hour", help="ISO-8601 delivery hour")
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_couple)

    p = sub.add_parser("max-transfer", help="iterative max-transfer process")
    p.add_argument("--network", required=True)
    p.add_argument("--source-zone", required=True)
    p.add_argument("--sink-zone", required=True)
    p.add_argument("--contingencies", help="contingency JSON")
    p.add_argument("--schemes", help="scheme registry JSON")
    p.add_argument("--headroom", type=float)
    p.add_argument("--tol", type=float, default=0.01)
    p.set_defaults(func=_cmd_max_transfer)

    p = sub.add_parser(
        "compare-ntc-fb", help="couple one book over both domain styles"
    )
    p.add_argument("--network", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--cnecs", required=True)
    p.add_argument("--borders", required=True)
    p.add_argument("--contingencies")
    p.add_argument("--schemes")
    p.add_argument("--ram-floor", type=float, default=0.0)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sips-sim", help="simulate protection schemes on a scenario")
    p.add_argument("--network", required=True)
    p.add_argument("--dispatch", required=True, help="node->MW JSON")
    p.add_argument("--schemes", required=True)
    p.add_argument("--outage", help="comma-separated branch ids")
    p.add_argument("--contingency-id")
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_sips_sim)

    p = sub.add_parser("ra-value", help="remedial-action valuation from snapshots")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--hour", help="emit the active-constraint report of this hour")
    p.add_argument("--window", nargs=2, metavar=("START", "END"))
    p.add_argument("--tz", help="display timezone (default: FBCOUPLER_TZ or UTC)")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_ra_value)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except _INFEASIBLE_ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except EngineError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

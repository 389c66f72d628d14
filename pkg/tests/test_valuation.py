from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import pytest

import fbcoupler as fb
from fbcoupler.errors import DuplicateRecord, UnknownHour, ValidationError

import helpers

H1 = datetime(2024, 11, 6, 16, 0, tzinfo=timezone.utc)  # 17:00-18:00 CET
H2 = datetime(2024, 11, 6, 17, 0, tzinfo=timezone.utc)


def record(hour, cnec_id, tso, fra, shadow_price, *, flow_at_bound=None, **overrides):
    """A consistent snapshot record; the flow sits on its bound iff priced."""
    fields = dict(fmax=1000.0, frm=50.0, f0=100.0, amr=0.0, faac=0.0, iva=0.0)
    fields.update(overrides)
    ram = (fields["fmax"] - fields["frm"] - fields["f0"] + fra + fields["amr"]
           - fields["faac"] - fields["iva"])
    at_bound = flow_at_bound if flow_at_bound is not None else shadow_price > 0
    return fb.CneSnapshotRecord(
        hour=hour, cnec_id=cnec_id, tso=tso, fra=fra, ram=ram,
        fref=0.5 * ram, flow_fb=(ram if at_bound else 0.25 * ram),
        min_flow=-ram, max_flow=ram, shadow_price=shadow_price,
        ptdfs={"NO4": 0.5, "SE2": -0.25}, **fields,
    )


# ---------------------------------------------------------------------------
# the lower bound itself
# ---------------------------------------------------------------------------


def test_value_of_the_reference_record():
    r = record(H1, "CNE11", "Statnett", fra=250.0, shadow_price=29.3)
    assert fb.ra_value_lower_bound(r) == 7325.0


def test_zero_fra_and_zero_lambda_are_worth_nothing():
    assert fb.ra_value_lower_bound(record(H1, "x", "T", 0.0, 1000.0)) == 0.0
    assert fb.ra_value_lower_bound(record(H1, "x", "T", 400.0, 0.0)) == 0.0


# ---------------------------------------------------------------------------
# record invariants
# ---------------------------------------------------------------------------


def test_ram_inconsistency_rejected_beyond_half_mw():
    with pytest.raises(ValidationError):
        fb.CneSnapshotRecord(
            hour=H1, cnec_id="x", tso="T", fmax=1000.0, frm=0.0, f0=0.0, fra=0.0,
            amr=0.0, faac=0.0, iva=0.0, ram=998.0, fref=0.0, flow_fb=0.0,
            min_flow=-998.0, max_flow=998.0, shadow_price=0.0, ptdfs={},
        )


def test_rounded_ram_tolerated():
    r = fb.CneSnapshotRecord(
        hour=H1, cnec_id="x", tso="T", fmax=1000.4, frm=0.0, f0=0.0, fra=0.0,
        amr=0.0, faac=0.0, iva=0.0, ram=1000.0, fref=0.0, flow_fb=0.0,
        min_flow=-1000.0, max_flow=1000.0, shadow_price=0.0, ptdfs={},
    )
    assert r.ram == 1000.0


def test_flow_outside_bounds_rejected():
    with pytest.raises(ValidationError):
        fb.CneSnapshotRecord(
            hour=H1, cnec_id="x", tso="T", fmax=1000.0, frm=0.0, f0=0.0, fra=0.0,
            amr=0.0, faac=0.0, iva=0.0, ram=1000.0, fref=0.0, flow_fb=500.0,
            min_flow=-100.0, max_flow=100.0, shadow_price=0.0, ptdfs={},
        )


def test_priced_record_must_sit_on_a_bound():
    with pytest.raises(ValidationError):
        record(H1, "x", "T", 100.0, 50.0, flow_at_bound=False)


def test_negative_fields_rejected():
    with pytest.raises(ValidationError):
        record(H1, "x", "T", -1.0, 0.0)
    with pytest.raises(ValidationError):
        record(H1, "x", "T", 0.0, -1.0)


def test_naive_hours_are_stored_as_utc():
    r = record(H1.replace(tzinfo=None), "x", "T", 0.0, 0.0)
    assert r.hour == H1


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def spreadsheet_records():
    """Two hours, four CNECs, two TSOs; totals cross-checked by hand."""
    return [
        record(H1, "CNE11", "Statnett", 250.0, 29.3),   # 7325
        record(H1, "CNE2", "Statnett", 100.0, 2.5),     # 250
        record(H1, "CNE3", "SvK", 0.0, 1513.0),         # 0
        record(H1, "CNE4", "SvK", 40.0, 10.0),          # 400
        record(H2, "CNE11", "Statnett", 250.0, 1.7),    # 425
        record(H2, "CNE2", "Statnett", 0.0, 0.0),       # 0
        record(H2, "CNE3", "SvK", 80.0, 2.0),           # 160
        record(H2, "CNE4", "SvK", 40.0, 0.0),           # 0
    ]


def test_two_records_add_up():
    report = fb.aggregate_by_tso(
        [record(H1, "a", "T", 10.0, 10.0), record(H1, "b", "T", 20.0, 10.0)]
    )
    assert report.tso_value_eur["T"] == 300.0


def test_empty_window_is_all_zeros():
    report = fb.aggregate_by_tso(
        spreadsheet_records(), window=(H1 - timedelta(days=2), H1 - timedelta(days=1))
    )
    assert report.records == ()
    assert report.total_value_eur == 0.0
    assert report.total_fra_mwh == 0.0


def test_spreadsheet_fixture_totals():
    report = fb.aggregate_by_tso(spreadsheet_records())
    assert report.tso_value_eur == {"Statnett": 8000.0, "SvK": 560.0}
    assert report.tso_fra_mwh == {"Statnett": 600.0, "SvK": 160.0}
    assert report.total_value_eur == 8560.0
    assert report.total_fra_mwh == 760.0
    assert report.cumulative_eur["Statnett"] == ((H1, 7575.0), (H2, 8000.0))
    assert report.cumulative_eur["SvK"] == ((H1, 400.0), (H2, 560.0))


def test_window_is_half_open():
    report = fb.aggregate_by_tso(spreadsheet_records(), window=(H1, H2))
    assert report.tso_value_eur == {"Statnett": 7575.0, "SvK": 400.0}


def test_duplicate_record_rejected():
    records = [record(H1, "a", "T", 10.0, 10.0), record(H1, "a", "T", 10.0, 10.0)]
    with pytest.raises(DuplicateRecord):
        fb.aggregate_by_tso(records)


def test_aggregation_is_order_invariant():
    records = spreadsheet_records()
    shuffled = records[:]
    random.Random(3).shuffle(shuffled)
    assert fb.aggregate_by_tso(records) == fb.aggregate_by_tso(shuffled)


def test_cumulative_series_nondecreasing():
    rng = random.Random(5)
    records = [
        record(H1 + timedelta(hours=h), f"c{i}", f"T{i % 2}",
               float(rng.randint(0, 300)), float(rng.randint(0, 50)))
        for h in range(6)
        for i in range(3)
    ]
    report = fb.aggregate_by_tso(records)
    for series in report.cumulative_eur.values():
        values = [v for _, v in series]
        assert values == sorted(values)


# ---------------------------------------------------------------------------
# active-constraint report
# ---------------------------------------------------------------------------


def test_report_sorted_by_descending_shadow_price():
    records = [
        record(H1, "SE3-internal", "SvK", 0.0, 1513.0),
        record(H1, "SE2-internal", "SvK", 0.0, 1019.0),
        record(H1, "NO4-CNE11", "Statnett", 250.0, 29.3),
        record(H1, "SE2-SE3-corridor", "SvK", 0.0, 722.0,
               fmax=7494.0, frm=0.0, f0=0.0),
        record(H1, "idle", "Statnett", 50.0, 0.0),
    ]
    report = fb.active_constraint_report(records, H1)
    assert [r.shadow_price for r in report] == [1513.0, 1019.0, 722.0, 29.3]
    corridor = report[2]
    assert corridor.flow_fb == 7494.0
    assert corridor.max_flow == 7494.0


def test_report_breaks_ties_by_cnec_id():
    records = [
        record(H1, "b", "T", 0.0, 10.0),
        record(H1, "a", "T", 0.0, 10.0),
    ]
    report = fb.active_constraint_report(records, H1)
    assert [r.cnec_id for r in report] == ["a", "b"]


def test_all_inactive_gives_empty_report():
    records = [record(H1, "a", "T", 10.0, 0.0)]
    assert fb.active_constraint_report(records, H1) == ()


def test_unknown_hour_rejected():
    with pytest.raises(UnknownHour):
        fb.active_constraint_report([record(H1, "a", "T", 0.0, 0.0)], H2)


# ---------------------------------------------------------------------------
# engine consistency: the bound really is a lower bound
# ---------------------------------------------------------------------------


def test_surplus_drop_without_fra_is_at_least_fra_times_lambda(trizone):
    book = fb.OrderBook(
        (fb.Bid("A", "supply", 10.0, 300.0), fb.Bid("C", "demand", 50.0, 300.0))
    )
    specs = helpers.trizone_specs()
    uplift = 30.0
    with_ra = fb.couple(book, fb.build_fb_domain(trizone, specs,
                                                 ra_uplifts={"CA:rev": uplift}))
    without = fb.couple(book, fb.build_fb_domain(trizone, specs))
    lam = with_ra.shadow_price["CA:rev"]
    assert lam > 0.0
    drop = with_ra.total_surplus - without.total_surplus
    assert drop >= uplift * lam - 1e-6

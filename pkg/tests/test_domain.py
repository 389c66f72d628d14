from __future__ import annotations

import math

import numpy as np
import pytest

import fbcoupler as fb
from fbcoupler.domain import RAM_EPSILON_MW
from fbcoupler.errors import (
    UnbalancedInjections,
    UnknownElement,
    ValidationError,
    ZoneMismatch,
)

import helpers


# ---------------------------------------------------------------------------
# RAM breakdown
# ---------------------------------------------------------------------------


def test_ram_identity_case():
    assert fb.compute_ram(fb.RamBreakdown(f_max=1000.0)) == 1000.0


def test_ram_hand_substitution():
    b = fb.RamBreakdown(f_max=1000.0, f_rm=100.0, f_0=200.0, f_ra=150.0, f_aac=50.0)
    assert fb.compute_ram(b) == 800.0


def test_ram_can_go_negative_before_amr():
    b = fb.RamBreakdown(f_max=500.0, f_0=600.0)
    assert fb.compute_ram(b) == -100.0


def test_ram_matches_independent_recomputation():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        vals = rng.uniform(0.0, 2000.0, size=7)
        b = fb.RamBreakdown(
            f_max=float(vals[0]), f_rm=float(vals[1]),
            f_0=float(vals[2] - 1000.0), f_ra=float(vals[3]),
            amr=float(vals[4]), f_aac=float(vals[5]), iva=float(vals[6]),
        )
        independent = b.f_max - b.f_rm - b.f_0 + b.f_ra + b.amr - b.f_aac - b.iva
        assert fb.compute_ram(b) == independent
        assert abs(fb.compute_ram(b) - math.fsum(
            [b.f_max, -b.f_rm, -b.f_0, b.f_ra, b.amr, -b.f_aac, -b.iva]
        )) <= 1e-9


def test_negative_terms_rejected():
    with pytest.raises(ValidationError):
        fb.RamBreakdown(f_max=100.0, f_rm=-1.0)
    with pytest.raises(ValidationError):
        fb.RamBreakdown(f_max=100.0, f_ra=-1.0)


def test_amr_noop_when_already_positive():
    b = fb.apply_amr_policy(fb.RamBreakdown(f_max=1000.0, f_rm=100.0, f_0=100.0))
    assert b.amr == 0.0


def test_amr_lifts_to_floor():
    b = fb.apply_amr_policy(fb.RamBreakdown(f_max=500.0, f_0=600.0), ram_floor=1.0)
    assert b.amr == 101.0
    assert b.ram() == pytest.approx(1.0, abs=1e-12)


def test_amr_floor_zero_keeps_strict_positivity():
    b = fb.apply_amr_policy(fb.RamBreakdown(f_max=500.0, f_0=600.0), ram_floor=0.0)
    assert b.amr == pytest.approx(100.0 + RAM_EPSILON_MW, abs=1e-15)
    assert b.ram() > 0.0


def test_amr_discards_previous_adjustment():
    b = fb.apply_amr_policy(fb.RamBreakdown(f_max=100.0, amr=40.0))
    assert b.amr == 0.0


def test_negative_floor_rejected():
    with pytest.raises(ValidationError):
        fb.apply_amr_policy(fb.RamBreakdown(f_max=1.0), ram_floor=-1.0)


# ---------------------------------------------------------------------------
# flow-based domain construction
# ---------------------------------------------------------------------------


def test_basecase_domain_of_reference_network(trizone):
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs(both_directions=False))
    assert len(domain.cnecs) == 3
    for cnec in domain.cnecs:
        assert cnec.ram_breakdown.f_0 == 0.0
        assert cnec.ram == pytest.approx(100.0, abs=1e-9)
    by_id = {c.id: c for c in domain.cnecs}
    assert by_id["AB"].ptdf_row["A"] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_post_contingency_cnec_row(trizone):
    spec = fb.CnecSpec(
        element="CA", direction=-1, tso="T",
        contingency=fb.Contingency("cAB", ("AB",)),
    )
    domain = fb.build_fb_domain(trizone, [spec])
    cnec = domain.cnecs[0]
    assert cnec.id == "CA:rev@cAB"
    assert cnec.ptdf_row["A"] == pytest.approx(1.0, abs=0.0)


def test_ra_uplift_raises_ram_by_exactly_that_amount(trizone):
    specs = helpers.trizone_specs(both_directions=False)
    plain = fb.build_fb_domain(trizone, specs)
    lifted = fb.build_fb_domain(trizone, specs, ra_uplifts={"AB": 250.0})
    delta = {
        c.id: c.ram - p.ram for c, p in zip(lifted.cnecs, plain.cnecs)
    }
    assert delta == {"AB": 250.0, "BC": 0.0, "CA": 0.0}


def test_negative_uplift_clamped(trizone):
    domain = fb.build_fb_domain(
        trizone, helpers.trizone_specs(both_directions=False), ra_uplifts={"AB": -50.0}
    )
    assert {c.id: c.ram_breakdown.f_ra for c in domain.cnecs} == {
        "AB": 0.0, "BC": 0.0, "CA": 0.0,
    }


def test_f0_references_intrazonal_pattern():
    # Zone A spans two nodes with all GSK weight on A1; dispatching A2 instead
    # leaves a residual flow that must land in f_0.
    net = fb.NetworkSnapshot(
        nodes=(fb.Node("A1", "A"), fb.Node("A2", "A"), fb.Node("B1", "B")),
        branches=(
            fb.Branch("L1", "A1", "B1", 1.0, 100.0),
            fb.Branch("L2", "A2", "B1", 1.0, 100.0),
            fb.Branch("L3", "A1", "A2", 1.0, 100.0),
        ),
        zones=(fb.Zone("A", {"A1": 1.0, "A2": 0.0}), fb.Zone("B", {"B1": 1.0})),
        slack_node="B1",
    )
    injections = {"A2": 60.0, "B1": -60.0}
    domain = fb.build_fb_domain(
        net,
        [fb.CnecSpec(element="L1", tso="T")],
        basecase_injections=injections,
    )
    cnec = domain.cnecs[0]
    assert cnec.ram_breakdown.f_0 != 0.0
    # Membership at the basecase NPs must reproduce the basecase flow.
    base_flow = fb.dc_load_flow(net, injections)["L1"]
    lhs = cnec.ram_breakdown.f_0 + sum(
        cnec.ptdf_row[z] * v for z, v in {"A": 60.0, "B": -60.0}.items()
    )
    assert lhs == pytest.approx(base_flow, abs=1e-9)


def test_gsk_spread_basecase_has_vanishing_f0(trizone):
    domain = fb.build_fb_domain(
        trizone,
        helpers.trizone_specs(both_directions=False),
        basecase_np={"A": 60.0, "B": 0.0, "C": -60.0},
    )
    for cnec in domain.cnecs:
        assert cnec.ram_breakdown.f_0 == pytest.approx(0.0, abs=1e-9)


def test_unbalanced_basecase_rejected(trizone):
    with pytest.raises(UnbalancedInjections):
        fb.build_fb_domain(
            trizone, helpers.trizone_specs(both_directions=False),
            basecase_np={"A": 10.0, "B": 0.0, "C": 0.0},
        )


def test_unknown_element_rejected(trizone):
    with pytest.raises(UnknownElement):
        fb.build_fb_domain(trizone, [fb.CnecSpec(element="XX", tso="T")])


def test_monitoring_an_outaged_element_rejected(trizone):
    spec = fb.CnecSpec(element="AB", tso="T", contingency=fb.Contingency("cAB", ("AB",)))
    with pytest.raises(UnknownElement):
        fb.build_fb_domain(trizone, [spec])


def test_ptc_cnec_aggregates_members(trizone):
    # Corridor counting everything leaving zone A: branch AB plus reversed CA.
    ptc = fb.Ptc("exportA", ("AB", "CA"), (1, -1), limit=120.0)
    domain = fb.build_fb_domain(
        trizone, [fb.CnecSpec(element="exportA", tso="T")], ptcs=[ptc]
    )
    cnec = domain.cnecs[0]
    assert cnec.ptdf_row["A"] == pytest.approx(1.0, abs=1e-12)
    assert cnec.ptdf_row["B"] == pytest.approx(0.0, abs=1e-12)
    assert cnec.ram == pytest.approx(120.0, abs=1e-9)


def test_ptc_invariants():
    with pytest.raises(ValidationError):
        fb.Ptc("p", ("AB",), (1,), limit=10.0)
    with pytest.raises(ValidationError):
        fb.Ptc("p", ("AB", "BC"), (1, 2), limit=10.0)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def test_origin_is_contained_in_amr_positive_domains(trizone):
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    contained, violated = fb.domain_contains(domain, {"A": 0.0, "B": 0.0, "C": 0.0})
    assert contained and violated == ()


def test_fb_membership_at_and_beyond_the_limit(trizone):
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    ok, _ = fb.domain_contains(domain, {"A": 120.0, "B": 0.0, "C": -120.0})
    assert ok  # 2/3 * 120 = 80 <= 100
    bad, violated = fb.domain_contains(domain, {"A": 180.0, "B": 0.0, "C": -180.0})
    assert not bad
    assert violated == ("CA:rev",)  # 2/3 * 180 = 120 > 100 in the A->C sense


def test_fb_membership_zone_order_invariant(trizone):
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    reordered = fb.FlowBasedDomain(cnecs=domain.cnecs, zones=tuple(reversed(domain.zones)))
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = rng.uniform(-200.0, 200.0, size=2)
        np_vec = {"A": float(a), "B": float(b), "C": float(-a - b)}
        assert fb.domain_contains(domain, np_vec) == fb.domain_contains(reordered, np_vec)


def test_ntc_membership():
    domain = fb.NtcDomain((fb.BorderCapacity("A", "C", 100.0),))
    ok, violated = fb.domain_contains(domain, {"A": 150.0, "C": -150.0})
    assert not ok and violated == ("np_upper:A", "np_lower:C")
    ok, violated = fb.domain_contains(domain, {"A": 80.0, "C": -80.0})
    assert ok and violated == ()


def test_ntc_transport_check_catches_box_feasible_infeasibility():
    # Intra-side borders inflate every zone's box, but only 10 MW can cross
    # from the exporting pair {A, B} to the importing pair {C, D}.
    domain = fb.NtcDomain(
        (fb.BorderCapacity("A", "B", 10.0), fb.BorderCapacity("B", "A", 10.0),
         fb.BorderCapacity("C", "D", 10.0), fb.BorderCapacity("D", "C", 10.0),
         fb.BorderCapacity("A", "C", 5.0), fb.BorderCapacity("B", "D", 5.0))
    )
    np_vec = {"A": 10.0, "B": 10.0, "C": -10.0, "D": -10.0}
    ok, violated = fb.domain_contains(domain, np_vec)
    assert not ok and violated == ("transport",)


def test_membership_zone_mismatch(trizone):
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    with pytest.raises(ZoneMismatch):
        fb.domain_contains(domain, {"A": 0.0, "B": 0.0})
    with pytest.raises(UnbalancedInjections):
        fb.domain_contains(domain, {"A": 1.0, "B": 0.0, "C": 0.0})


def test_fb_membership_agrees_with_direct_flow_checks(trizone):
    # Discrete scan against an independent oracle: solve the flows and
    # compare every thermal limit directly.
    domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    limits = {b.id: b.f_max_thermal for b in trizone.branches}
    for np_a in range(-150, 151, 5):
        for np_b in range(-150, 151, 5):
            np_vec = {"A": float(np_a), "B": float(np_b), "C": float(-np_a - np_b)}
            member, _ = fb.domain_contains(domain, np_vec)
            flows = fb.dc_load_flow(trizone, np_vec)
            direct = all(abs(flows[b]) <= limits[b] + 1e-6 for b in flows)
            assert member == direct, np_vec


# ---------------------------------------------------------------------------
# max transfer and NTC construction
# ---------------------------------------------------------------------------


def test_max_transfer_basecase(trizone):
    result = fb.max_transfer(trizone, fb.Border("A", "C"))
    assert result.transfer_mw == pytest.approx(150.0, abs=0.01)
    assert result.limiting_contingency_id is None
    assert result.binding_element_id == "CA"


def test_max_transfer_contingency_binds(trizone):
    result = fb.max_transfer(
        trizone, fb.Border("A", "C"), [fb.Contingency("cAB", ("AB",))]
    )
    assert result.transfer_mw == pytest.approx(100.0, abs=0.01)
    assert result.limiting_contingency_id == "cAB"


def test_max_transfer_with_relief_scheme(trizone):
    registry = fb.SchemeRegistry((helpers.rejection_scheme("r30", "AB", "A", 30.0),))
    result = fb.max_transfer(
        trizone, fb.Border("A", "C"), [fb.Contingency("cAB", ("AB",))], registry
    )
    assert result.transfer_mw == pytest.approx(130.0, abs=0.01)
    assert result.limiting_contingency_id == "cAB"


def test_max_transfer_monotone_in_contingencies(trizone):
    base = fb.max_transfer(trizone, fb.Border("A", "C"))
    one = fb.max_transfer(trizone, fb.Border("A", "C"), [fb.Contingency("cAB", ("AB",))])
    two = fb.max_transfer(
        trizone, fb.Border("A", "C"),
        [fb.Contingency("cAB", ("AB",)), fb.Contingency("cBC", ("BC",))],
    )
    assert one.transfer_mw <= base.transfer_mw + 0.01
    assert two.transfer_mw <= one.transfer_mw + 0.01


def test_max_transfer_monotone_in_relief_schemes(trizone):
    cont = [fb.Contingency("cAB", ("AB",))]
    small = fb.SchemeRegistry((helpers.rejection_scheme("r10", "AB", "A", 10.0),))
    large = fb.SchemeRegistry(
        (helpers.rejection_scheme("r10", "AB", "A", 10.0),
         helpers.rejection_scheme("r20", "AB", "A", 20.0))
    )
    t_none = fb.max_transfer(trizone, fb.Border("A", "C"), cont).transfer_mw
    t_small = fb.max_transfer(trizone, fb.Border("A", "C"), cont, small).transfer_mw
    t_large = fb.max_transfer(trizone, fb.Border("A", "C"), cont, large).transfer_mw
    assert t_small >= t_none - 0.01
    assert t_large >= t_small - 0.01


def test_max_transfer_headroom_limited(trizone):
    shift = fb.ShiftSpec("A", "C", headroom_mw=40.0)
    result = fb.max_transfer(trizone, fb.Border("A", "C"), shift_spec=shift)
    assert result.transfer_mw == 40.0
    assert result.binding_element_id is None


def test_max_transfer_infeasible_at_zero():
    # An HVDC link already overloads a branch at zero transfer.
    net = fb.NetworkSnapshot(
        nodes=(fb.Node("N1", "A"), fb.Node("N2", "B")),
        branches=(fb.Branch("L1", "N1", "N2", 1.0, 50.0),),
        zones=(fb.Zone("A", {"N1": 1.0}), fb.Zone("B", {"N2": 1.0})),
        hvdc_links=(fb.HvdcLink("H", "N2", "N1", setpoint=-60.0, capacity=100.0),),
        slack_node="N2",
    )
    result = fb.max_transfer(net, fb.Border("A", "B"))
    assert result.transfer_mw == 0.0
    assert not result.feasible_at_zero
    assert "L1" in result.diagnostics


def test_max_transfer_cnec_target_reports_flow(trizone):
    spec = fb.CnecSpec(element="CA", direction=-1, tso="T",
                       contingency=fb.Contingency("cAB", ("AB",)))
    cnec = fb.build_fb_domain(trizone, [spec]).cnecs[0]
    result = fb.max_transfer(trizone, cnec, shift_spec=fb.ShiftSpec("A", "C"))
    assert result.transfer_mw == pytest.approx(100.0, abs=0.01)
    assert result.target_flow_mw == pytest.approx(100.0, abs=0.05)


def test_ntc_from_borders_symmetry(trizone):
    domain = fb.ntc_from_borders(trizone, [fb.Border("A", "C"), fb.Border("C", "A")])
    caps = {b.id: b.capacity for b in domain.borders}
    assert caps["A>C"] == pytest.approx(caps["C>A"], abs=0.02)
    assert caps["A>C"] == pytest.approx(150.0, abs=0.01)


def test_ntc_from_borders_with_contingency(trizone):
    domain = fb.ntc_from_borders(
        trizone, [fb.Border("A", "C")], [fb.Contingency("cAB", ("AB",))]
    )
    assert domain.borders[0].capacity == pytest.approx(100.0, abs=0.01)


def test_duplicate_border_rejected():
    with pytest.raises(ValidationError):
        fb.NtcDomain(
            (fb.BorderCapacity("A", "B", 1.0), fb.BorderCapacity("A", "B", 2.0))
        )


# ---------------------------------------------------------------------------
# structural comparisons of the two domain styles
# ---------------------------------------------------------------------------


def all_borders():
    return [
        fb.Border(a, b)
        for a in ("A", "B", "C")
        for b in ("A", "B", "C")
        if a != b
    ]


def test_meshed_ntc_admits_fb_violations(trizone):
    """The per-border capacities cannot capture meshed loop-flow limits."""
    ntc = fb.ntc_from_borders(trizone, all_borders())
    fb_domain = fb.build_fb_domain(trizone, helpers.trizone_specs())
    witness = None
    for np_a in range(-150, 151, 5):
        for np_b in range(-150, 151, 5):
            np_vec = {"A": float(np_a), "B": float(np_b), "C": float(-np_a - np_b)}
            if fb.domain_contains(fb_domain, np_vec)[0]:
                continue
            if fb.domain_contains(ntc, np_vec)[0]:
                witness = np_vec
                break
        if witness:
            break
    assert witness is not None
    print(f"meshed-inadequacy witness: {witness}")


def test_radial_network_domains_agree(twozone):
    ntc = fb.ntc_from_borders(twozone, [fb.Border("A", "B"), fb.Border("B", "A")])
    fb_domain = fb.build_fb_domain(
        twozone,
        [fb.CnecSpec(element="L1", tso="T"),
         fb.CnecSpec(element="L1", tso="T", direction=-1)],
    )
    for np_a in range(-60, 61, 5):
        np_vec = {"A": float(np_a), "B": float(-np_a)}
        assert (
            fb.domain_contains(fb_domain, np_vec)[0]
            == fb.domain_contains(ntc, np_vec)[0]
        ), np_vec

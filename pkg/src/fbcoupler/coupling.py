"""Welfare-maximizing single-hour market coupling with exact dual extraction.

The coupling LP maximizes gross economic surplus (accepted demand value minus
accepted supply cost) subject to per-zone balances defining net positions,
the zonal balance sum(NP) = 0, acceptance bounds, and the capacity-domain
constraints (flow-based CNEC rows, or border-flow transport within NTC
capacities).  Zonal prices are the duals of the zone balances, the system
price is the dual of the zonal balance, and shadow prices are the duals of
the domain constraints: the marginal surplus of one extra MW of capacity.

Degenerate prices (vertical overlaps of the step curves) are resolved to the
midpoint of the valid dual interval: after the primal solve, the per-zone
price range over the dual-optimal face is computed, and the reported dual
vector is the dual-optimal point L1-closest to the per-zone midpoints.  That
point still satisfies strong duality, complementary slackness and the
flow-based price decomposition

    zonal_price(z) = system_price - sum_c lambda(c) * PTDF(c, z)

because every dual-optimal point does.  Identical-price bids at the margin
are settled pro rata.  Quantities are MW over one hour, so MW and MWh
coincide numerically; the currency is EUR.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from datetime import datetime

import numpy as np
from scipy.optimize import linprog

from .domain import FlowBasedDomain, NtcDomain
from .errors import (
    Infeasible,
    MismatchedResult,
    ValidationError,
    ZoneMismatch,
)

#: Tolerance below which a domain constraint counts as binding, MW.
BINDING_TOL_MW = 1e-6

SUPPLY = "supply"
DEMAND = "demand"


@dataclass(frozen=True)
class Bid:
    """A one-hour step order: quantity MW at a limit price EUR/MWh."""

    zone: str
    side: str
    price: float
    quantity: float

    def __post_init__(self) -> None:
        if not self.zone:
            raise ValidationError("bid zone must be non-empty", code="empty_id")
        if self.side not in (SUPPLY, DEMAND):
            raise ValidationError(
                f"bid side must be '{SUPPLY}' or '{DEMAND}', got {self.side!r}",
                code="bad_side",
            )
        if not math.isfinite(self.price):
            raise ValidationError("bid price must be finite", code="nonfinite")
        if not self.quantity > 0.0:
            raise ValidationError("bid quantity must be > 0", code="nonpositive_quantity")


@dataclass(frozen=True)
class OrderBook:
    """All bids of one delivery hour."""

    bids: tuple[Bid, ...]
    hour: datetime | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bids", tuple(self.bids))
        if not self.bids:
            raise ValidationError("order book must contain at least one bid", code="empty_book")


@dataclass(frozen=True)
class CouplingResult:
    """Primal and dual outcome of one coupling run.

    ``accepted`` is the acceptance fraction per bid, aligned with the order
    book.  ``shadow_price`` maps domain-constraint ids (CNEC ids, or border
    ids "A>B") to EUR/MW.  ``binding`` is the set of active constraint ids.
    """

    np: Mapping[str, float]
    zonal_price: Mapping[str, float]
    accepted: tuple[float, ...]
    consumer_surplus: float
    producer_surplus: float
    congestion_rent: float
    total_surplus: float
    shadow_price: Mapping[str, float]
    binding: frozenset[str]
    system_price: float
    dual_objective: float
    dual_gap: float


class _Program:
    """Matrix form of the coupling LP, minimization convention.

    Variables: acceptance fractions x (one per bid), net positions np (one
    per zone, free), and for NTC domains one flow per directed border.
    """

    def __init__(self, book: OrderBook, domain: FlowBasedDomain | NtcDomain) -> None:
        if isinstance(domain, FlowBasedDomain):
            if not domain.zones:
                raise ValidationError("domain has no zones", code="empty_domain")
            self.zones = tuple(sorted(domain.zones))
            self.borders = ()
            self.cnecs = domain.cnecs
            self.is_ntc = False
        else:
            if not domain.borders:
                raise ValidationError("NTC domain has no borders", code="empty_domain")
            self.zones = domain.zones
            self.borders = domain.borders
            self.cnecs = ()
            self.is_ntc = True

        zone_pos = {z: i for i, z in enumerate(self.zones)}
        for bid in book.bids:
            if bid.zone not in zone_pos:
                raise ZoneMismatch(f"bid zone {bid.zone} is not part of the domain")

        self.bids = book.bids
        nb, nz, nf = len(self.bids), len(self.zones), len(self.borders)
        self.nb, self.nz, self.nf = nb, nz, nf
        nvar = nb + nz + nf
        self.nvar = nvar
        self.x_of = lambda j: j
        self.np_of = lambda k: nb + k
        self.f_of = lambda j: nb + nz + j

        c = np.zeros(nvar)
        for j, bid in enumerate(self.bids):
            c[j] = bid.price * bid.quantity if bid.side == SUPPLY else -bid.price * bid.quantity
        self.c = c

        # Equalities: zone balances, the system balance, NTC transport links.
        neq = nz + 1 + (nz if self.is_ntc else 0)
        a_eq = np.zeros((neq, nvar))
        for j, bid in enumerate(self.bids):
            sign = 1.0 if bid.side == DEMAND else -1.0
            a_eq[zone_pos[bid.zone], j] = sign * bid.quantity
        for k in range(nz):
            a_eq[k, nb + k] = 1.0
            a_eq[nz, nb + k] = 1.0
        if self.is_ntc:
            for k in range(nz):
                a_eq[nz + 1 + k, nb + k] = 1.0
            for j, border in enumerate(self.borders):
                a_eq[nz + 1 + zone_pos[border.zone_from], nb + nz + j] -= 1.0
                a_eq[nz + 1 + zone_pos[border.zone_to], nb + nz + j] += 1.0
        self.a_eq = a_eq
        self.b_eq = np.zeros(neq)
        self.neq = neq
        self.row_balance = list(range(nz))
        self.row_system = nz
        self.row_links = list(range(nz + 1, neq)) if self.is_ntc else []

        if self.cnecs:
            g = np.zeros((len(self.cnecs), nvar))
            h = np.zeros(len(self.cnecs))
            for r, cnec in enumerate(self.cnecs):
                for k, z in enumerate(self.zones):
                    g[r, nb + k] = cnec.ptdf_row[z]
                h[r] = cnec.ram
            self.g, self.h = g, h
        else:
            self.g = np.zeros((0, nvar))
            self.h = np.zeros(0)

        upper = np.full(nvar, np.inf)
        lower = np.zeros(nvar)
        upper[:nb] = 1.0
        lower[nb : nb + nz] = -np.inf
        for j, border in enumerate(self.borders):
            upper[nb + nz + j] = border.capacity
        self.lower, self.upper = lower, upper
        self.bounds = list(zip((None if not np.isfinite(v) else v for v in lower),
                               (None if not np.isfinite(v) else v for v in upper)))
        self.price_cap = 10.0 * (1.0 + max(abs(b.price) for b in self.bids))

    def solve_primal(self) -> tuple[np.ndarray, float]:
        res = linprog(
            self.c,
            A_ub=self.g if len(self.h) else None,
            b_ub=self.h if len(self.h) else None,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=self.bounds,
            method="highs",
        )
        if res.status == 2:
            raise Infeasible(
                "coupling LP infeasible; the domain does not admit any balanced"
                " net-position vector"
            )
        if res.status != 0:
            raise RuntimeError(f"coupling LP failed: {res.message}")
        self._primal_res = res
        return np.asarray(res.x), float(res.fun)


class _DualFace:
    """LP over the dual-optimal face of a solved coupling program.

    Face variables: y (equality duals), mu >= 0 (domain-row duals), alpha and
    beta >= 0 (lower/upper bound duals per primal variable), plus optional
    L1-fit auxiliaries.  Stationarity rows hold exactly on the face, so any
    face point yields valid prices, shadow prices and the decomposition
    identity.  The face is anchored to the dual's own measured optimum, so
    restricting it costs no meaningful accuracy.
    """

    def __init__(self, prog: _Program) -> None:
        self.prog = prog
        p = prog
        self.ny, self.nm, self.nv = p.neq, len(p.h), p.nvar
        self.off_mu = self.ny
        self.off_alpha = self.ny + self.nm
        self.off_beta = self.off_alpha + self.nv
        self.n = self.off_beta + self.nv

        # Stationarity: A_eq^T y + G^T mu + beta - alpha = -c
        rows = np.zeros((self.nv, self.n))
        rows[:, : self.ny] = p.a_eq.T
        if self.nm:
            rows[:, self.off_mu : self.off_alpha] = p.g.T
        rows[:, self.off_alpha : self.off_beta] = -np.eye(self.nv)
        rows[:, self.off_beta :] = np.eye(self.nv)
        a_eq = [rows]
        b_eq = [-p.c]
        if p.is_ntc:
            # The system row is a combination of the transport links, leaving
            # a free ray in (y_sys, y_link); pin it for determinism.
            pin = np.zeros((1, self.n))
            pin[0, p.row_links] = 1.0
            a_eq.append(pin)
            b_eq.append(np.zeros(1))
        self.a_eq = np.vstack(a_eq)
        self.b_eq = np.concatenate(b_eq)

        # Dual objective coefficients: g = -h.mu - u.beta (b_eq = 0, l = 0).
        neg_g = np.zeros(self.n)
        neg_g[self.off_mu : self.off_alpha] = p.h
        for j in range(self.nv):
            if np.isfinite(p.upper[j]):
                neg_g[self.off_beta + j] = p.upper[j]
        self.neg_g = neg_g
        self.a_ub = np.zeros((0, self.n))
        self.b_ub = np.zeros(0)

        bounds: list[tuple[float | None, float | None]] = [(None, None)] * self.ny
        bounds += [(0.0, None)] * self.nm
        for j in range(self.nv):  # alpha: only for finitely lower-bounded vars
            bounds.append((0.0, None) if np.isfinite(p.lower[j]) else (0.0, 0.0))
        for j in range(self.nv):  # beta: only for finitely upper-bounded vars
            bounds.append((0.0, None) if np.isfinite(p.upper[j]) else (0.0, 0.0))
        self.bounds = bounds
        self.g_opt: float | None = None

    def _run(self, c, a_ub, b_ub, a_eq, b_eq, bounds) -> np.ndarray | None:
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        return np.asarray(res.x) if res.status == 0 else None

    def restrict_to_optimum(self) -> bool:
        """Maximize the dual objective, then constrain the face to it.

        The maximizing point itself satisfies the face row with equality, so
        a hair of absolute slack keeps the restriction robustly feasible
        without letting prices wander measurably.
        """
        sol = self._run(self.neg_g, None, None, self.a_eq, self.b_eq, self.bounds)
        if sol is None:
            return False
        best = float(self.neg_g @ sol)
        self.a_ub = self.neg_g.reshape(1, -1)
        self.b_ub = np.array([best + 1e-9])
        self.g_opt = -best
        return True

    def _capped_bounds(self, row: int) -> list:
        bounds = list(self.bounds)
        cap = self.prog.price_cap
        bounds[row] = (-cap, cap)
        return bounds

    def price_interval(self, zone_row: int) -> tuple[float, float] | None:
        lo_c = np.zeros(self.n)
        lo_c[zone_row] = 1.0
        bounds = self._capped_bounds(zone_row)
        lo = self._run(lo_c, self.a_ub, self.b_ub, self.a_eq, self.b_eq, bounds)
        hi = self._run(-lo_c, self.a_ub, self.b_ub, self.a_eq, self.b_eq, bounds)
        if lo is None or hi is None:
            return None
        return float(lo[zone_row]), float(hi[zone_row])

    def fit_midpoints(self, targets: Mapping[int, float]) -> np.ndarray | None:
        """Dual-optimal point minimizing sum |y_row - target| over the rows."""
        rows = sorted(targets)
        nd = len(rows)
        n_ext = self.n + nd
        a_eq = np.hstack([self.a_eq, np.zeros((self.a_eq.shape[0], nd))])
        a_ub = [np.hstack([self.a_ub, np.zeros((self.a_ub.shape[0], nd))])]
        b_ub = [self.b_ub]
        for k, row in enumerate(rows):
            up = np.zeros(n_ext)
            up[row] = 1.0
            up[self.n + k] = -1.0
            a_ub.append(up.reshape(1, -1))
            b_ub.append(np.array([targets[row]]))
            dn = np.zeros(n_ext)
            dn[row] = -1.0
            dn[self.n + k] = -1.0
            a_ub.append(dn.reshape(1, -1))
            b_ub.append(np.array([-targets[row]]))
        c = np.zeros(n_ext)
        c[self.n :] = 1.0
        sol = self._run(
            c,
            np.vstack(a_ub),
            np.concatenate(b_ub),
            a_eq,
            self.b_eq,
            self.bounds + [(0.0, None)] * nd,
        )
        return sol[: self.n] if sol is not None else None

    def dual_objective(self, point: np.ndarray) -> float:
        return -float(self.neg_g @ point)


def _fallback_duals(prog: _Program) -> np.ndarray:
    """Dual vector straight from the primal solver (used if a face LP fails)."""
    res = prog._primal_res
    n = prog.neq + len(prog.h) + 2 * prog.nvar
    point = np.zeros(n)
    point[: prog.neq] = -np.asarray(res.eqlin.marginals)
    if len(prog.h):
        point[prog.neq : prog.neq + len(prog.h)] = np.clip(
            -np.asarray(res.ineqlin.marginals), 0.0, None
        )
    # Derive bound duals from the stationarity residual.
    resid = (
        prog.c
        + prog.a_eq.T @ point[: prog.neq]
        + (prog.g.T @ point[prog.neq : prog.neq + len(prog.h)] if len(prog.h) else 0.0)
    )
    off_a = prog.neq + len(prog.h)
    point[off_a : off_a + prog.nvar] = np.clip(resid, 0.0, None)
    point[off_a + prog.nvar :] = np.clip(-resid, 0.0, None)
    return point


def _prorate(bids: Sequence[Bid], x: np.ndarray) -> np.ndarray:
    """Spread each (zone, side, price) group's acceptance pro rata by quantity."""
    out = np.clip(x, 0.0, 1.0)
    groups: dict[tuple[str, str, float], list[int]] = {}
    for j, bid in enumerate(bids):
        groups.setdefault((bid.zone, bid.side, bid.price), []).append(j)
    for members in groups.values():
        if len(members) < 2:
            continue
        total = math.fsum(bids[j].quantity for j in members)
        taken = math.fsum(bids[j].quantity * out[j] for j in members)
        frac = min(1.0, taken / total)
        for j in members:
            out[j] = frac
    return out


def couple(book: OrderBook, domain: FlowBasedDomain | NtcDomain) -> CouplingResult:
    """Clear one hour over a capacity domain and extract shadow prices.

    Raises ZoneMismatch when a bid's zone is not part of the domain and
    Infeasible when the domain admits no balanced net-position vector (which
    cannot happen on AMR-positive flow-based domains, where NP = 0 with zero
    acceptance is always feasible).
    """
    prog = _Program(book, domain)
    x, v_min = prog.solve_primal()

    face = _DualFace(prog)
    point = None
    if face.restrict_to_optimum():
        intervals: dict[int, float] = {}
        ok = True
        for k in range(prog.nz):
            rng = face.price_interval(prog.row_balance[k])
            if rng is None:
                ok = False
                break
            intervals[prog.row_balance[k]] = 0.5 * (rng[0] + rng[1])
        if ok:
            point = face.fit_midpoints(intervals)
    if point is None:
        point = _fallback_duals(prog)

    y = point[: prog.neq]
    mu = point[prog.neq : prog.neq + len(prog.h)]
    beta = point[prog.neq + len(prog.h) + prog.nvar :]

    zones = prog.zones
    prices = {z: float(y[prog.row_balance[k]]) + 0.0 for k, z in enumerate(zones)}
    system_price = -float(y[prog.row_system]) + 0.0

    net_positions = {z: float(x[prog.np_of(k)]) + 0.0 for k, z in enumerate(zones)}
    accepted = _prorate(prog.bids, x[: prog.nb])

    shadow: dict[str, float] = {}
    binding: set[str] = set()
    if prog.cnecs:
        for r, cnec in enumerate(prog.cnecs):
            shadow[cnec.id] = float(mu[r])
            slack = cnec.ram - math.fsum(
                cnec.ptdf_row[z] * net_positions[z] for z in sorted(zones)
            )
            if slack <= BINDING_TOL_MW * max(1.0, abs(cnec.ram)):
                binding.add(cnec.id)
    for j, border in enumerate(prog.borders):
        shadow[border.id] = float(beta[prog.f_of(j)])
        slack = border.capacity - float(x[prog.f_of(j)])
        if slack <= BINDING_TOL_MW * max(1.0, abs(border.capacity)):
            binding.add(border.id)

    consumer = math.fsum(
        bid.quantity * accepted[j] * (bid.price - prices[bid.zone])
        for j, bid in enumerate(prog.bids)
        if bid.side == DEMAND
    )
    producer = math.fsum(
        bid.quantity * accepted[j] * (prices[bid.zone] - bid.price)
        for j, bid in enumerate(prog.bids)
        if bid.side == SUPPLY
    )
    congestion = math.fsum(prices[z] * -net_positions[z] for z in sorted(zones))
    total = consumer + producer + congestion

    welfare = -v_min
    dual_objective = -face.dual_objective(point)
    gap = abs(welfare - dual_objective)
    if gap > 1e-6 * (1.0 + abs(welfare)):
        raise RuntimeError(
            f"duality gap {gap!r} exceeds certification threshold"
        )

    return CouplingResult(
        np=net_positions,
        zonal_price=prices,
        accepted=tuple(float(v) + 0.0 for v in accepted),
        consumer_surplus=consumer,
        producer_surplus=producer,
        congestion_rent=congestion,
        total_surplus=total,
        shadow_price=shadow,
        binding=frozenset(binding),
        system_price=system_price,
        dual_objective=dual_objective,
        dual_gap=gap,
    )


def surplus_decomposition(
    result: CouplingResult, book: OrderBook
) -> tuple[float, float, float]:
    """(consumer, producer, congestion) surpluses of a result, in EUR.

    Recomputed from the acceptance fractions and prices; raises
    MismatchedResult when the result does not belong to the book.
    """
    if len(result.accepted) != len(book.bids):
        raise MismatchedResult(
            f"result carries {len(result.accepted)} acceptances for"
            f" {len(book.bids)} bids"
        )
    book_zones = {b.zone for b in book.bids}
    if not book_zones <= set(result.np):
        raise MismatchedResult("result zones do not cover the book's zones")
    consumer = math.fsum(
        b.quantity * f * (b.price - result.zonal_price[b.zone])
        for b, f in zip(book.bids, result.accepted)
        if b.side == DEMAND
    )
    producer = math.fsum(
        b.quantity * f * (result.zonal_price[b.zone] - b.price)
        for b, f in zip(book.bids, result.accepted)
        if b.side == SUPPLY
    )
    congestion = math.fsum(
        result.zonal_price[z] * -result.np[z] for z in sorted(result.np)
    )
    return consumer, producer, congestion

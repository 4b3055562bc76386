"""Baseline economy with wage insurance: reservation wages, surplus, effort.

A worker with previous wage z consumes w + phi*(z - w)_+ - T on a job paying w,
collects b(z) while unemployed, and meets offers either at an exogenous Poisson
rate or at a chosen rate lambda costing kappa * lambda^(1+eta) / (1+eta) per
unit time.  This module solves the reservation-wage rules, the search surplus
and effort tables, the pooling threshold below which the insurance never binds,
and the analytic slopes of the reservation wage and surplus on the region where
it does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.interpolate import PchipInterpolator

from .dist import DistributionSpec
from .roots import BracketError, bracket_root, bracket_root_batch, expand_bracket


class SearchMode(str, Enum):
    EXOGENOUS_ARRIVAL = "exogenous_arrival"
    ENDOGENOUS_SEARCH = "endogenous_search"


class ModelError(RuntimeError):
    pass


class ReservationOutOfSupport(ModelError):
    """The acceptance threshold left the open support of the offer distribution."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


@dataclass(frozen=True)
class Primitives:
    """Discounting and search technology.

    In exogenous-arrival mode offers appear at rate `lambda_bar` and effort is
    fixed; in endogenous-search mode `lambda_bar` must be 0 and the worker picks
    an arrival rate subject to the convex cost kappa * lam^(1+eta) / (1+eta).
    """

    r: float
    mode: SearchMode
    lambda_bar: float = 0.0
    kappa: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", SearchMode(self.mode))
        if self.r <= 0.0:
            raise ValueError("discount rate r must be positive")
        if self.mode is SearchMode.EXOGENOUS_ARRIVAL and self.lambda_bar <= 0.0:
            raise ValueError("exogenous arrival requires lambda_bar > 0")
        if self.mode is SearchMode.ENDOGENOUS_SEARCH and self.lambda_bar != 0.0:
            raise ValueError("endogenous search requires lambda_bar = 0")
        if self.kappa <= 0.0 or self.eta <= 0.0:
            raise ValueError("search cost parameters kappa, eta must be positive")

    def psi(self, lam):
        """Flow cost of search effort lam."""
        return self.kappa * np.power(lam, 1.0 + self.eta) / (1.0 + self.eta)

    def to_dict(self):
        return {"r": self.r, "mode": self.mode.value, "lambda_bar": self.lambda_bar,
                "kappa": self.kappa, "eta": self.eta}


def search_return(s, prim):
    """Optimal search payoff for surplus s: returns (R, lambda_star).

    The first-order condition kappa * lam^eta = s gives lam in closed form;
    R = -psi(lam) + lam * s and R'(s) = lam by the envelope theorem.  Accepts
    scalars or arrays.
    """
    if np.any(np.asarray(s) < 0.0):
        raise ValueError(f"negative search surplus {s!r}; upstream solver bug")
    scale = (prim.eta / (1.0 + prim.eta)) * prim.kappa ** (-1.0 / prim.eta)
    if np.ndim(s) == 0:
        if s == 0.0:
            return 0.0, 0.0
        return scale * s ** ((1.0 + prim.eta) / prim.eta), \
            (s / prim.kappa) ** (1.0 / prim.eta)
    s = np.asarray(s, dtype=float)
    lam = np.power(s / prim.kappa, 1.0 / prim.eta)
    return scale * np.power(s, (1.0 + prim.eta) / prim.eta), lam


class BenefitSchedule:
    """Unemployment benefit as a function of the previous wage.

    Kinds: "constant", "affine" (a0 + a1*z), or "table" (monotone-cubic
    interpolation through given knots).
    """

    def __init__(self, kind, *, value=0.0, a0=0.0, a1=0.0, z_knots=None, values=None):
        self.kind = kind
        if kind == "constant":
            self.value = float(value)
        elif kind == "affine":
            self.a0 = float(a0)
            self.a1 = float(a1)
        elif kind == "table":
            z_knots = np.asarray(z_knots, dtype=float)
            values = np.asarray(values, dtype=float)
            if z_knots.ndim != 1 or z_knots.shape != values.shape or z_knots.size < 2:
                raise ValueError("benefit table needs matching 1-d knots and values")
            if np.any(np.diff(z_knots) <= 0.0):
                raise ValueError("benefit table knots must be strictly increasing")
            self.z_knots = z_knots
            self.values = values
            self._interp = PchipInterpolator(z_knots, values, extrapolate=True)
        else:
            raise ValueError(f"unknown benefit schedule kind {kind!r}")

    @staticmethod
    def constant(value):
        return BenefitSchedule("constant", value=value)

    @staticmethod
    def affine(a0, a1):
        return BenefitSchedule("affine", a0=a0, a1=a1)

    @staticmethod
    def table(z_knots, values):
        return BenefitSchedule("table", z_knots=z_knots, values=values)

    @property
    def is_constant(self):
        return self.kind == "constant"

    def __call__(self, z):
        if self.kind == "constant":
            return self.value if np.ndim(z) == 0 else np.full(np.shape(z), self.value)
        if self.kind == "affine":
            return self.a0 + self.a1 * np.asarray(z, dtype=float) \
                if np.ndim(z) else self.a0 + self.a1 * float(z)
        out = self._interp(z)
        return float(out) if np.ndim(z) == 0 else out

    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "affine":
            return {"kind": "affine", "a0": self.a0, "a1": self.a1}
        return {"kind": "table", "z": self.z_knots.tolist(),
                "values": self.values.tolist()}

    @staticmethod
    def from_dict(d):
        kind = d.get("kind")
        if kind == "constant":
            return BenefitSchedule.constant(d["value"])
        if kind == "affine":
            return BenefitSchedule.affine(d["a0"], d["a1"])
        if kind == "table":
            return BenefitSchedule.table(d["z"], d["values"])
        raise ValueError(f"unknown benefit schedule kind {kind!r}")


@dataclass(frozen=True)
class WIPolicy:
    """A UI + wage-insurance policy: benefit schedule, lump-sum tax, generosity."""

    b: BenefitSchedule
    T: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.phi <= 0.99:
            raise ValueError("phi must lie in [0, 0.99]")

    def with_tax(self, T):
        return WIPolicy(self.b, float(T), self.phi)


def consumption_wi(w, z, policy):
    """Net consumption on a job paying w for a worker with previous wage z."""
    w = np.asarray(w, dtype=float) if np.ndim(w) else float(w)
    top_up = np.maximum(np.asarray(z, dtype=float) - w, 0.0) if np.ndim(w) or np.ndim(z) \
        else max(z - w, 0.0)
    return w + policy.phi * top_up - policy.T


def _gain_above(x, z, phi, F):
    # integral of g(w,z) - g(x,z) over accepted wages w >= x
    u1x = F.upper_partial_moment(x, 1)
    if x < z:
        return (1.0 - phi) * u1x + phi * F.upper_partial_moment(z, 1)
    return u1x


def acceptance_residual_exogenous(y, z, b_z, T, phi, lam, r, F):
    """Indifference residual at candidate reservation wage y (exogenous arrival).

    Strictly increasing in y, so its root is the unique reservation wage.
    Exposed with raw scalars so degenerate cases (e.g. lam = 0) can be probed
    directly.
    """
    g_y = y + phi * max(z - y, 0.0) - T
    return g_y - b_z - (lam / r) * _gain_above(y, z, phi, F)


def reservation_exogenous(z, policy, prim, F, f_tol=1e-12):
    """Reservation wage at previous wage z under exogenous offer arrival."""
    if prim.mode is not SearchMode.EXOGENOUS_ARRIVAL:
        raise ModelError("reservation_exogenous requires exogenous-arrival mode")
    b_z = policy.b(z)

    def f(y):
        return acceptance_residual_exogenous(y, z, b_z, policy.T, policy.phi,
                                             prim.lambda_bar, prim.r, F)

    flo = f(F.lo)
    fhi = f(F.hi)
    if flo >= 0.0:
        raise ReservationOutOfSupport(
            f"reservation wage at or below offer support (z={z:.6g}, "
            f"residual at lo = {flo:.3e})", z=z)
    if fhi <= 0.0:
        raise ReservationOutOfSupport(
            f"reservation wage at or above offer support (z={z:.6g}, "
            f"residual at hi = {fhi:.3e})", z=z)
    return bracket_root(f, F.lo, F.hi, f_tol=f_tol, fa=flo, fb=fhi)


def solve_x0(policy, prim, F, f_tol=1e-12):
    """Acceptance wage with the insurance shut off: the pooling threshold.

    Root of x - T - b - R(E[(w - x)_+] / r); may lie outside the offer support
    and is returned as-is in that case.
    """
    if prim.mode is not SearchMode.ENDOGENOUS_SEARCH:
        raise ModelError("solve_x0 requires endogenous-search mode")
    if not policy.b.is_constant:
        raise ModelError("endogenous-search mode requires a constant benefit")
    b0 = policy.b.value

    def g(x):
        surplus = F.upper_partial_moment(x, 1) / prim.r
        return x - policy.T - b0 - search_return(surplus, prim)[0]

    lo = policy.T + b0
    if lo >= F.hi:
        return lo  # no acceptable offers: the search return vanishes exactly
    hi = max(F.hi, lo) + 1.0
    glo = g(lo)
    ghi = g(hi)
    if glo > 0.0 or ghi < 0.0:
        raise BracketError(
            f"x0 bracket failed: g({lo:.6g})={glo:.3e}, g({hi:.6g})={ghi:.3e}",
            trace=[(lo, glo), (hi, ghi)])
    return bracket_root(g, lo, hi, f_tol=f_tol, fa=glo, fb=ghi)


def reservation_endogenous(z, policy, prim, F, x0, f_tol=1e-12):
    """Reservation wage at previous wage z with endogenous search effort.

    Below the pooling threshold the insurance cannot bind and the threshold
    itself is returned without solving; above it the root of the
    stay-versus-search residual is strictly below z.
    """
    if prim.mode is not SearchMode.ENDOGENOUS_SEARCH:
        raise ModelError("reservation_endogenous requires endogenous-search mode")
    if z <= x0:
        return x0
    b0 = policy.b.value
    phi = policy.phi

    def omega(x):
        g_x = x + phi * max(z - x, 0.0) - policy.T
        surplus = _gain_above(x, z, phi, F) / prim.r
        return g_x - b0 - search_return(surplus, prim)[0]

    f_hi = omega(z)
    if f_hi <= 0.0:
        # only reachable when z sits within rounding of x0
        if z - x0 < 1e-9:
            return x0
        raise ModelError(f"stay-search residual not positive at z={z:.6g}")
    f_lo = omega(F.lo)
    if f_lo >= 0.0:
        raise ReservationOutOfSupport(
            f"reservation wage at or below offer support (z={z:.6g}, "
            f"residual at lo = {f_lo:.3e})", z=z)
    root = bracket_root(omega, F.lo, z, f_tol=f_tol, fa=f_lo, fb=f_hi)
    return min(root, z)


def surplus_and_effort(z, w_res, policy, prim, F):
    """Search surplus S and effort at previous wage z given the reservation wage."""
    s = _gain_above(w_res, z, policy.phi, F) / prim.r
    if prim.mode is SearchMode.EXOGENOUS_ARRIVAL:
        return s, prim.lambda_bar
    return s, search_return(s, prim)[1]


def lemma_slopes(z, w_res, lam, phi, r, F):
    """Analytic d(w_res)/dz and dS/dz on the active region, from raw inputs."""
    survival_res = F.upper_partial_moment(w_res, 0)
    survival_z = F.upper_partial_moment(z, 0)
    denom = r * (1.0 - phi) + lam * (1.0 - phi) * survival_res
    dw = -(lam * phi * survival_z + r * phi) / denom
    ds = (1.0 - phi) * phi * (survival_res - survival_z) / denom
    return dw, ds


def analytic_derivatives(z, sol, policy, prim, F):
    """Slopes of the reservation wage and surplus in z on the active region.

    Only defined for z above the pooling threshold (both slopes are zero below
    it, handled by the pooling branch, so calling here with z <= x0 is an
    error).  Returns (dw_res, dS); the lemma guarantees dw_res < 0 and dS > 0
    strictly whenever phi > 0.
    """
    if prim.mode is not SearchMode.ENDOGENOUS_SEARCH:
        raise ModelError("analytic_derivatives requires endogenous-search mode")
    if z <= sol.x0:
        raise ValueError(f"z={z:.6g} is in the pooling region (x0={sol.x0:.6g}); "
                         "derivatives there are identically zero")
    w = sol.w_res_at(z)
    lam = sol.effort_at(z)
    return lemma_slopes(z, w, lam, policy.phi, prim.r, F)


@dataclass(frozen=True)
class WISolution:
    """Solved tables over the previous-wage grid, plus the pooling threshold.

    In exogenous mode x0 holds the common reservation wage when phi = 0 and the
    benefit is constant, and NaN otherwise.
    """

    z_grid: np.ndarray
    w_res: np.ndarray
    surplus: np.ndarray
    effort: np.ndarray
    value: np.ndarray
    x0: float

    def __post_init__(self):
        for name in ("z_grid", "w_res", "surplus", "effort", "value"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.z_grid) <= 0.0):
            raise ValueError("z_grid must be strictly increasing")

    def _interp(self, name):
        cache = self.__dict__.setdefault("_interp_cache", {})
        if name not in cache:
            cache[name] = PchipInterpolator(self.z_grid, getattr(self, name),
                                            extrapolate=True)
        return cache[name]

    def w_res_at(self, z):
        out = self._interp("w_res")(z)
        return float(out) if np.ndim(z) == 0 else out

    def surplus_at(self, z):
        out = self._interp("surplus")(z)
        return float(out) if np.ndim(z) == 0 else out

    def effort_at(self, z):
        out = self._interp("effort")(z)
        return float(out) if np.ndim(z) == 0 else out

    def value_at(self, z):
        out = self._interp("value")(z)
        return float(out) if np.ndim(z) == 0 else out

    def to_dict(self):
        return {"x0": None if math.isnan(self.x0) else self.x0,
                "z_grid": self.z_grid.tolist(),
                "w_res": self.w_res.tolist(),
                "surplus": self.surplus.tolist(),
                "effort": self.effort.tolist(),
                "value": self.value.tolist()}


def _gain_above_vec(x, z, phi, F):
    """Vectorized acceptance gain; x and z aligned arrays."""
    u1x = F.upper_partial_moment(x, 1)
    if phi == 0.0:
        return u1x
    u1z = F.upper_partial_moment(z, 1)
    return np.where(x < z, (1.0 - phi) * u1x + phi * u1z, u1x)


def _batch_reservations(z_grid, policy, prim, F, x0, f_tol):
    """Solve all grid reservation wages at once with the batched root solver.

    Row semantics are identical to the scalar solvers; only the iteration is
    shared across rows.
    """
    phi = policy.phi
    T = policy.T
    b_vals = np.broadcast_to(np.asarray(policy.b(z_grid), dtype=float), z_grid.shape)
    endogenous = prim.mode is SearchMode.ENDOGENOUS_SEARCH

    if endogenous:
        rows = z_grid > x0
        z = z_grid[rows]
        b_rows = b_vals[rows]
        hi = z.copy()
    else:
        rows = np.ones(z_grid.shape, dtype=bool)
        z = z_grid
        b_rows = b_vals
        hi = np.full(z.shape, F.hi)

    def residual(y, idx):
        zz = z[idx] if idx is not None else z
        bb = b_rows[idx] if idx is not None else b_rows
        g = y + phi * np.maximum(zz - y, 0.0) - T
        gain = _gain_above_vec(y, zz, phi, F)
        if endogenous:
            ret, _ = search_return(gain / prim.r, prim)
            return g - bb - ret
        return g - bb - (prim.lambda_bar / prim.r) * gain

    w = np.full(z_grid.shape, x0 if endogenous else math.nan)
    if z.size:
        lo = np.full(z.shape, F.lo)
        flo = residual(lo, None)
        fhi = residual(hi, None)
        if np.any(flo >= 0.0):
            bad = int(np.argmax(flo >= 0.0))
            raise ReservationOutOfSupport(
                f"reservation wage at or below offer support (z={z[bad]:.6g}, "
                f"residual at lo = {flo[bad]:.3e})", z=z[bad])
        if endogenous:
            # omega(z) > 0 is guaranteed up to rounding right at the threshold
            at_edge = fhi <= 0.0
            if np.any(at_edge & (z - x0 >= 1e-9)):
                bad = int(np.argmax(at_edge & (z - x0 >= 1e-9)))
                raise ModelError(f"stay-search residual not positive at z={z[bad]:.6g}")
            fhi = np.where(at_edge, np.abs(fhi) + 1e-300, fhi)
        elif np.any(fhi <= 0.0):
            bad = int(np.argmax(fhi <= 0.0))
            raise ReservationOutOfSupport(
                f"reservation wage at or above offer support (z={z[bad]:.6g}, "
                f"residual at hi = {fhi[bad]:.3e})", z=z[bad])
        w[rows] = bracket_root_batch(residual, lo, hi, flo, fhi, f_tol=f_tol)
    return w


def solve_wi(policy, prim, F, H, n_grid=201, f_tol=1e-12):
    """Solve the wage-insurance economy on a uniform previous-wage grid.

    Parameters
    ----------
    policy : WIPolicy
    prim : Primitives
    F, H : DistributionSpec
        Offer and previous-wage distributions.
    n_grid : int
        Grid points over the support of H (at least 51).
    f_tol : float
        Residual tolerance for every scalar root solve.

    Returns
    -------
    WISolution

    Raises
    ------
    ReservationOutOfSupport
        If any reservation wage (including a pooled threshold) leaves the open
        support of F, with the offending z attached.
    """
    if n_grid < 51:
        raise ValueError("n_grid must be at least 51")
    if prim.mode is SearchMode.ENDOGENOUS_SEARCH and not policy.b.is_constant:
        raise ModelError("endogenous-search mode requires a constant benefit")
    z_grid = np.linspace(H.lo, H.hi, n_grid)

    if prim.mode is SearchMode.ENDOGENOUS_SEARCH:
        x0 = solve_x0(policy, prim, F, f_tol=f_tol)
        if not F.lo < x0 < F.hi:
            raise ReservationOutOfSupport(
                f"pooling threshold x0={x0:.6g} outside open offer support "
                f"({F.lo:.6g}, {F.hi:.6g})")
    else:
        x0 = math.nan
    w_res = _batch_reservations(z_grid, policy, prim, F, x0, f_tol)

    gain = _gain_above_vec(w_res, z_grid, policy.phi, F)
    surplus = gain / prim.r
    if prim.mode is SearchMode.ENDOGENOUS_SEARCH:
        _, effort = search_return(surplus, prim)
    else:
        effort = np.full(n_grid, prim.lambda_bar)
        if policy.phi == 0.0 and policy.b.is_constant:
            x0 = w_res[0]

    inside = (w_res > F.lo) & (w_res < F.hi)
    if not np.all(inside):
        bad = int(np.argmin(inside))
        raise ReservationOutOfSupport(
            f"reservation wage {w_res[bad]:.6g} outside open offer support at "
            f"z={z_grid[bad]:.6g}", z=z_grid[bad])

    value = consumption_wi(w_res, z_grid, policy) / prim.r
    return WISolution(z_grid, w_res, surplus, effort, value, x0)


def balance_wi_tax(b_schedule, phi, prim, F, H, n_grid=201, *,
                   budget_tol=1e-9, f_tol=1e-12):
    """Lump-sum tax on the employed that balances the wage-insurance budget.

    Re-solves the economy at each trial tax; the budget residual is continuous
    in T but not guaranteed monotone, so the bracket is grown geometrically
    before handing off to the safeguarded root solver.  Taxes at which some
    reservation wage leaves the offer support are infeasible; reservations move
    monotonically with T, so the feasible taxes form an interval and the
    expansion backs off from its edges.
    """
    from .welfare import budget_residual  # deferred: welfare builds on this module

    def residual(T):
        pol = WIPolicy(b_schedule, T, phi)
        sol = solve_wi(pol, prim, F, H, n_grid=n_grid, f_tol=f_tol)
        return budget_residual(sol, pol, prim, F, H)

    trace = []

    def probe(T):
        try:
            val = residual(T)
        except ReservationOutOfSupport:
            trace.append((T, math.nan))
            return None
        trace.append((T, val))
        return val

    scale = max(abs(float(np.max(b_schedule(np.linspace(H.lo, H.hi, 9))))), 0.1)
    limit = F.hi

    anchor = None
    for t0 in (0.0, 0.25 * scale, -0.25 * scale, scale, -scale, 2.0 * scale,
               -2.0 * scale, 0.5 * limit, -0.5 * limit):
        if abs(t0) > limit:
            continue
        val = probe(t0)
        if val is not None:
            anchor, f_anchor = t0, val
            break
    if anchor is None:
        raise BracketError("no feasible tax found while balancing the budget",
                           trace=trace)
    if abs(f_anchor) <= budget_tol:
        return anchor

    lo = hi = anchor
    flo = fhi = f_anchor
    step = 0.25 * scale
    for _ in range(200):
        if np.sign(flo) != np.sign(fhi):
            break
        grew = False
        for direction in (1.0, -1.0):
            edge = hi if direction > 0.0 else lo
            cand = min(max(edge + direction * step, -limit), limit)
            if cand == edge:
                continue
            val = probe(cand)
            while val is None and abs(cand - edge) > 1e-6 * scale:
                cand = 0.5 * (cand + edge)  # back off toward the feasible edge
                val = probe(cand)
            if val is None:
                continue
            grew = True
            if direction > 0.0:
                hi, fhi = cand, val
            else:
                lo, flo = cand, val
        if not grew:
            raise BracketError("budget residual has one sign on the feasible taxes",
                               trace=trace)
        step *= 2.0
    if np.sign(flo) == np.sign(fhi):
        raise BracketError("failed to bracket the balanced tax", trace=trace)
    return bracket_root(residual, lo, hi, f_tol=budget_tol, fa=flo, fb=fhi)

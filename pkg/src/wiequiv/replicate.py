"""Constructions of UI-only policies that replicate a wage-insurance economy.

Exogenous arrival: a previous-wage-contingent benefit plus a lump-sum tax on
the employed reproduces the reservation rule; the tax level follows from the
budget in closed form.  Endogenous search: a strictly increasing net
consumption schedule q(w) is built so the search surplus matches at every
reservation wage (an ODE in the previous wage on the active region, a quadratic
extension above the pooling threshold, a linear one below the lowest
reservation), the benefit schedule is recovered from the indifference
condition, and a level shift balances the budget.  `verify_replication`
re-solves the constructed economy from scratch and reports the deviations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.interpolate import PchipInterpolator

from .roots import bracket_root, sign_change_count
from .welfare import budget_residual, h_weights
from .wimodel import (ModelError, SearchMode, lemma_slopes, reservation_endogenous,
                      search_return, surplus_and_effort)

_SURVIVAL_FLOOR = 1e-12


class NonUniqueRoot(ModelError):
    """The re-solve objective changed sign more than once; nothing is picked."""


@dataclass(frozen=True)
class LumpSumTax:
    T_star: float

    def to_dict(self):
        return {"kind": "lump_sum", "T_star": self.T_star}


class ConsumptionSchedule:
    """Strictly increasing net consumption over wage offers, q(w) + shift.

    Stored as a monotone table interpolated with a monotone cubic; the local
    polynomial pieces are exposed so that differences q(y2) - q(y1) can be
    evaluated without the cancellation of two full-scale values.
    """

    def __init__(self, w, q, shift=0.0):
        w = np.ascontiguousarray(w, dtype=float)
        q = np.ascontiguousarray(q, dtype=float)
        if w.ndim != 1 or w.shape != q.shape or w.size < 4:
            raise ValueError("schedule needs matching 1-d tables with >= 4 knots")
        if np.any(np.diff(w) <= 0.0):
            raise ValueError("schedule wage knots must be strictly increasing")
        if np.any(np.diff(q) <= 0.0):
            raise ModelError("consumption table is not strictly increasing; "
                             "solver corruption")
        w.setflags(write=False)
        q.setflags(write=False)
        self.w = w
        self.q = q
        self.shift = float(shift)
        self._pp = PchipInterpolator(w, q, extrapolate=True)

    def with_shift(self, shift):
        return ConsumptionSchedule(self.w, self.q, shift=shift)

    def q_at(self, w):
        """Base schedule value (before the level shift)."""
        out = self._pp(w)
        return float(out) if np.ndim(w) == 0 else out

    def consumption_at(self, w):
        return self.q_at(w) + self.shift

    def tau_at(self, w):
        """Implied tax on the employed, w - q(w) - shift."""
        w = np.asarray(w, dtype=float) if np.ndim(w) else float(w)
        return w - self.q_at(w) - self.shift

    def derivative_at(self, w):
        out = self._pp.derivative()(w)
        return float(out) if np.ndim(w) == 0 else out

    def interval_of(self, y):
        k = int(np.searchsorted(self.w, y, side="right")) - 1
        return min(max(k, 0), self.w.size - 2)

    def local_increment(self, k, y):
        """q(y) - q(w[k]) from the local cubic on interval k, cancellation-free."""
        dy = np.asarray(y, dtype=float) - self.w[k]
        c = self._pp.c[:, k]
        out = ((c[0] * dy + c[1]) * dy + c[2]) * dy
        return float(out) if np.ndim(y) == 0 else out

    def to_dict(self):
        return {"kind": "schedule", "w": self.w.tolist(), "q": self.q.tolist(),
                "shift": self.shift}


class ScheduleIntegrals:
    """Quadrature tables for integrals of a consumption schedule against offers.

    Precomputes per-knot suffix integrals of q dF and of (q - q(knot)) dF so
    that the search surplus under the schedule can be evaluated at any
    reservation wage with one 32-node panel and no large-scale cancellation.
    """

    _NODES, _WEIGHTS = np.polynomial.legendre.leggauss(32)

    def __init__(self, schedule, F):
        if schedule.w[0] > F.lo + 1e-9 or schedule.w[-1] < F.hi - 1e-9:
            raise ValueError("schedule does not cover the offer support")
        self.schedule = schedule
        self.F = F
        w = schedule.w
        inner = w[(w > F.lo) & (w < F.hi)]
        self.breaks = np.concatenate(([F.lo], inner, [F.hi]))
        n_int = self.breaks.size - 1
        half = 0.5 * np.diff(self.breaks)
        mids = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        nodes = mids[:, None] + half[:, None] * self._NODES[None, :]
        pdf = F.pdf(nodes.ravel()).reshape(nodes.shape)
        qv = schedule.q_at(nodes.ravel()).reshape(nodes.shape)
        wts = half[:, None] * self._WEIGHTS[None, :] * pdf
        self._panel_q = np.einsum("ij,ij->i", wts, qv)          # integral of q dF per panel
        self.q_breaks = schedule.q_at(self.breaks)
        diff_per_panel = np.einsum("ij,ij->i", wts, qv - self.q_breaks[:-1, None])
        self.survival = F.upper_partial_moment(self.breaks, 0)
        # suffix integrals of q dF and of (q - q(break_i)) dF over [break_i, hi]
        self.suffix_q = np.zeros(n_int + 1)
        self.suffix_excess = np.zeros(n_int + 1)
        for i in range(n_int - 1, -1, -1):
            self.suffix_q[i] = self._panel_q[i] + self.suffix_q[i + 1]
            self.suffix_excess[i] = (diff_per_panel[i] + self.suffix_excess[i + 1]
                                     + (self.q_breaks[i + 1] - self.q_breaks[i])
                                     * self.survival[i + 1])

    def _interval(self, y):
        k = int(np.searchsorted(self.breaks, y, side="right")) - 1
        return min(max(k, 0), self.breaks.size - 2)

    def _local_panel(self, y, right, q_y_parts):
        # integral of (q - q(y)) dF over [y, right], all inside one knot interval
        if right - y <= 0.0:
            return 0.0
        half = 0.5 * (right - y)
        nodes = 0.5 * (y + right) + half * self._NODES
        k = self.schedule.interval_of(min(y, self.schedule.w[-2]))
        inc = self.schedule.local_increment(k, nodes) - q_y_parts[1]
        return half * float(np.dot(self._WEIGHTS, inc * self.F.pdf(nodes)))

    def _q_parts(self, y):
        # (anchor knot value, increment from that knot) so q(y) = sum of parts
        k = self.schedule.interval_of(y)
        return self.schedule.q[k], self.schedule.local_increment(k, y)

    def excess_above(self, y):
        """Integral of (q(w) - q(y)) dF(w) over [y, hi]."""
        if y >= self.F.hi:
            return 0.0
        y = max(y, self.F.lo)
        i = self._interval(y)
        parts = self._q_parts(y)
        m = i + 1
        local = self._local_panel(y, self.breaks[m], parts)
        dq = (self.q_breaks[m] - parts[0]) - parts[1]
        return max(local + self.suffix_excess[m] + dq * self.survival[m], 0.0)

    def surplus(self, y, r):
        """Search surplus under the schedule at reservation wage y."""
        return self.excess_above(y) / r

    def expected_q_above(self, y):
        """E[q(w) | w >= y], before the level shift; 0 when the tail is empty."""
        surv = self.F.upper_partial_moment(y, 0)
        if surv <= _SURVIVAL_FLOOR:
            return 0.0
        y = max(y, self.F.lo)
        i = self._interval(y)
        parts = self._q_parts(y)
        # integral of q dF over [y, break_{i+1}] via the excess plus q(y) * mass
        m = i + 1
        mass = self.survival[i] if y == self.breaks[i] else \
            self.F.upper_partial_moment(y, 0)
        local = self._local_panel(y, self.breaks[m], parts)
        g = local + (parts[0] + parts[1]) * (mass - self.survival[m]) \
            + self.suffix_q[m]
        return g / surv

    def reservation_objective(self, y, b_star, prim):
        """Stay-versus-search residual q(y) - b* - R(surplus(y)) at candidate y.

        Strictly increasing in y when q is; evaluated with a compensated sum so
        the poorly conditioned root at the pooling threshold is pinned as well
        as the stored policy allows.
        """
        q_knot, q_local = self._q_parts(y)
        s = self.excess_above(y) / prim.r
        ret, _ = search_return(s, prim)
        return math.fsum((q_knot, -ret, -b_star, q_local))


@dataclass(frozen=True)
class UIOnlyPolicy:
    """Replicating UI-only policy: benefit table plus either tax variant.

    For the schedule variant the worker's consumption on a job paying w is
    q(w) + shift and the benefit at previous wage z is b_star(z) + shift.
    """

    z_grid: np.ndarray
    b_star: np.ndarray
    tax: Union[LumpSumTax, ConsumptionSchedule]

    def __post_init__(self):
        for name in ("z_grid", "b_star"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def kind(self):
        return "ui_lump_sum" if isinstance(self.tax, LumpSumTax) else "ui_schedule"

    def _b_interp(self):
        cache = self.__dict__
        if "_b_pchip" not in cache:
            cache["_b_pchip"] = PchipInterpolator(self.z_grid, self.b_star,
                                                  extrapolate=True)
        return cache["_b_pchip"]

    def base_benefit_at(self, z):
        out = self._b_interp()(z)
        return float(out) if np.ndim(z) == 0 else out

    def benefit_at(self, z):
        shift = self.tax.shift if isinstance(self.tax, ConsumptionSchedule) else 0.0
        return self.base_benefit_at(z) + shift

    def consumption_at(self, w):
        if isinstance(self.tax, LumpSumTax):
            return np.asarray(w, dtype=float) - self.tax.T_star if np.ndim(w) \
                else float(w) - self.tax.T_star
        return self.tax.consumption_at(w)

    def integrals(self, F):
        """Cached ScheduleIntegrals for the given offer distribution."""
        if not isinstance(self.tax, ConsumptionSchedule):
            raise ModelError("integrals are only defined for the schedule variant")
        cache = self.__dict__.setdefault("_integrals_cache", {})
        if F not in cache:
            cache[F] = ScheduleIntegrals(self.tax, F)
        return cache[F]

    def expected_consumption_above(self, w_res, F):
        """E[consumption | w >= w_res] per grid point (vectorized)."""
        w_res = np.atleast_1d(np.asarray(w_res, dtype=float))
        if isinstance(self.tax, LumpSumTax):
            surv = F.upper_partial_moment(w_res, 0)
            ok = surv > _SURVIVAL_FLOOR
            excess = F.upper_partial_moment(w_res, 1)
            return np.where(ok, w_res + excess / np.where(ok, surv, 1.0)
                            - self.tax.T_star, 0.0)
        integ = self.integrals(F)
        out = np.array([integ.expected_q_above(y) for y in w_res])
        return np.where(out != 0.0, out + self.tax.shift, 0.0)

    def to_dict(self):
        return {"z_grid": self.z_grid.tolist(), "b_star": self.b_star.tolist(),
                "tax": self.tax.to_dict()}


# ----------------------------------------------------------------------
# proposition-1 construction (exogenous arrival)
# ----------------------------------------------------------------------
def k_values(w_res, lam, r, F):
    """Benefit gross of the lump-sum tax that reproduces each reservation wage."""
    w_res = np.asarray(w_res, dtype=float)
    return w_res - (lam / r) * F.upper_partial_moment(w_res, 1)


def construct_ui_exogenous(sol, prim, F, H):
    """Benefit table and budget-balancing lump-sum tax replicating `sol`."""
    if prim.mode is not SearchMode.EXOGENOUS_ARRIVAL:
        raise ModelError("construct_ui_exogenous requires exogenous-arrival mode")
    lam = prim.lambda_bar
    k = k_values(sol.w_res, lam, prim.r, F)
    alpha = lam * F.upper_partial_moment(sol.w_res, 0)
    hw = h_weights(H, sol.z_grid)
    t_star = prim.r * float(np.dot(hw, k / (alpha + prim.r))) / float(np.sum(hw))
    return UIOnlyPolicy(sol.z_grid, k - t_star, LumpSumTax(t_star))


# ----------------------------------------------------------------------
# proposition-2 construction (endogenous search)
# ----------------------------------------------------------------------
def pool_extension_coefficient(F, x0):
    """Quadratic coefficient matching the expected excess above the threshold."""
    m1 = F.upper_partial_moment(x0, 1)
    m2 = F.upper_partial_moment(x0, 2)
    if m2 <= 0.0:
        raise ModelError("no offer mass above the pooling threshold")
    return m1 / m2


def construct_consumption_schedule(sol, policy, prim, F, n_w=2001):
    """Net consumption schedule matching the search surplus at every type.

    On the active region the schedule value at the reservation wage follows the
    exact slope d q(w_res(z)) / dz = -r S'(z) / (1 - F(w_res(z))), integrated
    with Simpson steps over the grid (the right-hand side does not depend on
    the state, so the fourth-order step is a quadrature); above the pooling
    threshold a quadratic extension matches the expected excess; below the
    lowest reservation wage a linear piece keeps the slope continuous.  The
    anchor q(x0) = x0 - T makes the budget shift vanish as phi goes to 0.
    """
    if prim.mode is not SearchMode.ENDOGENOUS_SEARCH:
        raise ModelError("construct_consumption_schedule requires endogenous mode")
    x0 = sol.x0
    if not F.lo < x0 < F.hi:
        raise ModelError(f"pooling threshold x0={x0:.6g} not inside offer support")
    r = prim.r
    anchor = x0 - policy.T
    active_z = sol.z_grid[sol.z_grid > x0 + 1e-7]

    if policy.phi == 0.0 or active_z.size == 0:
        # insurance never binds (everyone pools at x0, so z -> w_res is not
        # invertible); the identity schedule replicates the input economy
        # exactly and satisfies the matching condition
        w = np.linspace(F.lo, F.hi, max(n_w, 4))
        return ConsumptionSchedule(w, w - policy.T)

    def slope_data(zv):
        w = x0 if zv <= x0 else reservation_endogenous(zv, policy, prim, F, x0)
        _, lam = surplus_and_effort(zv, w, policy, prim, F)
        dw, ds = lemma_slopes(zv, w, lam, policy.phi, r, F)
        return w, dw, -r * ds / F.upper_partial_moment(w, 0)

    # cluster extra nodes quadratically toward the junction: the schedule levels
    # off there (q' -> 0) and uniform knots interpolate that region poorly
    gap = active_z[0] - x0
    extras = x0 + gap * (np.arange(1, 16) / 16.0) ** 2
    za = np.concatenate(([x0], extras, active_z))
    w_nodes = np.array([slope_data(zv)[0] for zv in za])

    # refine in z until the image under z -> w_res resolves the wage axis; the
    # reservation wage moves several times faster than z once phi is large
    w_target = (F.hi - F.lo) / max(n_w - 1, 1000)
    for _ in range(4):
        coarse = np.abs(np.diff(w_nodes)) > w_target
        if not coarse.any():
            break
        mids = 0.5 * (za[:-1] + za[1:])[coarse]
        w_mids = np.array([slope_data(zv)[0] for zv in mids])
        order = np.argsort(np.concatenate((za, mids)))
        za = np.concatenate((za, mids))[order]
        w_nodes = np.concatenate((w_nodes, w_mids))[order]

    rhs_nodes = np.empty(za.size)
    dw_last = None
    for i, zv in enumerate(za):
        _, dw, rhs_nodes[i] = slope_data(zv)
        dw_last = dw
    q_nodes = np.empty(za.size)
    q_nodes[0] = anchor
    for i in range(za.size - 1):
        h = za[i + 1] - za[i]
        rhs_mid = slope_data(0.5 * (za[i] + za[i + 1]))[2]
        q_nodes[i + 1] = q_nodes[i] + (h / 6.0) * (rhs_nodes[i] + 4.0 * rhs_mid
                                                   + rhs_nodes[i + 1])

    # map back through the decreasing bijection z -> w_res(z)
    w_active = w_nodes[::-1]
    q_active = q_nodes[::-1]

    pieces_w = [w_active]
    pieces_q = [q_active]
    if w_active[0] > F.lo:
        slope_below = rhs_nodes[-1] / dw_last  # q'(w_res(z_max)), positive
        w_below = np.linspace(F.lo, w_active[0], 17)[:-1]
        pieces_w.insert(0, w_below)
        pieces_q.insert(0, q_active[0] + slope_below * (w_below - w_active[0]))

    c = pool_extension_coefficient(F, x0)
    n_pool = max(101, n_w - w_active.size - 16)
    t = np.linspace(0.0, 1.0, n_pool)[1:]
    w_pool = x0 + (F.hi - x0) * t * t  # clustered toward the flat junction
    pieces_w.append(w_pool)
    pieces_q.append(anchor + c * (w_pool - x0) ** 2)

    return ConsumptionSchedule(np.concatenate(pieces_w), np.concatenate(pieces_q))


def construct_benefits_endogenous(schedule, sol, prim, F):
    """Benefit table recovered from indifference under the constructed schedule."""
    integ = ScheduleIntegrals(schedule, F)
    b_star = np.empty(sol.z_grid.size)
    for k, w in enumerate(sol.w_res):
        s = integ.surplus(w, prim.r)
        ret, _ = search_return(s, prim)
        b_star[k] = schedule.q_at(w) - ret
    return b_star


def balance_budget_shift(policy, sol, prim, F, H):
    """Level shift C on (benefits, -taxes) that balances the budget.

    The residual is linear in the shift with slope -1/r per unit of prior mass,
    so the balanced level follows in closed form from one evaluation.  Returns
    the total shift; a policy that is already balanced maps to its own.
    """
    if not isinstance(policy.tax, ConsumptionSchedule):
        raise ModelError("balance_budget_shift applies to the schedule variant")
    hw = h_weights(H, sol.z_grid)
    alpha = sol.effort * F.upper_partial_moment(sol.w_res, 0)
    if np.all(alpha <= 0.0):
        raise ModelError("degenerate economy: nobody is ever employed")
    residual0 = budget_residual(sol, policy, prim, F, H)
    return policy.tax.shift + prim.r * residual0 / float(np.sum(hw))


def replicate_policy(sol, policy, prim, F, H, n_w=2001):
    """Build the full replicating UI-only policy for either search mode."""
    if prim.mode is SearchMode.EXOGENOUS_ARRIVAL:
        return construct_ui_exogenous(sol, prim, F, H)
    schedule = construct_consumption_schedule(sol, policy, prim, F, n_w=n_w)
    b_star = construct_benefits_endogenous(schedule, sol, prim, F)
    ui = UIOnlyPolicy(sol.z_grid, b_star, schedule)
    shift = balance_budget_shift(ui, sol, prim, F, H)
    return UIOnlyPolicy(sol.z_grid, b_star, schedule.with_shift(shift))


def surplus_match_residuals(ui_policy, sol, prim, F):
    """Audit |integral of (q - q(w_res))/r dF - S| at every grid point."""
    integ = ui_policy.integrals(F)
    out = np.empty(sol.z_grid.size)
    for k, w in enumerate(sol.w_res):
        out[k] = abs(integ.surplus(w, prim.r) - sol.surplus[k])
    return out


# ----------------------------------------------------------------------
# from-scratch verification
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class VerificationReport:
    mode: str
    max_reservation_dev: float
    max_effort_dev: float
    bracket_margin: float
    w_res_ui: np.ndarray
    effort_ui: np.ndarray

    def to_dict(self):
        return {"mode": self.mode,
                "max_reservation_dev": self.max_reservation_dev,
                "max_effort_dev": None if math.isnan(self.max_effort_dev)
                else self.max_effort_dev,
                "bracket_margin": self.bracket_margin}


def _refine_from_scan(f, grid, values, z):
    changes = sign_change_count(values)
    if changes > 1:
        raise NonUniqueRoot(
            f"objective changes sign {changes} times at z={z:.6g}; the re-solve "
            "root is not unique")
    signs = np.sign(values)
    idx = np.nonzero(np.diff(signs) != 0.0)[0]
    if idx.size == 0:
        exact = np.nonzero(signs == 0.0)[0]
        if exact.size:
            return float(grid[exact[0]])
        raise ModelError(f"no sign change of the re-solve objective at z={z:.6g}")
    i = int(idx[0])
    span = grid[-1] - grid[0]
    return bracket_root(f, grid[i], grid[i + 1], f_tol=0.0, x_tol=1e-15 * span,
                        fa=values[i], fb=values[i + 1])


def verify_replication(ui_policy, sol, prim, F, H, scan_points=101):
    """Re-solve the UI-only economy from scratch at every grid z.

    Scans the indifference objective over the offer support (guarding the
    uniqueness argument and recording the monotonicity margin), refines the
    bracketed root to machine width, and reports the worst reservation-wage and
    effort deviations from the wage-insurance solution.
    """
    grid = np.linspace(F.lo, F.hi, scan_points)
    n = sol.z_grid.size
    w_ui = np.empty(n)
    eff_ui = np.empty(n)
    margin = np.inf

    if isinstance(ui_policy.tax, LumpSumTax):
        t_star = ui_policy.tax.T_star
        lam = prim.lambda_bar
        u1_grid = F.upper_partial_moment(grid, 1)
        for k, z in enumerate(sol.z_grid):
            b_z = ui_policy.b_star[k]

            def f(y, b_z=b_z):
                return y - t_star - b_z - (lam / prim.r) * F.upper_partial_moment(y, 1)

            values = grid - t_star - b_z - (lam / prim.r) * u1_grid
            margin = min(margin, float(np.min(np.diff(values))))
            w_ui[k] = _refine_from_scan(f, grid, values, z)
            eff_ui[k] = lam
        max_eff = float("nan")
    else:
        integ = ui_policy.integrals(F)
        for k, z in enumerate(sol.z_grid):
            b_z = ui_policy.b_star[k]

            def f(y, b_z=b_z):
                return integ.reservation_objective(y, b_z, prim)

            values = np.array([f(y) for y in grid])
            margin = min(margin, float(np.min(np.diff(values))))
            w_ui[k] = _refine_from_scan(f, grid, values, z)
            eff_ui[k] = search_return(integ.surplus(w_ui[k], prim.r), prim)[1]
        max_eff = float(np.max(np.abs(eff_ui - sol.effort)))

    return VerificationReport(
        mode=ui_policy.kind,
        max_reservation_dev=float(np.max(np.abs(w_ui - sol.w_res))),
        max_effort_dev=max_eff,
        bracket_margin=margin,
        w_res_ui=w_ui,
        effort_ui=eff_ui,
    )

"""Ex-ante welfare and government-budget accounting.

The time dimension collapses analytically: with acceptance hazard alpha and
discount rate r, the present-value weight on flow benefits while unemployed is
1/(alpha + r) and the weight on the employment continuation value is
alpha/(alpha + r).  Everything here is a map over the previous-wage grid
followed by a fixed composite quadrature against the prior density, so
identities that hold pointwise in z (budget substitution, welfare equivalence)
survive discretization exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .wimodel import SearchMode, WIPolicy

_SURVIVAL_FLOOR = 1e-12


def composite_weights(x):
    """Composite Simpson weights on an ordered grid (3/8 rule patches odd tails)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 5:
        raise ValueError("composite quadrature needs at least 5 nodes")
    if np.any(np.diff(x) <= 0.0):
        raise ValueError("quadrature grid must be strictly increasing")
    h = x[1] - x[0]
    if not np.allclose(np.diff(x), h, rtol=1e-10, atol=0.0):
        raise ValueError("quadrature grid must be uniform")
    w = np.zeros(n)
    if n % 2 == 1:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
    else:
        m = n - 4  # Simpson on x[0..m] (even interval count), 3/8 on the last 3
        w[0] = w[m] = 1.0
        w[1:m:2] = 4.0
        w[2:m:2] = 2.0
        w *= h / 3.0
        w[m:] += np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * h / 8.0)
    return w


def h_weights(H, z_grid):
    """Quadrature weights for integrals against the prior-wage density."""
    pdf = H.pdf(z_grid)
    if not np.all(np.isfinite(pdf)):
        raise ValueError("prior density is unbounded on the grid; this quadrature "
                         "cannot integrate endpoint-singular priors")
    return composite_weights(z_grid) * pdf


def pv_weights(alpha, r):
    """Present-value weights (unemployed flow, employment value) for hazard alpha.

    Closed forms of the collapsed time integrals: u = 1/(alpha + r) and
    e = alpha/(alpha + r), computed as 1 - r*u so the identity r*u + e = 1
    holds exactly in floating point.
    """
    alpha = np.asarray(alpha, dtype=float) if np.ndim(alpha) else float(alpha)
    u = 1.0 / (alpha + r)
    e = 1.0 - r * u
    return u, e


def acceptance_rate(z, sol, F):
    """Hazard of moving into an accepted job: effort times offer survival."""
    return sol.effort_at(z) * F.upper_partial_moment(sol.w_res_at(z), 0)


def _conditional_moments(sol, F):
    """Per-grid survival at the reservation wage and E[w | accepted]."""
    survival = F.upper_partial_moment(sol.w_res, 0)
    excess = F.upper_partial_moment(sol.w_res, 1)
    ok = survival > _SURVIVAL_FLOOR
    e_wage = np.where(ok, sol.w_res + excess / np.where(ok, survival, 1.0), 0.0)
    return survival, e_wage, ok


def _expected_top_up(sol, F, survival, ok):
    # E[(z - w)_+ | w >= w_res]; zero once the reservation wage reaches z
    z = sol.z_grid
    w = sol.w_res
    gap = (z - w) * survival - F.upper_partial_moment(w, 1) + F.upper_partial_moment(z, 1)
    out = np.where((w < z) & ok, gap / np.where(ok, survival, 1.0), 0.0)
    return np.maximum(out, 0.0)


def _per_z_terms(sol, policy, prim, F):
    """Benefit flow, conditional consumption/receipts, hazard, and search cost."""
    from .replicate import UIOnlyPolicy  # deferred: replicate builds on this module

    survival, e_wage, ok = _conditional_moments(sol, F)
    alpha = sol.effort * survival
    alpha = np.where(ok, alpha, 0.0)
    if prim.mode is SearchMode.ENDOGENOUS_SEARCH:
        psi_cost = prim.psi(sol.effort)
    else:
        psi_cost = np.zeros_like(alpha)

    if isinstance(policy, WIPolicy):
        benefit = np.asarray(policy.b(sol.z_grid), dtype=float)
        top_up = _expected_top_up(sol, F, survival, ok)
        e_cons = np.where(ok, e_wage + policy.phi * top_up - policy.T, 0.0)
    elif isinstance(policy, UIOnlyPolicy):
        benefit = policy.benefit_at(sol.z_grid)
        e_cons = np.where(ok, policy.expected_consumption_above(sol.w_res, F), 0.0)
    else:
        raise TypeError(f"unsupported policy type {type(policy).__name__}")
    e_receipts = np.where(ok, e_wage - e_cons, 0.0)
    return {"alpha": alpha, "benefit": benefit, "e_cons": e_cons,
            "e_receipts": e_receipts, "e_wage": e_wage, "psi_cost": psi_cost}


def exante_welfare(sol, policy, prim, F, H, form="direct"):
    """Date-0 expected discounted utility under the given policy.

    `form="direct"` accumulates benefit flows net of search costs plus the
    discounted consumption annuity; `form="concise"` uses the
    budget-substituted gross-wage expression.  The two agree for
    budget-balanced policies, which is a test, not an assumption.
    """
    terms = _per_z_terms(sol, policy, prim, F)
    u, e = pv_weights(terms["alpha"], prim.r)
    if form == "direct":
        integrand = u * (terms["benefit"] - terms["psi_cost"]) \
            + e * terms["e_cons"] / prim.r
    elif form == "concise":
        integrand = e * terms["e_wage"] / prim.r - u * terms["psi_cost"]
    else:
        raise ValueError(f"unknown welfare form {form!r}")
    return float(np.dot(h_weights(H, sol.z_grid), integrand))


def budget_residual(sol, policy, prim, F, H):
    """Expected present value of receipts minus outlays; zero means balanced."""
    terms = _per_z_terms(sol, policy, prim, F)
    u, e = pv_weights(terms["alpha"], prim.r)
    integrand = -u * terms["benefit"] + e * terms["e_receipts"] / prim.r
    return float(np.dot(h_weights(H, sol.z_grid), integrand))


@dataclass(frozen=True)
class WelfareReport:
    """Welfare, budget residual, and the per-type table behind both."""

    mode: str
    welfare: float
    welfare_concise: float
    budget: float
    z_grid: np.ndarray
    alpha: np.ndarray
    w_res: np.ndarray
    benefit: np.ndarray
    expected_receipts: np.ndarray
    welfare_contrib: np.ndarray

    def to_dict(self):
        return {"mode": self.mode, "welfare": self.welfare,
                "welfare_concise": self.welfare_concise, "budget_residual": self.budget,
                "per_z": {"z": self.z_grid.tolist(), "alpha": self.alpha.tolist(),
                          "w_res": self.w_res.tolist(), "benefit": self.benefit.tolist(),
                          "expected_receipts": self.expected_receipts.tolist(),
                          "welfare_contrib": self.welfare_contrib.tolist()}}

    def per_z_csv(self):
        """The per-type table as CSV text (full double precision)."""
        header = "z,alpha,w_res,benefit,expected_receipts,welfare_contrib"
        cols = (self.z_grid, self.alpha, self.w_res, self.benefit,
                self.expected_receipts, self.welfare_contrib)
        lines = [header]
        lines.extend(",".join(f"{v:.17g}" for v in row) for row in zip(*cols))
        return "\n".join(lines) + "\n"


def welfare_report(sol, policy, prim, F, H):
    """Bundle welfare (both forms), budget residual, and the per-z table."""
    from .replicate import UIOnlyPolicy

    terms = _per_z_terms(sol, policy, prim, F)
    u, e = pv_weights(terms["alpha"], prim.r)
    direct = u * (terms["benefit"] - terms["psi_cost"]) + e * terms["e_cons"] / prim.r
    concise = e * terms["e_wage"] / prim.r - u * terms["psi_cost"]
    budget = -u * terms["benefit"] + e * terms["e_receipts"] / prim.r
    hw = h_weights(H, sol.z_grid)
    if isinstance(policy, WIPolicy):
        mode = "wi"
    elif isinstance(policy, UIOnlyPolicy):
        mode = policy.kind
    else:
        raise TypeError(f"unsupported policy type {type(policy).__name__}")
    report = WelfareReport(
        mode=mode,
        welfare=float(np.dot(hw, direct)),
        welfare_concise=float(np.dot(hw, concise)),
        budget=float(np.dot(hw, budget)),
        z_grid=sol.z_grid,
        alpha=terms["alpha"],
        w_res=sol.w_res,
        benefit=np.broadcast_to(terms["benefit"], sol.z_grid.shape).copy(),
        expected_receipts=terms["e_receipts"],
        welfare_contrib=direct,
    )
    if not np.isfinite(report.welfare):
        raise ValueError("welfare is not finite; check the policy and grids")
    return report

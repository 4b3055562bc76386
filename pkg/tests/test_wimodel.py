import math

import numpy as np
import pytest
from scipy.optimize import brentq

import wiequiv as wq
from wiequiv.wimodel import acceptance_residual_exogenous, lemma_slopes

UNI = wq.DistributionSpec.uniform(0.0, 1.0)


def exo_prim(r=1.0, lam=1.0):
    return wq.Primitives(r=r, mode=wq.SearchMode.EXOGENOUS_ARRIVAL, lambda_bar=lam)


def endo_prim(r=1.0, kappa=1.0, eta=1.0):
    return wq.Primitives(r=r, mode=wq.SearchMode.ENDOGENOUS_SEARCH,
                         kappa=kappa, eta=eta)


def policy(b=0.0, T=0.0, phi=0.0):
    return wq.WIPolicy(wq.BenefitSchedule.constant(b), T, phi)


# ----------------------------------------------------------------------
# types and primitives
# ----------------------------------------------------------------------
def test_primitives_validation():
    with pytest.raises(ValueError):
        wq.Primitives(r=0.0, mode=wq.SearchMode.EXOGENOUS_ARRIVAL, lambda_bar=1.0)
    with pytest.raises(ValueError):
        wq.Primitives(r=1.0, mode=wq.SearchMode.EXOGENOUS_ARRIVAL, lambda_bar=0.0)
    with pytest.raises(ValueError):
        wq.Primitives(r=1.0, mode=wq.SearchMode.ENDOGENOUS_SEARCH, lambda_bar=0.5)
    with pytest.raises(ValueError):
        wq.Primitives(r=1.0, mode=wq.SearchMode.ENDOGENOUS_SEARCH, kappa=-1.0)


def test_policy_phi_cap():
    with pytest.raises(ValueError, match=r"phi must lie in \[0, 0.99\]"):
        policy(phi=1.0)
    policy(phi=0.99)  # boundary allowed


def test_benefit_schedules():
    const = wq.BenefitSchedule.constant(0.4)
    assert const(1.7) == 0.4
    aff = wq.BenefitSchedule.affine(0.1, 0.2)
    assert aff(2.0) == pytest.approx(0.5)
    tab = wq.BenefitSchedule.table([0.0, 1.0, 2.0], [0.1, 0.3, 0.35])
    assert tab(1.0) == pytest.approx(0.3)
    assert not tab.is_constant
    again = wq.BenefitSchedule.from_dict(tab.to_dict())
    assert again(1.5) == pytest.approx(tab(1.5))


def test_consumption_examples():
    assert wq.consumption_wi(2.0, 3.0, policy(phi=0.5, T=0.1)) == pytest.approx(2.4)
    assert wq.consumption_wi(4.0, 3.0, policy(phi=0.5, T=0.1)) == pytest.approx(3.9)
    assert wq.consumption_wi(2.0, 3.0, policy(phi=0.0, T=0.0)) == 2.0


def test_search_return_examples():
    prim = endo_prim(kappa=1.0, eta=1.0)
    ret, lam = wq.search_return(2.0, prim)
    assert (ret, lam) == (2.0, 2.0)
    assert wq.search_return(0.0, prim) == (0.0, 0.0)
    ret, lam = wq.search_return(2.0, endo_prim(kappa=2.0, eta=1.0))
    assert (ret, lam) == (1.0, 1.0)
    with pytest.raises(ValueError):
        wq.search_return(-0.1, prim)


def test_psi_convexity():
    prim = endo_prim(kappa=0.7, eta=1.5)
    lam = np.linspace(0.01, 3.0, 50)
    d2 = np.diff(prim.psi(lam), 2)
    assert np.all(d2 > 0.0)


# ----------------------------------------------------------------------
# exogenous reservation wages
# ----------------------------------------------------------------------
def test_acceptance_residual_degenerate_no_offers():
    # with no arrivals the indifference point is benefits plus tax
    root = bracket_root_on_residual(z=0.8, b=0.4, T=0.1, phi=0.0, lam=0.0, r=1.0)
    assert root == pytest.approx(0.5, abs=1e-12)


def test_acceptance_residual_insured_branch():
    root = bracket_root_on_residual(z=0.6, b=0.4, T=0.0, phi=0.5, lam=0.0, r=1.0)
    assert root == pytest.approx(0.2, abs=1e-12)


def bracket_root_on_residual(z, b, T, phi, lam, r):
    f = lambda y: acceptance_residual_exogenous(y, z, b, T, phi, lam, r, UNI)
    return wq.bracket_root(f, UNI.lo, UNI.hi, f_tol=1e-14)


def test_reservation_exogenous_closed_form():
    # lam = r = 1, phi = b = T = 0, uniform offers: root of y = (1 - y)^2 / 2
    w = wq.reservation_exogenous(1.5, policy(), exo_prim(), UNI)
    assert w == pytest.approx(2.0 - math.sqrt(3.0), abs=1e-12)
    # independent bisection oracle on the same residual
    oracle = brentq(lambda y: y - (1.0 - y) ** 2 / 2.0, 0.0, 1.0, xtol=1e-14)
    assert w == pytest.approx(oracle, abs=1e-12)


def test_reservation_exogenous_out_of_support():
    with pytest.raises(wq.ReservationOutOfSupport):
        wq.reservation_exogenous(0.5, policy(b=5.0), exo_prim(), UNI)
    with pytest.raises(wq.ReservationOutOfSupport):
        wq.reservation_exogenous(0.5, policy(b=-5.0), exo_prim(), UNI)


def test_bracketing_function_strictly_increasing():
    pol = policy(b=0.2, T=0.05, phi=0.5)
    for z in (0.3, 0.6, 0.9):
        ys = np.linspace(0.0, 1.0, 101)
        vals = [acceptance_residual_exogenous(y, z, 0.2, 0.05, 0.5, 1.0, 1.0, UNI)
                for y in ys]
        assert np.all(np.diff(vals) > 0.0)


# ----------------------------------------------------------------------
# pooling threshold and endogenous reservation wages
# ----------------------------------------------------------------------
def test_solve_x0_oracle():
    # root of x = (1 - x)^4 / 8, solved independently with brentq
    x0 = wq.solve_x0(policy(), endo_prim(), UNI)
    assert x0 == pytest.approx(0.0868947259702949, abs=1e-11)


def test_solve_x0_degenerate_never_accept():
    x0 = wq.solve_x0(policy(b=1.5, T=0.2), endo_prim(), UNI)
    assert x0 == pytest.approx(1.7)


def test_solve_x0_ignores_phi():
    a = wq.solve_x0(policy(b=0.1, phi=0.0), endo_prim(), UNI)
    b = wq.solve_x0(policy(b=0.1, phi=0.7), endo_prim(), UNI)
    assert a == b


def test_reservation_endogenous_pooling_branch():
    pol = policy(b=0.1, phi=0.5)
    x0 = wq.solve_x0(pol, endo_prim(), UNI)
    assert wq.reservation_endogenous(x0 - 0.1, pol, endo_prim(), UNI, x0) == x0
    assert wq.reservation_endogenous(x0, pol, endo_prim(), UNI, x0) == x0


def test_reservation_endogenous_active_oracle():
    # dense scan of the stay-search residual plus brentq, computed offline:
    # b=0.21, T=0, phi=0.5, kappa=eta=r=1, uniform offers, z=0.5
    pol = policy(b=0.21, phi=0.5)
    prim = endo_prim()
    x0 = wq.solve_x0(pol, prim, UNI)
    assert 0.5 > x0  # the example sits on the active region
    w = wq.reservation_endogenous(0.5, pol, prim, UNI, x0)
    assert w == pytest.approx(0.013508393905583976, abs=1e-10)
    assert w < 0.5


def test_reservation_endogenous_out_of_support():
    # the insurance is generous enough that even the lowest offer is accepted
    pol = policy(b=0.0, phi=0.5)
    prim = endo_prim()
    x0 = wq.solve_x0(pol, prim, UNI)
    with pytest.raises(wq.ReservationOutOfSupport):
        wq.reservation_endogenous(0.5, pol, prim, UNI, x0)


# ----------------------------------------------------------------------
# surplus, effort, analytic slopes
# ----------------------------------------------------------------------
def test_surplus_examples():
    pol = policy()
    s, lam = wq.surplus_and_effort(0.4, 1.0, pol, endo_prim(), UNI)
    assert (s, lam) == (0.0, 0.0)
    s, _ = wq.surplus_and_effort(0.2, 0.5, pol, endo_prim(), UNI)
    assert s == pytest.approx(0.125)


def test_surplus_pooled_equals_uninsured():
    pol = policy(b=0.05, phi=0.6)
    prim = endo_prim()
    x0 = wq.solve_x0(pol, prim, UNI)
    z = 0.5 * x0
    s_ins, _ = wq.surplus_and_effort(z, x0, pol, prim, UNI)
    s_plain, _ = wq.surplus_and_effort(z, x0, policy(b=0.05, phi=0.0), prim, UNI)
    assert s_ins == pytest.approx(s_plain, abs=1e-15)


def test_lemma_slopes_signs_and_edges():
    # phi = 0 kills both numerators
    dw, ds = lemma_slopes(0.5, 0.3, 1.2, 0.0, 1.0, UNI)
    assert dw == 0.0 and ds == 0.0
    # at z = hi the survival B vanishes: dw = -r phi / denom
    phi, lam, r = 0.5, 1.2, 1.0
    w = 0.3
    dw, ds = lemma_slopes(UNI.hi, w, lam, phi, r, UNI)
    denom = r * (1 - phi) + lam * (1 - phi) * UNI.upper_partial_moment(w, 0)
    assert dw == pytest.approx(-r * phi / denom)
    assert ds > 0.0


def test_analytic_derivatives_match_finite_differences(endo_bundle):
    prim, pol, sol, F = (endo_bundle["prim"], endo_bundle["policy"],
                         endo_bundle["sol"], endo_bundle["F"])
    checked = 0
    for z in sol.z_grid[::16]:
        h = 1e-4 * z
        if z - h <= sol.x0 or z + h > sol.z_grid[-1]:
            continue
        dw_a, ds_a = wq.analytic_derivatives(z, sol, pol, prim, F)
        up = wq.reservation_endogenous(z + h, pol, prim, F, sol.x0)
        dn = wq.reservation_endogenous(z - h, pol, prim, F, sol.x0)
        s_up, _ = wq.surplus_and_effort(z + h, up, pol, prim, F)
        s_dn, _ = wq.surplus_and_effort(z - h, dn, pol, prim, F)
        assert dw_a == pytest.approx((up - dn) / (2 * h), rel=1e-4)
        assert ds_a == pytest.approx((s_up - s_dn) / (2 * h), rel=1e-4)
        checked += 1
    assert checked > 5


def test_analytic_derivatives_reject_pooling_region(endo_bundle):
    with pytest.raises(ValueError, match="pooling"):
        wq.analytic_derivatives(endo_bundle["sol"].x0 - 0.1, endo_bundle["sol"],
                                endo_bundle["policy"], endo_bundle["prim"],
                                endo_bundle["F"])


# ----------------------------------------------------------------------
# the grid solver
# ----------------------------------------------------------------------
def test_solve_wi_value_identity(endo_bundle):
    sol, pol, prim = endo_bundle["sol"], endo_bundle["policy"], endo_bundle["prim"]
    g = wq.consumption_wi(sol.w_res, sol.z_grid, pol)
    assert np.max(np.abs(prim.r * sol.value - g)) < 1e-10


def test_solve_wi_pooling_and_monotonicity(endo_bundle):
    sol = endo_bundle["sol"]
    pooled = sol.z_grid <= sol.x0
    assert pooled.any() and (~pooled).any()
    assert np.max(np.abs(sol.w_res[pooled] - sol.x0)) < 1e-10
    assert np.all(sol.w_res[~pooled] < sol.z_grid[~pooled])
    assert np.all(np.diff(sol.w_res) <= 0.0)


def test_solve_wi_phi_zero_constant(offer_dist, prior_dist):
    prim = endo_prim(r=0.05)
    pol = wq.WIPolicy(wq.BenefitSchedule.constant(0.4), 0.1, 0.0)
    sol = wq.solve_wi(pol, prim, offer_dist, prior_dist, n_grid=61)
    assert np.max(np.abs(sol.w_res - sol.x0)) < 1e-10


def test_solve_wi_phi_continuity(offer_dist, prior_dist):
    prim = endo_prim(r=0.05)
    pol = wq.WIPolicy(wq.BenefitSchedule.constant(0.4), 0.1, 1e-6)
    sol = wq.solve_wi(pol, prim, offer_dist, prior_dist, n_grid=101)
    assert np.max(np.abs(sol.w_res - sol.x0)) < 1e-4


def test_solve_wi_small_grid_rejected(offer_dist, prior_dist):
    prim = exo_prim(r=0.05, lam=0.8)
    with pytest.raises(ValueError):
        wq.solve_wi(policy(b=0.4), prim, offer_dist, prior_dist, n_grid=50)


def test_solve_wi_interpolators_hit_nodes(exo_bundle):
    sol = exo_bundle["sol"]
    k = 37
    assert sol.w_res_at(sol.z_grid[k]) == sol.w_res[k]
    assert sol.effort_at(sol.z_grid[k]) == sol.effort[k]


# ----------------------------------------------------------------------
# budget-balancing tax
# ----------------------------------------------------------------------
def test_balance_tax_zero_benefits(offer_dist, prior_dist):
    prim = exo_prim(r=0.05, lam=0.8)
    T = wq.balance_wi_tax(wq.BenefitSchedule.constant(0.0), 0.0, prim,
                          offer_dist, prior_dist, n_grid=61)
    assert abs(T) < 1e-9


def test_balance_tax_positive_benefits(offer_dist, prior_dist):
    prim = exo_prim(r=0.05, lam=0.8)
    T = wq.balance_wi_tax(wq.BenefitSchedule.constant(0.4), 0.0, prim,
                          offer_dist, prior_dist, n_grid=61)
    assert T > 0.0


def test_balance_tax_matches_grid_scan(offer_dist, prior_dist):
    from wiequiv.welfare import budget_residual

    prim = exo_prim(r=0.05, lam=0.8)
    b = wq.BenefitSchedule.constant(0.4)
    T = wq.balance_wi_tax(b, 0.5, prim, offer_dist, prior_dist, n_grid=61)

    def residual(t):
        pol = wq.WIPolicy(b, t, 0.5)
        sol = wq.solve_wi(pol, prim, offer_dist, prior_dist, n_grid=61)
        return budget_residual(sol, pol, prim, offer_dist, prior_dist)

    # independent oracle: coarse scan for the sign change, then brentq
    ts = np.linspace(0.0, 1.0, 41)
    vals = np.array([residual(t) for t in ts])
    idx = int(np.nonzero(np.diff(np.sign(vals)) != 0)[0][0])
    oracle = brentq(residual, ts[idx], ts[idx + 1], xtol=1e-12)
    assert T == pytest.approx(oracle, abs=1e-8)
    assert abs(residual(T)) < 1e-9

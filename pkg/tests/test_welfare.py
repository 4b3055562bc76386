import math

import numpy as np
import pytest
from scipy.integrate import quad

import wiequiv as wq
from wiequiv.welfare import (budget_residual, composite_weights, exante_welfare,
                             h_weights, pv_weights, welfare_report)
from wiequiv.replicate import k_values

UNI = wq.DistributionSpec.uniform(0.0, 1.0)


def synthetic_solution(z_grid, w_res, effort, policy, r):
    w_res = np.asarray(w_res, dtype=float)
    z_grid = np.asarray(z_grid, dtype=float)
    value = wq.consumption_wi(w_res, z_grid, policy) / r
    surplus = np.zeros_like(z_grid)
    return wq.WISolution(z_grid, w_res, surplus, np.asarray(effort, float),
                         value, math.nan)


# ----------------------------------------------------------------------
# present-value weights
# ----------------------------------------------------------------------
def test_pv_weights_closed_cases():
    r = 0.05
    u, e = pv_weights(0.0, r)
    assert u == 1.0 / r and e == 0.0
    u, e = pv_weights(r, r)
    assert u == pytest.approx(1.0 / (2.0 * r)) and e == 0.5


def test_pv_weights_identity_exact():
    for alpha in (0.0, 0.05, 0.1, 1.0, 10.0, 123.4):
        u, e = pv_weights(alpha, 0.05)
        assert 0.05 * u + e == 1.0  # exact in floating point by construction


@pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
def test_pv_weights_against_time_integration(alpha):
    r = 0.05
    u, e = pv_weights(alpha, r)
    u_num, _ = quad(lambda t: alpha * math.exp(-alpha * t)
                    * (1.0 - math.exp(-r * t)) / r, 0.0, np.inf)
    e_num, _ = quad(lambda t: alpha * math.exp(-alpha * t) * math.exp(-r * t),
                    0.0, np.inf)
    assert u == pytest.approx(u_num, abs=1e-10)
    assert e == pytest.approx(e_num, abs=1e-10)


# ----------------------------------------------------------------------
# acceptance rate
# ----------------------------------------------------------------------
def test_acceptance_rate_examples():
    pol = wq.WIPolicy(wq.BenefitSchedule.constant(0.0), 0.0, 0.0)
    z = np.linspace(0.0, 1.0, 51)
    sol = synthetic_solution(z, np.full(51, 0.25), np.ones(51), pol, 1.0)
    assert wq.acceptance_rate(0.5, sol, UNI) == pytest.approx(0.75)
    sol_hi = synthetic_solution(z, np.full(51, 1.0), np.ones(51), pol, 1.0)
    assert wq.acceptance_rate(0.5, sol_hi, UNI) == 0.0


def test_acceptance_rate_increasing_on_active_region(endo_bundle):
    sol, F = endo_bundle["sol"], endo_bundle["F"]
    active = sol.z_grid > sol.x0
    alpha = sol.effort * F.upper_partial_moment(sol.w_res, 0)
    assert np.all(np.diff(alpha[active]) > 0.0)


# ----------------------------------------------------------------------
# welfare and budget
# ----------------------------------------------------------------------
def test_perpetual_unemployment_welfare(offer_dist, prior_dist):
    # hazard identically zero: welfare is the annuity value of the benefit
    r = 0.05
    prim = wq.Primitives(r=r, mode=wq.SearchMode.ENDOGENOUS_SEARCH)
    pol = wq.WIPolicy(wq.BenefitSchedule.constant(0.4), 0.0, 0.0)
    z = np.linspace(prior_dist.lo, prior_dist.hi, 51)
    sol = synthetic_solution(z, np.full(51, 2.0), np.zeros(51), pol, r)
    w = exante_welfare(sol, pol, prim, offer_dist, prior_dist)
    assert w == pytest.approx(0.4 / r, rel=1e-12)


def test_zero_policy_budget_is_zero(offer_dist, prior_dist):
    prim = wq.Primitives(r=0.05, mode=wq.SearchMode.EXOGENOUS_ARRIVAL, lambda_bar=0.8)
    pol = wq.WIPolicy(wq.BenefitSchedule.constant(0.0), 0.0, 0.0)
    sol = wq.solve_wi(pol, prim, offer_dist, prior_dist, n_grid=61)
    assert budget_residual(sol, pol, prim, offer_dist, prior_dist) == pytest.approx(
        0.0, abs=1e-12)


def test_direct_equals_concise_when_balanced(exo_bundle, endo_bundle):
    for bundle in (exo_bundle, endo_bundle):
        sol, pol, prim = bundle["sol"], bundle["policy"], bundle["prim"]
        direct = exante_welfare(sol, pol, prim, bundle["F"], bundle["H"])
        concise = exante_welfare(sol, pol, prim, bundle["F"], bundle["H"],
                                 form="concise")
        assert abs(direct - concise) / abs(direct) < 1e-8


def test_equivalence_of_welfare(exo_bundle, endo_bundle):
    for bundle in (exo_bundle, endo_bundle):
        sol, prim = bundle["sol"], bundle["prim"]
        w_wi = exante_welfare(sol, bundle["policy"], prim, bundle["F"], bundle["H"])
        w_ui = exante_welfare(sol, bundle["ui"], prim, bundle["F"], bundle["H"])
        assert abs(w_ui - w_wi) / abs(w_wi) < 1e-6


def test_wi_receipts_net_out_insurance(exo_bundle):
    # phi = 0 in the receipts reproduces the plain-tax residual exactly
    sol, prim, F, H = (exo_bundle["sol"], exo_bundle["prim"], exo_bundle["F"],
                       exo_bundle["H"])
    pol = exo_bundle["policy"]
    plain = wq.WIPolicy(pol.b, pol.T, 0.0)
    resid_insured = budget_residual(sol, pol, prim, F, H)
    resid_plain = budget_residual(sol, plain, prim, F, H)
    # same decision rules, insurance payouts removed: the residual rises
    assert resid_plain > resid_insured
    # and the plain residual matches a by-hand recomputation of the tax flows
    u, e = pv_weights(sol.effort * F.upper_partial_moment(sol.w_res, 0), prim.r)
    hand = np.dot(h_weights(H, sol.z_grid),
                  -u * pol.b(sol.z_grid) + e * pol.T / prim.r)
    assert resid_plain == pytest.approx(float(hand), rel=1e-12)


def test_budget_affine_in_tax_with_slope_one_over_r(exo_bundle):
    sol, prim, F, H = (exo_bundle["sol"], exo_bundle["prim"], exo_bundle["F"],
                       exo_bundle["H"])
    k = k_values(sol.w_res, prim.lambda_bar, prim.r, F)

    def residual_at(t):
        pol = wq.UIOnlyPolicy(sol.z_grid, k - t, wq.LumpSumTax(t))
        return budget_residual(sol, pol, prim, F, H)

    delta = 0.25
    slope = (residual_at(0.5 + delta) - residual_at(0.5)) / delta
    mass = float(np.sum(h_weights(H, sol.z_grid)))
    assert slope == pytest.approx(mass / prim.r, rel=1e-9)


def test_welfare_report_round_trip(exo_bundle):
    rep = welfare_report(exo_bundle["sol"], exo_bundle["policy"], exo_bundle["prim"],
                         exo_bundle["F"], exo_bundle["H"])
    assert rep.mode == "wi"
    assert np.all(rep.alpha >= 0.0)
    assert math.isfinite(rep.welfare)
    doc = rep.to_dict()
    assert set(doc["per_z"]) == {"z", "alpha", "w_res", "benefit",
                                 "expected_receipts", "welfare_contrib"}
    # the per-z contributions integrate back to the reported welfare
    hw = h_weights(exo_bundle["H"], rep.z_grid)
    assert float(np.dot(hw, rep.welfare_contrib)) == pytest.approx(rep.welfare)


# ----------------------------------------------------------------------
# quadrature helpers
# ----------------------------------------------------------------------
def test_composite_weights_polynomial_exactness():
    for n in (51, 52):  # odd: plain Simpson; even: Simpson with a 3/8 tail
        x = np.linspace(0.0, 2.0, n)
        w = composite_weights(x)
        for p in range(4):
            assert np.dot(w, x ** p) == pytest.approx(2.0 ** (p + 1) / (p + 1),
                                                      rel=1e-12)


def test_h_weights_rejects_singular_priors():
    singular = wq.DistributionSpec.scaled_beta(0.5, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError, match="unbounded"):
        h_weights(singular, np.linspace(0.0, 1.0, 51))

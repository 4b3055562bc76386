import time

import pytest

import wiequiv as wq

# default configurations shared across the suite; solved once per session
EXO = {"r": 0.05, "lambda_bar": 0.8, "phi": 0.5, "b": 0.4, "n_z": 201}
ENDO = {"r": 0.05, "kappa": 1.0, "eta": 1.0, "phi": 0.5, "b": 0.4, "n_z": 401}


@pytest.fixture(scope="session")
def offer_dist():
    return wq.DistributionSpec.truncated_lognormal(0.0, 0.5, 0.2, 5.0)


@pytest.fixture(scope="session")
def prior_dist():
    return wq.DistributionSpec.uniform(0.5, 3.0)


@pytest.fixture(scope="session")
def exo_bundle(offer_dist, prior_dist):
    """Solved exogenous default economy plus its replication, with timings."""
    t0 = time.perf_counter()
    prim = wq.Primitives(r=EXO["r"], mode=wq.SearchMode.EXOGENOUS_ARRIVAL,
                         lambda_bar=EXO["lambda_bar"])
    b = wq.BenefitSchedule.constant(EXO["b"])
    T = wq.balance_wi_tax(b, EXO["phi"], prim, offer_dist, prior_dist,
                          n_grid=EXO["n_z"])
    policy = wq.WIPolicy(b, T, EXO["phi"])
    sol = wq.solve_wi(policy, prim, offer_dist, prior_dist, n_grid=EXO["n_z"])
    ui = wq.replicate_policy(sol, policy, prim, offer_dist, prior_dist)
    report = wq.verify_replication(ui, sol, prim, offer_dist, prior_dist)
    elapsed = time.perf_counter() - t0
    return {"prim": prim, "policy": policy, "sol": sol, "ui": ui,
            "verification": report, "F": offer_dist, "H": prior_dist,
            "elapsed": elapsed}


@pytest.fixture(scope="session")
def endo_bundle(offer_dist, prior_dist):
    """Solved endogenous default economy plus its replication, with timings."""
    t0 = time.perf_counter()
    prim = wq.Primitives(r=ENDO["r"], mode=wq.SearchMode.ENDOGENOUS_SEARCH,
                         kappa=ENDO["kappa"], eta=ENDO["eta"])
    b = wq.BenefitSchedule.constant(ENDO["b"])
    T = wq.balance_wi_tax(b, ENDO["phi"], prim, offer_dist, prior_dist,
                          n_grid=ENDO["n_z"])
    policy = wq.WIPolicy(b, T, ENDO["phi"])
    sol = wq.solve_wi(policy, prim, offer_dist, prior_dist, n_grid=ENDO["n_z"])
    ui = wq.replicate_policy(sol, policy, prim, offer_dist, prior_dist)
    report = wq.verify_replication(ui, sol, prim, offer_dist, prior_dist)
    elapsed = time.perf_counter() - t0
    return {"prim": prim, "policy": policy, "sol": sol, "ui": ui,
            "verification": report, "F": offer_dist, "H": prior_dist,
            "elapsed": elapsed}

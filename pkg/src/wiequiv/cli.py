"""Batch command-line interface: scenario configs in, JSON/CSV artifacts out.

Commands: solve, replicate, verify, lemma-check, sweep, simulate.  One JSON
scenario per file; every artifact is written with full double precision so
reruns are byte-identical.  Exit codes: 0 ok, 2 config error, 3 solver error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dist import DistributionSpec, QuadratureError
from .oracle import SimConfig, simulate_paired, simulate_panel
from .replicate import ConsumptionSchedule, replicate_policy, surplus_match_residuals, \
    verify_replication
from .roots import BracketError
from .welfare import welfare_report
from .wimodel import (BenefitSchedule, ModelError, Primitives, SearchMode, WIPolicy,
                      balance_wi_tax, lemma_slopes, reservation_endogenous, solve_wi,
                      surplus_and_effort)

_DEFAULT_TOLERANCES = {"root": 1e-12, "quad": 1e-10, "equiv": 1e-6,
                       "reservation": 1e-8, "effort": 1e-6, "budget": 1e-9,
                       "surplus_match": 1e-6}
_DEFAULT_SIM = {"n_agents": 200_000, "dt": 0.01, "horizon": 600.0,
                "seed": 20_260_810, "antithetic": False}


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    primitives: Primitives
    policy_b: BenefitSchedule
    policy_T: float
    policy_phi: float
    balance_tax: bool
    offer_dist: DistributionSpec
    prior_dist: DistributionSpec
    n_z: int
    n_w: int
    tolerances: dict
    sim: Optional[SimConfig]
    output_dir: str
    sweep: Optional[dict]
    raw: dict


def _require_keys(section, allowed, where):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _get(section, key, where, types, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing key {key!r} in {where}")
        return default
    val = section[key]
    if types is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, types):
        raise ConfigError(f"{where}.{key} has wrong type {type(val).__name__}")
    return val


def _parse_benefit(raw):
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return BenefitSchedule.constant(float(raw))
    if not isinstance(raw, dict):
        raise ConfigError("policy.b must be a number or a schedule object")
    kind = raw.get("kind")
    try:
        if kind == "constant":
            _require_keys(raw, {"kind", "value"}, "policy.b")
            return BenefitSchedule.constant(_get(raw, "value", "policy.b", float,
                                                 required=True))
        if kind == "affine":
            _require_keys(raw, {"kind", "a0", "a1"}, "policy.b")
            return BenefitSchedule.affine(_get(raw, "a0", "policy.b", float, required=True),
                                          _get(raw, "a1", "policy.b", float, required=True))
        if kind == "table":
            _require_keys(raw, {"kind", "z", "values"}, "policy.b")
            return BenefitSchedule.table(raw["z"], raw["values"])
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"policy.b: {exc}") from exc
    raise ConfigError(f"unknown benefit schedule kind {kind!r}")


def parse_config(text):
    """Parse and validate a scenario document; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _require_keys(raw, {"primitives", "policy", "offer_dist", "prior_dist", "grid",
                        "tolerances", "sim", "output_dir", "sweep"}, "config")

    prim_raw = _get(raw, "primitives", "config", dict, required=True)
    _require_keys(prim_raw, {"r", "mode", "lambda_bar", "kappa", "eta"},
                  "primitives")
    mode_str = _get(prim_raw, "mode", "primitives", str, required=True)
    try:
        mode = SearchMode(mode_str)
    except ValueError:
        raise ConfigError(f"primitives.mode must be one of "
                          f"{[m.value for m in SearchMode]}, got {mode_str!r}") from None
    try:
        prim = Primitives(
            r=_get(prim_raw, "r", "primitives", float, required=True),
            mode=mode,
            lambda_bar=_get(prim_raw, "lambda_bar", "primitives", float, default=0.0),
            kappa=_get(prim_raw, "kappa", "primitives", float, default=1.0),
            eta=_get(prim_raw, "eta", "primitives", float, default=1.0),
        )
    except ValueError as exc:
        raise ConfigError(f"primitives: {exc}") from exc

    pol_raw = _get(raw, "policy", "config", dict, required=True)
    _require_keys(pol_raw, {"b", "T", "phi", "balance_tax"}, "policy")
    if "b" not in pol_raw:
        raise ConfigError("missing key 'b' in policy")
    b_sched = _parse_benefit(pol_raw["b"])
    phi = _get(pol_raw, "phi", "policy", float, required=True)
    if not 0.0 <= phi <= 0.99:
        raise ConfigError("phi must lie in [0, 0.99]")
    if mode is SearchMode.ENDOGENOUS_SEARCH and not b_sched.is_constant:
        raise ConfigError("b must be constant in endogenous-search mode")
    T = _get(pol_raw, "T", "policy", float, default=0.0)
    balance_tax = _get(pol_raw, "balance_tax", "policy", bool, default=False)

    try:
        offer = DistributionSpec.from_dict(
            _get(raw, "offer_dist", "config", dict, required=True))
        prior = DistributionSpec.from_dict(
            _get(raw, "prior_dist", "config", dict, required=True))
    except ValueError as exc:
        raise ConfigError(f"distribution spec: {exc}") from exc
    if prior.family.value == "scaled_beta" and (prior.a < 1.0 or prior.b < 1.0):
        raise ConfigError("prior_dist: scaled_beta needs a >= 1 and b >= 1 "
                          "(endpoint-singular priors are not integrable here)")

    grid_raw = _get(raw, "grid", "config", dict, default={})
    _require_keys(grid_raw, {"n_z", "n_w"}, "grid")
    n_z = _get(grid_raw, "n_z", "grid", int, default=201)
    n_w = _get(grid_raw, "n_w", "grid", int, default=2001)
    if n_z < 51:
        raise ConfigError("grid.n_z must be at least 51")
    if n_w < 101:
        raise ConfigError("grid.n_w must be at least 101")

    tol = dict(_DEFAULT_TOLERANCES)
    tol_raw = _get(raw, "tolerances", "config", dict, default={})
    _require_keys(tol_raw, set(_DEFAULT_TOLERANCES), "tolerances")
    for key, val in tol_raw.items():
        val = float(val)
        if val <= 0.0:
            raise ConfigError(f"tolerances.{key} must be positive")
        tol[key] = val

    sim = None
    if "sim" in raw:
        sim_raw = _get(raw, "sim", "config", dict, default={})
        _require_keys(sim_raw, set(_DEFAULT_SIM), "sim")
        merged = dict(_DEFAULT_SIM, **sim_raw)
        try:
            sim = SimConfig(n_agents=int(merged["n_agents"]), dt=float(merged["dt"]),
                            horizon=float(merged["horizon"]), seed=int(merged["seed"]),
                            antithetic=bool(merged["antithetic"]))
        except ValueError as exc:
            raise ConfigError(f"sim: {exc}") from exc

    sweep = None
    if "sweep" in raw:
        sweep_raw = _get(raw, "sweep", "config", dict, required=True)
        _require_keys(sweep_raw, {"path", "values"}, "sweep")
        path = _get(sweep_raw, "path", "sweep", str, required=True)
        values = sweep_raw.get("values")
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values must be a non-empty list")
        sweep = {"path": path, "values": values}

    return ScenarioConfig(
        primitives=prim, policy_b=b_sched, policy_T=T, policy_phi=phi,
        balance_tax=balance_tax, offer_dist=offer, prior_dist=prior,
        n_z=n_z, n_w=n_w, tolerances=tol, sim=sim,
        output_dir=_get(raw, "output_dir", "config", str, default="."),
        sweep=sweep, raw=raw)


# ----------------------------------------------------------------------
# artifact helpers
# ----------------------------------------------------------------------
def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path, header, columns):
    rows = zip(*columns)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _solve_scenario(cfg):
    prim, F, H = cfg.primitives, cfg.offer_dist, cfg.prior_dist
    if cfg.balance_tax:
        T = balance_wi_tax(cfg.policy_b, cfg.policy_phi, prim, F, H, n_grid=cfg.n_z,
                           budget_tol=cfg.tolerances["budget"],
                           f_tol=cfg.tolerances["root"])
    else:
        T = cfg.policy_T
    policy = WIPolicy(cfg.policy_b, T, cfg.policy_phi)
    sol = solve_wi(policy, prim, F, H, n_grid=cfg.n_z, f_tol=cfg.tolerances["root"])
    return policy, sol


def _verification_payload(cfg, policy, sol):
    prim, F, H = cfg.primitives, cfg.offer_dist, cfg.prior_dist
    tol = cfg.tolerances
    ui = replicate_policy(sol, policy, prim, F, H, n_w=cfg.n_w)
    rep = verify_replication(ui, sol, prim, F, H)
    wi_report = welfare_report(sol, policy, prim, F, H)
    ui_report = welfare_report(sol, ui, prim, F, H)
    rel_welfare = abs(ui_report.welfare - wi_report.welfare) / abs(wi_report.welfare)
    checks = {
        "reservation_match": rep.max_reservation_dev < tol["reservation"],
        "welfare_equal": rel_welfare < tol["equiv"],
        "budget_wi": abs(wi_report.budget) < tol["budget"],
        "budget_ui": abs(ui_report.budget) < tol["budget"],
        "bracket_monotone": rep.bracket_margin > 0.0,
    }
    payload = {
        "mode": rep.mode,
        "max_reservation_dev": rep.max_reservation_dev,
        "max_effort_dev": None,
        "bracket_margin": rep.bracket_margin,
        "welfare_wi": wi_report.welfare,
        "welfare_ui": ui_report.welfare,
        "welfare_rel_diff": rel_welfare,
        "budget_residual_wi": wi_report.budget,
        "budget_residual_ui": ui_report.budget,
        "surplus_match_residual": None,
        "q_strictly_increasing": None,
        "tolerances": tol,
    }
    if prim.mode is SearchMode.ENDOGENOUS_SEARCH:
        payload["max_effort_dev"] = rep.max_effort_dev
        checks["effort_match"] = rep.max_effort_dev < tol["effort"]
        sm = float(np.max(surplus_match_residuals(ui, sol, prim, F)))
        payload["surplus_match_residual"] = sm
        checks["surplus_match"] = sm < tol["surplus_match"]
        increasing = bool(np.all(np.diff(ui.tax.q) > 0.0))
        payload["q_strictly_increasing"] = increasing
        checks["q_strictly_increasing"] = increasing
    payload["pass"] = checks
    payload["passed"] = all(checks.values())
    return payload, ui


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------
def _cmd_solve(cfg, out):
    policy, sol = _solve_scenario(cfg)
    doc = sol.to_dict()
    doc["T"] = policy.T
    doc["phi"] = policy.phi
    _write_json(out / "wi_solution.json", doc)
    _write_csv(out / "wi_solution.csv",
               ["z", "w_res", "surplus", "effort", "value"],
               [sol.z_grid, sol.w_res, sol.surplus, sol.effort, sol.value])
    return 0


def _cmd_replicate(cfg, out):
    policy, sol = _solve_scenario(cfg)
    ui = replicate_policy(sol, policy, cfg.primitives, cfg.offer_dist,
                          cfg.prior_dist, n_w=cfg.n_w)
    _write_json(out / "ui_policy.json", ui.to_dict())
    if isinstance(ui.tax, ConsumptionSchedule):
        w = ui.tax.w
        q = ui.tax.q + ui.tax.shift
        _write_csv(out / "q_schedule.csv", ["w", "q", "tau"], [w, q, w - q])
    return 0


def _cmd_verify(cfg, out):
    policy, sol = _solve_scenario(cfg)
    payload, ui = _verification_payload(cfg, policy, sol)
    _write_json(out / "verification.json", payload)
    prim, F, H = cfg.primitives, cfg.offer_dist, cfg.prior_dist
    (out / "welfare_wi.csv").write_text(
        welfare_report(sol, policy, prim, F, H).per_z_csv())
    (out / "welfare_ui.csv").write_text(
        welfare_report(sol, ui, prim, F, H).per_z_csv())
    return 0 if payload["passed"] else 4


def _cmd_lemma_check(cfg, out):
    if cfg.primitives.mode is not SearchMode.ENDOGENOUS_SEARCH:
        raise ConfigError("lemma-check requires endogenous-search mode")
    policy, sol = _solve_scenario(cfg)
    prim, F = cfg.primitives, cfg.offer_dist
    x0 = sol.x0
    n = sol.z_grid.size
    dw_a = np.zeros(n)
    ds_a = np.zeros(n)
    dw_fd = np.full(n, math.nan)
    ds_fd = np.full(n, math.nan)
    region = []
    for k, z in enumerate(sol.z_grid):
        if z <= x0:
            region.append("pooling")
            dw_fd[k] = 0.0
            ds_fd[k] = 0.0
            continue
        region.append("active")
        dw_a[k], ds_a[k] = lemma_slopes(z, sol.w_res[k], sol.effort[k],
                                        policy.phi, prim.r, F)
        h = 1e-4 * z
        if z - h <= x0 or z + h > sol.z_grid[-1]:
            continue  # one-sided points stay NaN in the FD columns
        up = reservation_endogenous(z + h, policy, prim, F, x0)
        dn = reservation_endogenous(z - h, policy, prim, F, x0)
        s_up, _ = surplus_and_effort(z + h, up, policy, prim, F)
        s_dn, _ = surplus_and_effort(z - h, dn, policy, prim, F)
        dw_fd[k] = (up - dn) / (2.0 * h)
        ds_fd[k] = (s_up - s_dn) / (2.0 * h)
    _write_csv(out / "lemma.csv",
               ["z", "w_res", "dw_analytic", "dw_fd", "dS_analytic", "dS_fd", "region"],
               [sol.z_grid, sol.w_res, dw_a, dw_fd, ds_a, ds_fd, region])
    return 0


def _set_path(raw, dotted, value):
    node = raw
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"sweep.path {dotted!r} not found in config")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"sweep.path {dotted!r} not found in config")
    node[parts[-1]] = value


def _cmd_sweep(cfg, out):
    if cfg.sweep is None:
        raise ConfigError("sweep command needs a 'sweep' section in the config")
    header = ["param", "value", "max_reservation_dev", "max_effort_dev",
              "welfare_wi", "welfare_ui", "welfare_rel_diff", "budget_residual_wi",
              "budget_residual_ui", "surplus_match_residual", "bracket_margin",
              "passed"]
    columns = [[] for _ in header]
    all_pass = True
    for value in cfg.sweep["values"]:
        raw = copy.deepcopy(cfg.raw)
        raw.pop("sweep", None)
        _set_path(raw, cfg.sweep["path"], value)
        sub = parse_config(json.dumps(raw))
        policy, sol = _solve_scenario(sub)
        payload, _ = _verification_payload(sub, policy, sol)
        row = [cfg.sweep["path"], value, payload["max_reservation_dev"],
               payload["max_effort_dev"] if payload["max_effort_dev"] is not None
               else math.nan,
               payload["welfare_wi"], payload["welfare_ui"],
               payload["welfare_rel_diff"], payload["budget_residual_wi"],
               payload["budget_residual_ui"],
               payload["surplus_match_residual"]
               if payload["surplus_match_residual"] is not None else math.nan,
               payload["bracket_margin"], payload["passed"]]
        for col, item in zip(columns, row):
            col.append(item)
        all_pass &= payload["passed"]
    _write_csv(out / "sweep.csv", header, columns)
    return 0 if all_pass else 4


def _cmd_simulate(cfg, out, seed_override=None, trace=False):
    sim = cfg.sim or SimConfig(**_DEFAULT_SIM)
    if seed_override is not None:
        sim = SimConfig(n_agents=sim.n_agents, dt=sim.dt, horizon=sim.horizon,
                        seed=seed_override, antithetic=sim.antithetic)
    policy, sol = _solve_scenario(cfg)
    prim, F, H = cfg.primitives, cfg.offer_dist, cfg.prior_dist
    if trace:
        simulate_panel(policy, sol, prim, F, H, sim,
                       trace_path=out / "agent_trace.csv")
    ui = replicate_policy(sol, policy, prim, F, H, n_w=cfg.n_w)
    rep_wi, rep_ui, diff_mean, diff_se = simulate_paired(policy, ui, sol, prim, F, H, sim)
    wi_report = welfare_report(sol, policy, prim, F, H)
    ui_report = welfare_report(sol, ui, prim, F, H)
    doc = {"sim": sim.to_dict(),
           "wi": rep_wi.to_dict() | {"welfare_analytic": wi_report.welfare,
                                     "budget_analytic": wi_report.budget},
           "ui": rep_ui.to_dict() | {"welfare_analytic": ui_report.welfare,
                                     "budget_analytic": ui_report.budget},
           "paired_welfare_diff": {"mean": diff_mean, "se": diff_se}}
    _write_json(out / "sim_report.json", doc)
    return 0


_COMMANDS = {"solve": _cmd_solve, "replicate": _cmd_replicate, "verify": _cmd_verify,
             "lemma-check": _cmd_lemma_check, "sweep": _cmd_sweep,
             "simulate": _cmd_simulate}


def _error_json(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    z = getattr(exc, "z", None)
    if z is not None:
        payload["z"] = z
    return json.dumps(payload)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wiequiv",
        description="Solve, replicate, and verify wage-insurance economies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (default: "
                       "config output_dir)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the simulation seed")
        if name == "simulate":
            p.add_argument("--trace", action="store_true",
                           help="also write the per-agent trace CSV")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text())
    except OSError as exc:
        print(_error_json(ConfigError(f"cannot read config: {exc}")), file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2

    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "simulate":
            return _cmd_simulate(cfg, out, seed_override=args.seed,
                                 trace=getattr(args, "trace", False))
        return _COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except (ModelError, BracketError, QuadratureError, ValueError, RuntimeError) as exc:
        print(_error_json(exc), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

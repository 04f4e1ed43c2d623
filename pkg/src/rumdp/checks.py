"""Self-checks shared by ``rumdp verify`` and the test suite.

Each check returns a :class:`CheckResult`; none of them raise on a failed
comparison, so a caller can report every check in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .geometry import reward_opt_region
from .instances import RumdpInstance
from .lp import LinearProgram, solve_lp
from .mdp import bellman_slack, build_e_matrix, evaluate_policy, occupancy_of, solve_optimal
from .nondominated import (
    BRUTE_FORCE_LIMIT,
    brute_force_nondominated,
    enumerate_gt,
    enumerate_pi_witness,
)
from .regret import evaluate_regret, solve_icg_nd, solve_xu_mannor
from .rewards import random_interior_point, to_full_reward

VALUE_TIE_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_valid(inst: RumdpInstance, rng=None) -> CheckResult:
    try:
        inst.validate()
    except Exception as exc:  # noqa: BLE001 - reported, not raised
        return CheckResult("valid", False, str(exc))
    return CheckResult("valid", True, "instance invariants hold")


def check_oracle(inst: RumdpInstance, rng=None) -> CheckResult:
    """Brute force, geometric traversal and witness search agree on the key set."""
    mdp, poly = inst.mdp, inst.polytope
    if mdp.n_actions**mdp.n_states > BRUTE_FORCE_LIMIT:
        return CheckResult("oracle", True, "skipped: too many policies for brute force")
    brute = brute_force_nondominated(mdp, poly).key_set()
    gt = enumerate_gt(mdp, poly).key_set()
    pw = enumerate_pi_witness(mdp, poly).key_set()
    if brute == gt == pw:
        return CheckResult("oracle", True, f"{len(gt)} policies from all three methods")
    return CheckResult(
        "oracle", False, f"brute={len(brute)} gt={len(gt)} pi-witness={len(pw)}; gt^brute={sorted(gt ^ brute)[:3]}"
    )


def check_eq4(inst: RumdpInstance, rng=None, n_policies: int = 100) -> CheckResult:
    """``alpha . V == r . f`` and flow conservation for random policies and rewards."""
    rng = rng or np.random.default_rng(0)
    mdp, poly = inst.mdp, inst.polytope
    e = build_e_matrix(mdp)
    worst_gap = worst_flow = 0.0
    for _ in range(n_policies):
        pol = rng.integers(mdp.n_actions, size=mdp.n_states)
        r = to_full_reward(poly, random_interior_point(poly, rng))
        f = occupancy_of(mdp, pol)
        v = evaluate_policy(mdp, r, pol)
        worst_gap = max(worst_gap, abs(mdp.alpha @ v - r @ f))
        worst_flow = max(worst_flow, float(np.abs(mdp.gamma * e.T @ f + mdp.alpha).max()))
    ok = worst_gap < 1e-8 and worst_flow < 1e-7
    return CheckResult("eq4", ok, f"max |aV - rf| = {worst_gap:.3g}, max flow residual = {worst_flow:.3g}")


def check_optimality(inst: RumdpInstance, rng=None, n_rewards: int = 50) -> CheckResult:
    rng = rng or np.random.default_rng(1)
    worst = -np.inf
    for _ in range(n_rewards):
        r = to_full_reward(inst.polytope, random_interior_point(inst.polytope, rng))
        pol, v = solve_optimal(inst.mdp, r)
        worst = max(worst, float(bellman_slack(inst.mdp, r, pol, v).max()))
    return CheckResult("optimality", worst <= 1e-8, f"max Bellman slack = {worst:.3g}")


def hit_and_run(a: np.ndarray, b: np.ndarray, start: np.ndarray, count: int, rng, margin: float = 1e-9):
    """``count`` points of ``{w | a w <= b - margin}`` by hit-and-run from ``start``."""
    w = np.asarray(start, dtype=float).copy()
    out = []
    for _ in range(count):
        u = rng.normal(size=w.size)
        u /= np.linalg.norm(u)
        step = a @ u
        room = b - margin - a @ w
        with np.errstate(divide="ignore", invalid="ignore"):
            hi = np.min(np.where(step > 1e-15, room / step, np.inf))
            lo = np.max(np.where(step < -1e-15, room / step, -np.inf))
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            out.append(w.copy())
            continue
        w = w + rng.uniform(lo, hi) * u
        out.append(w.copy())
    return out


def _region_center(region, poly):
    a = np.vstack([poly.a_matrix, region.normals])
    b = np.r_[poly.b_vector, region.offsets]
    norms = np.linalg.norm(a, axis=1)
    lp = LinearProgram.build(np.r_[np.zeros(poly.dim), 1.0], ub=(np.c_[a, norms], b), maximize=True)
    out = solve_lp(lp)
    return a, b, out.solution[:-1], float(out.solution[-1])


def region_violations(inst: RumdpInstance, gamma_set, rng, samples: int = 200) -> Dict[str, int]:
    """Sample each region of ``gamma_set`` and count disagreements.

    Interior points come from hit-and-run inside the region. ``policy``
    counts samples where the region's policy is more than ``VALUE_TIE_TOL``
    worse than optimal. ``sign`` counts hyperplane values that disagree in
    sign with the directly computed Bellman slack, tested at the interior
    samples and at as many uniform points of the whole polytope.
    """
    mdp, poly = inst.mdp, inst.polytope
    bad_policy = bad_sign = checked = 0
    for entry in gamma_set:
        region = reward_opt_region(mdp, poly, entry.witness_w, entry.policy, check=False)
        a, b, center, radius = _region_center(region, poly)
        inside = hit_and_run(a, b, center, samples, rng) if radius > 1e-9 else []
        anywhere = [random_interior_point(poly, rng) for _ in range(samples)]
        for k, w in enumerate(inside + anywhere):
            r = to_full_reward(poly, w)
            v_pol = evaluate_policy(mdp, r, entry.policy)
            if k < len(inside):
                _, v_opt = solve_optimal(mdp, r)
                if np.any(v_opt - v_pol > VALUE_TIE_TOL * (1.0 + np.abs(v_opt))):
                    bad_policy += 1
            direct = bellman_slack(mdp, r, entry.policy, v_pol).ravel()
            lhs = (region.normals @ w - region.offsets) * region.scales
            for i, tags in enumerate(region.tags):
                s, act = tags[0]
                truth = direct[s * mdp.n_actions + act]
                if abs(truth) > 1e-7 and np.sign(lhs[i]) != np.sign(truth):
                    bad_sign += 1
        checked += len(inside)
    return {"policy": bad_policy, "sign": bad_sign, "samples": checked}


def check_regions(inst: RumdpInstance, rng=None, samples: int = 50) -> CheckResult:
    rng = rng or np.random.default_rng(2)
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    res = region_violations(inst, gamma_set, rng, samples)
    ok = res["policy"] == 0 and res["sign"] == 0
    return CheckResult(
        "regions", ok, f"{res['samples']} samples over {len(gamma_set)} regions, "
        f"{res['policy']} policy mismatches, {res['sign']} sign mismatches"
    )


def check_regret(inst: RumdpInstance, rng=None) -> CheckResult:
    gamma_set = enumerate_gt(inst.mdp, inst.polytope)
    xm = solve_xu_mannor(inst.polytope, gamma_set)
    ic = solve_icg_nd(inst.mdp, inst.polytope, gamma_set)
    e_xm = evaluate_regret(xm, gamma_set, inst.polytope)
    e_ic = evaluate_regret(ic, gamma_set, inst.polytope)
    gap = max(abs(xm.regret - ic.regret), abs(e_xm - xm.regret), abs(e_ic - ic.regret))
    return CheckResult("regret", gap <= 1e-5, f"xu-mannor {xm.regret:.9g}, icg-nd {ic.regret:.9g}, max gap {gap:.3g}")


CHECKS: Dict[str, Callable[..., CheckResult]] = {
    "valid": check_valid,
    "eq4": check_eq4,
    "optimality": check_optimality,
    "oracle": check_oracle,
    "regions": check_regions,
    "regret": check_regret,
}


def run_checks(inst: RumdpInstance, names: Optional[List[str]] = None, seed: int = 0) -> List[CheckResult]:
    """Run the named checks in order, stopping after an invalid instance."""
    names = list(CHECKS) if names is None else names
    out = []
    for name in names:
        result = CHECKS[name](inst, np.random.default_rng(seed))
        out.append(result)
        if name == "valid" and not result.passed:
            break
    return out

"""Minimax regret over a set of nondominated policies.

The regret of an occupancy ``f`` against reward ``r`` is ``max_g r.g - r.f``
over the candidate set; minimax regret minimizes the worst case of that over
the reward polytope. Two solvers are provided:

* :func:`solve_xu_mannor` dualizes the inner maximization for every
  candidate and solves a single LP over mixture weights.
* :func:`solve_icg_nd` alternates a master LP over occupancies with a
  search for the most violated (policy, reward) pair.

Every reward LP runs in parameter space: with ``r = r0 + Phi w`` the value
``r . g`` becomes ``w . (Phi^T g) + r0 . g``.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .errors import BudgetExceededError, LpNumericalError, PreconditionError
from .lp import LinearProgram, LpCounter, solve_lp
from .mdp import Mdp
from .nondominated import NondominatedSet
from .rewards import RewardPolytope, chebyshev_center

SUPPORT_TOL = 1e-9
DEFAULT_TOL = 1e-6
MAX_ITERATIONS = 10_000


@dataclass
class AdversarialPair:
    g: np.ndarray
    r_w: np.ndarray
    index: int = -1  # position of g in the candidate set


@dataclass
class RegretSolution:
    regret: float
    weights: Optional[np.ndarray] = None  # over the candidate set (mixture LP only)
    occupancy: Optional[np.ndarray] = None
    keys: List[tuple] = field(default_factory=list)
    gen_pairs: List[AdversarialPair] = field(default_factory=list)
    iterations: int = 0
    lp_count: int = 0
    wall_ms: float = 0.0
    history: List[float] = field(default_factory=list)  # master values per iteration

    @property
    def support(self) -> List[Tuple[tuple, float]]:
        if self.weights is None:
            return []
        return [(k, float(c)) for k, c in zip(self.keys, self.weights) if c > SUPPORT_TOL]

    def mixture(self) -> Dict[tuple, float]:
        return dict(self.support)


def _require_nonempty(gamma_set: NondominatedSet):
    if len(gamma_set) == 0:
        raise PreconditionError("the candidate set is empty")


def _reward_terms(gamma_set: NondominatedSet, polytope: RewardPolytope):
    """``(P, q)`` with ``r . g_i = P[i] . w + q[i]``."""
    return gamma_set.projected, gamma_set.bases


def max_regret(
    f: np.ndarray,
    gamma_set: NondominatedSet,
    polytope: RewardPolytope,
    counter: Optional[LpCounter] = None,
    threads: int = 1,
) -> Tuple[AdversarialPair, float]:
    """Worst-case regret of occupancy ``f`` and the pair attaining it.

    One LP per candidate ``g``: maximize ``r . g - r . f`` over ``A w <= b``.
    Ties go to the lowest candidate index.
    """
    _require_nonempty(gamma_set)
    f = np.asarray(f, dtype=float)
    n_pairs = f.size
    phi = polytope.phi(n_pairs)
    base = polytope.base(n_pairs)
    proj, q = _reward_terms(gamma_set, polytope)
    pf, qf = phi.T @ f, float(base @ f)

    def solve_one(i):
        lp = LinearProgram.build(proj[i] - pf, ub=(polytope.a_matrix, polytope.b_vector), maximize=True)
        out = solve_lp(lp, counter=counter)
        if not out.optimal:
            raise LpNumericalError(f"regret LP for candidate {i} ended {out.status}")
        return out.objective_value + q[i] - qf, out.solution

    idx = range(len(gamma_set))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(solve_one, idx))
    else:
        results = [solve_one(i) for i in idx]
    values = np.array([v for v, _ in results])
    best = int(np.argmax(values))
    return AdversarialPair(gamma_set.entries[best].occupancy, results[best][1], best), float(values[best])


def mixture_occupancy(weights: Union[Dict[tuple, float], np.ndarray], source: NondominatedSet) -> np.ndarray:
    """``Gamma_hat c`` for weights given per key or as an array aligned with ``source``."""
    if isinstance(weights, dict):
        f = None
        for key, c in weights.items():
            occ = source.entries[source.index[tuple(key)]].occupancy
            f = c * occ if f is None else f + c * occ
        if f is None:
            raise PreconditionError("empty mixture")
        return f
    weights = np.asarray(weights, dtype=float)
    if weights.size != len(source):
        raise PreconditionError(f"{weights.size} weights for {len(source)} candidates")
    return source.occupancies @ weights


def evaluate_regret(
    mixture,
    gamma_set: NondominatedSet,
    polytope: RewardPolytope,
    counter: Optional[LpCounter] = None,
    threads: int = 1,
) -> float:
    """Max regret of a mixture against ``gamma_set``.

    ``mixture`` is a :class:`RegretSolution`, a ``{key: weight}`` dict
    (keys looked up in ``gamma_set``), or an occupancy vector.
    """
    if isinstance(mixture, RegretSolution):
        f = mixture.occupancy
    elif isinstance(mixture, dict):
        f = mixture_occupancy(mixture, gamma_set)
    else:
        f = np.asarray(mixture, dtype=float)
    return max_regret(f, gamma_set, polytope, counter, threads)[1]


def solve_xu_mannor(polytope: RewardPolytope, gamma_set: NondominatedSet) -> RegretSolution:
    """Single-LP minimax regret over convex mixtures of the candidate set.

    Variables ``(c, delta, z_1 .. z_k)``. For each candidate ``i`` the inner
    ``max_w w . Phi^T (g_i - G c)`` over ``A w <= b`` is replaced by its dual
    ``min b . z_i`` with ``A^T z_i = Phi^T (g_i - G c)``, ``z_i >= 0``.
    """
    _require_nonempty(gamma_set)
    t0 = time.perf_counter()
    counter = LpCounter()
    proj, q = _reward_terms(gamma_set, polytope)
    k = len(gamma_set)
    a, b = polytope.a_matrix, polytope.b_vector
    n_c, d = a.shape
    n_vars = k + 1 + k * n_c
    z0 = k + 1  # first z column

    # equality rows: A^T z_i + P^T c = P_i  (d rows each), then sum c = 1
    eq = np.zeros((k * d + 1, n_vars))
    eq_rhs = np.zeros(k * d + 1)
    for i in range(k):
        rows = slice(i * d, (i + 1) * d)
        eq[rows, :k] = proj.T
        eq[rows, z0 + i * n_c : z0 + (i + 1) * n_c] = a.T
        eq_rhs[rows] = proj[i]
    eq[-1, :k] = 1.0
    eq_rhs[-1] = 1.0

    # b . z_i - q . c - delta <= -q_i
    ub = np.zeros((k, n_vars))
    for i in range(k):
        ub[i, z0 + i * n_c : z0 + (i + 1) * n_c] = b
    ub[:, :k] = -q
    ub[:, k] = -1.0

    objective = np.zeros(n_vars)
    objective[k] = 1.0
    lower = np.zeros(n_vars)
    lower[k] = -np.inf
    out = solve_lp(LinearProgram.build(objective, ub=(ub, -q), eq=(eq, eq_rhs), lower=lower), counter=counter)
    if not out.optimal:
        raise LpNumericalError(f"mixture LP ended {out.status}")
    c = np.maximum(out.solution[:k], 0.0)
    c /= c.sum()
    return RegretSolution(
        regret=float(out.solution[k]),
        weights=c,
        occupancy=gamma_set.occupancies @ c,
        keys=gamma_set.keys(),
        iterations=1,
        lp_count=counter.count,
        wall_ms=1000.0 * (time.perf_counter() - t0),
    )


def _master_lp(mdp: Mdp, rewards: List[np.ndarray], values: List[float]) -> LinearProgram:
    """``min delta`` over occupancies with ``r_i . g_i - r_i . f <= delta``."""
    nm, n = mdp.n_pairs, mdp.n_states
    owner = np.repeat(np.arange(n), mdp.n_actions)
    flow = np.zeros((n, nm + 1))
    flow[owner, np.arange(nm)] = 1.0
    flow[:, :nm] -= mdp.gamma * mdp.transition.T
    cuts = np.zeros((len(rewards), nm + 1))
    cuts[:, :nm] = -np.array(rewards)
    cuts[:, nm] = -1.0
    objective = np.zeros(nm + 1)
    objective[nm] = 1.0
    lower = np.zeros(nm + 1)
    lower[nm] = -np.inf
    return LinearProgram.build(
        objective, ub=(cuts, -np.array(values)), eq=(flow, mdp.alpha), lower=lower
    )


def solve_icg_nd(
    mdp: Mdp,
    polytope: RewardPolytope,
    gamma_set: NondominatedSet,
    tol: float = DEFAULT_TOL,
    max_iterations: int = MAX_ITERATIONS,
    threads: int = 1,
) -> RegretSolution:
    """Constraint generation restricted to the candidate set.

    The first constraint pairs the Chebyshev-center reward with the
    candidate that is best under it. Each round solves the master LP, finds
    the adversarial pair maximizing regret of the master's occupancy, and
    stops once that regret is within ``tol`` of the master value.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _require_nonempty(gamma_set)
    t0 = time.perf_counter()
    counter = LpCounter()
    nm = mdp.n_pairs
    phi, base = polytope.phi(nm), polytope.base(nm)
    proj, q = _reward_terms(gamma_set, polytope)

    w0, _ = chebyshev_center(polytope)
    first = int(np.argmax(proj @ w0 + q))
    pairs = [AdversarialPair(gamma_set.entries[first].occupancy, w0, first)]
    rewards = [phi @ w0 + base]
    values = [float(rewards[0] @ pairs[0].g)]
    history: List[float] = []
    best: Optional[RegretSolution] = None

    for it in range(1, max_iterations + 1):
        out = solve_lp(_master_lp(mdp, rewards, values), counter=counter)
        if not out.optimal:
            raise LpNumericalError(f"master LP ended {out.status}")
        f = np.maximum(out.solution[:nm], 0.0)
        delta = float(out.solution[nm])
        history.append(delta)
        pair, regret = max_regret(f, gamma_set, polytope, counter, threads)
        if best is None or regret < best.regret:
            best = RegretSolution(regret=regret, occupancy=f)
        if regret <= delta + tol:
            return RegretSolution(
                regret=delta,
                occupancy=f,
                gen_pairs=pairs,
                iterations=it,
                lp_count=counter.count,
                wall_ms=1000.0 * (time.perf_counter() - t0),
                history=history,
            )
        pairs.append(pair)
        r = phi @ pair.r_w + base
        rewards.append(r)
        values.append(float(r @ pair.g))

    best.gen_pairs, best.iterations, best.history = pairs, max_iterations, history
    best.lp_count = counter.count
    best.wall_ms = 1000.0 * (time.perf_counter() - t0)
    raise BudgetExceededError(f"no convergence within {max_iterations} iterations", best)

"""Enumerating the policies that are optimal somewhere in the reward polytope.

Three enumerators share one result type:

* :func:`enumerate_gt` walks the graph of adjacent optimality regions,
  crossing each facet with one small LP.
* :func:`enumerate_approx_gt` walks random straight lines through the
  polytope and collects the regions they cross, under a budget.
* :func:`enumerate_pi_witness` grows the set with witness LPs whose size
  scales with the set itself.

:func:`brute_force_nondominated` checks every deterministic policy with a
margin LP and serves as the reference for small instances.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .errors import BudgetExceededError, InstanceTooLargeError
from .geometry import adjacent_reward, default_delta, line_exits, reward_opt_region
from .lp import LinearProgram, LpCounter, solve_lp
from .mdp import Mdp, bellman_slack, canonical_key, occupancy_of, solve_optimal
from .rewards import RewardPolytope, chebyshev_center, random_interior_point, to_full_reward

WITNESS_EPS = 1e-8
BRUTE_FORCE_LIMIT = 100_000


@dataclass
class NondominatedEntry:
    policy: np.ndarray
    occupancy: np.ndarray
    witness_w: np.ndarray
    projected: np.ndarray  # Phi^T occupancy: value is projected @ w + base
    base: float = 0.0  # r0 . occupancy

    @property
    def key(self) -> tuple:
        return tuple(int(a) for a in self.policy)


@dataclass
class NondominatedSet:
    entries: List[NondominatedEntry] = field(default_factory=list)
    index: Dict[tuple, int] = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return tuple(key) in self.index

    def __iter__(self):
        return iter(self.entries)

    def add(self, entry: NondominatedEntry) -> bool:
        """Insert unless the key is already present; True when inserted."""
        if entry.key in self.index:
            return False
        self.index[entry.key] = len(self.entries)
        self.entries.append(entry)
        return True

    def keys(self) -> List[tuple]:
        return [e.key for e in self.entries]

    def key_set(self) -> frozenset:
        return frozenset(self.index)

    @property
    def projected(self) -> np.ndarray:
        """``(|Gamma|, d)`` matrix of ``Phi^T g`` rows."""
        if not self.entries:
            return np.zeros((0, 0))
        return np.array([e.projected for e in self.entries])

    @property
    def bases(self) -> np.ndarray:
        return np.array([e.base for e in self.entries])

    @property
    def occupancies(self) -> np.ndarray:
        """Occupancy vectors as columns, ``(n_pairs, |Gamma|)``."""
        return np.array([e.occupancy for e in self.entries]).T

    def subset(self, keys) -> "NondominatedSet":
        out = NondominatedSet()
        for k in keys:
            out.add(self.entries[self.index[tuple(k)]])
        return out


@dataclass
class EnumerationBudget:
    max_policies: Optional[int] = None
    max_lines: Optional[int] = None
    max_millis: Optional[float] = None
    stall_lines: Optional[int] = None

    def is_finite(self) -> bool:
        return any(v is not None for v in (self.max_policies, self.max_lines, self.max_millis, self.stall_lines))


def make_entry(mdp: Mdp, polytope: RewardPolytope, policy, w) -> NondominatedEntry:
    f = occupancy_of(mdp, policy)
    key = canonical_key(mdp, policy)
    phi = polytope.phi(mdp.n_pairs)
    return NondominatedEntry(
        np.array(key, dtype=int), f, np.asarray(w, dtype=float).copy(), phi.T @ f, float(polytope.base(mdp.n_pairs) @ f)
    )


def start_point(mdp: Mdp, polytope: RewardPolytope, margin: float = 1e-7, tries: int = 64):
    """A deterministic interior starting parameter with a strictly optimal policy.

    Starts at the Chebyshev center. Linear reward maps make the center of a
    symmetric polytope the zero reward when there is no base reward, where
    every policy ties, so the point
    is nudged along a fixed pseudo-random sequence of directions inside the
    inscribed ball until no Bellman slack is within ``margin`` of zero.
    """
    center, radius = chebyshev_center(polytope)
    rng = np.random.default_rng(0)
    w = center
    for k in range(tries):
        r = to_full_reward(polytope, w)
        policy, v = solve_optimal(mdp, r)
        slack = bellman_slack(mdp, r, policy, v)
        slack[np.arange(mdp.n_states), policy] = -np.inf
        if mdp.n_actions == 1 or slack.max() < -margin:
            return w, policy
        u = rng.normal(size=polytope.dim)
        w = center + 0.5 * radius * (0.5 + 0.5 * (k + 1) / tries) * u / np.linalg.norm(u)
    return w, policy


class _Clock:
    def __init__(self, max_millis):
        self.t0 = time.perf_counter()
        self.max_millis = max_millis

    @property
    def millis(self) -> float:
        return 1000.0 * (time.perf_counter() - self.t0)

    def expired(self) -> bool:
        return self.max_millis is not None and self.millis > self.max_millis


# ---------------------------------------------------------------------------
# geometric traversal


def enumerate_gt(
    mdp: Mdp,
    polytope: RewardPolytope,
    delta: Optional[float] = None,
    threads: int = 1,
    budget: Optional[EnumerationBudget] = None,
    skip_known: bool = True,
) -> NondominatedSet:
    """Breadth-first traversal of adjacent optimality regions.

    Each dequeued region is rebuilt from its Bellman slacks, every facet is
    crossed with :func:`adjacent_reward`, and the policy optimal just across
    is solved for. Regions are expanded per raw action vector so that
    policies differing only on unreachable states are still traversed, while
    the returned set is keyed by canonical action tuples.

    With ``skip_known`` a facet tagged by a single ``(s, a)`` is not crossed
    when the one-switch neighbor ``pi[s] = a`` was already expanded, since the
    crossing LP could only rediscover it.
    """
    budget = budget or EnumerationBudget()
    delta = default_delta(polytope) if delta is None else delta
    counter = LpCounter()
    clock = _Clock(budget.max_millis)
    out = NondominatedSet()
    stats = {"regions": 0, "skipped_facets": 0}

    w0, pol0 = start_point(mdp, polytope)
    out.add(make_entry(mdp, polytope, pol0, w0))
    expanded = {tuple(int(a) for a in pol0)}
    frontier = deque([(w0, pol0)])

    def expand(item):
        w, pol = item
        region = reward_opt_region(mdp, polytope, w, pol, check=False)
        found = []
        skipped = 0
        for i in range(len(region)):
            tags = region.tags[i]
            if skip_known and len(tags) == 1:
                s, a = tags[0]
                neighbor = pol.copy()
                neighbor[s] = a
                if tuple(int(x) for x in neighbor) in expanded:
                    skipped += 1
                    continue
            w2 = adjacent_reward(i, region, polytope, delta, counter)
            if w2 is None:
                continue
            pol2, _ = solve_optimal(mdp, to_full_reward(polytope, w2), init=pol)
            found.append((w2, pol2))
        return found, skipped

    def merge(found):
        for w2, pol2 in found:
            raw = tuple(int(a) for a in pol2)
            if raw in expanded:
                continue
            expanded.add(raw)
            frontier.append((w2, pol2))
            out.add(make_entry(mdp, polytope, pol2, w2))

    def check_budget():
        if clock.expired() or (budget.max_policies is not None and len(out) >= budget.max_policies):
            out.stats = _finish_stats(stats, counter, clock, "budget")
            raise BudgetExceededError("enumeration budget exhausted", out)

    if threads <= 1:
        while frontier:
            check_budget()
            found, skipped = expand(frontier.popleft())
            stats["regions"] += 1
            stats["skipped_facets"] += skipped
            merge(found)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while frontier:
                check_budget()
                batch = list(frontier)
                frontier.clear()
                for found, skipped in pool.map(expand, batch):
                    stats["regions"] += 1
                    stats["skipped_facets"] += skipped
                    merge(found)
    out.stats = _finish_stats(stats, counter, clock, "complete")
    return out


def _finish_stats(stats, counter, clock, reason):
    done = dict(stats)
    done["lps"] = counter.count
    done["wall_ms"] = clock.millis
    done["stop_reason"] = reason
    return done


# ---------------------------------------------------------------------------
# approximate line traversal


def enumerate_approx_gt(
    mdp: Mdp,
    polytope: RewardPolytope,
    budget: EnumerationBudget,
    seed: int = 0,
    delta: Optional[float] = None,
    stop_when: Optional[Callable[[NondominatedSet], bool]] = None,
    max_steps: int = 100_000,
) -> NondominatedSet:
    """Collect the regions crossed by random lines through the polytope.

    Each line starts at a seeded random interior point with a uniform random
    direction and is walked forward and backward, one region at a time,
    until it leaves the polytope. ``budget.max_lines`` counts completed
    lines; ``stop_when`` is consulted after every line.
    """
    if not budget.is_finite() and stop_when is None:
        raise ValueError("approximate enumeration needs a finite budget or a stop condition")
    delta = default_delta(polytope) if delta is None else delta
    rng = np.random.default_rng(seed)
    clock = _Clock(budget.max_millis)
    out = NondominatedSet()
    stats = {"regions": 0, "lines": 0}
    stall = 0
    reason = "complete"

    def record(pol, w):
        return out.add(make_entry(mdp, polytope, pol, w))

    while True:
        if budget.max_lines is not None and stats["lines"] >= budget.max_lines:
            reason = "max_lines"
            break
        if budget.stall_lines is not None and stall >= budget.stall_lines:
            reason = "stall"
            break
        if budget.max_policies is not None and len(out) >= budget.max_policies:
            reason = "max_policies"
            break
        if clock.expired():
            reason = "max_millis"
            break
        w0 = random_interior_point(polytope, rng)
        u = rng.normal(size=polytope.dim)
        u /= np.linalg.norm(u)
        pol0, _ = solve_optimal(mdp, to_full_reward(polytope, w0))
        added = int(record(pol0, w0))
        for sign in (1.0, -1.0):
            direction = sign * u
            w, pol = w0, pol0
            progress = 0.0
            for _ in range(max_steps):
                if clock.expired():
                    break
                region = reward_opt_region(mdp, polytope, w, pol, check=False)
                stats["regions"] += 1
                nxt, _ = line_exits(region, polytope, w, direction, delta)
                if nxt is None:
                    break
                along = float((nxt - w0) @ direction)
                if along <= progress + 0.5 * delta:
                    break
                progress = along
                w = nxt
                pol, _ = solve_optimal(mdp, to_full_reward(polytope, w), init=pol)
                added += int(record(pol, w))
        stats["lines"] += 1
        stall = 0 if added else stall + 1
        if stop_when is not None and stop_when(out):
            reason = "target"
            break
    out.stats = _finish_stats(stats, LpCounter(), clock, reason)
    return out


# ---------------------------------------------------------------------------
# witness baseline


def _margin_lp(
    projected_others: np.ndarray,
    target: np.ndarray,
    polytope: RewardPolytope,
    cap: Optional[float] = None,
    bases_others=None,
    base_target: float = 0.0,
):
    """``max eps`` s.t. ``A w <= b`` and ``p_j . w + q_j + eps <= target . w + q_t`` for every row ``p_j``."""
    d = polytope.dim
    k = projected_others.shape[0]
    rows = np.c_[projected_others - target, np.ones(k)]
    rhs = np.zeros(k) if bases_others is None else base_target - np.asarray(bases_others, dtype=float)
    return LinearProgram.build(
        np.r_[np.zeros(d), 1.0],
        ub=(np.vstack([np.c_[polytope.a_matrix, np.zeros(polytope.n_constraints)], rows]),
            np.r_[polytope.b_vector, rhs]),
        upper=None if cap is None else np.r_[np.full(d, np.inf), cap],
        maximize=True,
    )


def local_adjustment(mdp: Mdp, entry: NondominatedEntry, s: int, a: int) -> np.ndarray:
    """Occupancy of the entry's policy with state ``s`` switched to action ``a``."""
    pol = entry.policy.copy()
    pol[s] = a
    return occupancy_of(mdp, pol)


def _witness_lp(occupancies: np.ndarray, g: np.ndarray, polytope: RewardPolytope, n_pairs: int) -> LinearProgram:
    """Witness LP over the full reward vector.

    Variables are ``(r, w, eps)`` with ``r = r0 + Phi w`` as equality rows,
    ``A w <= b``, and ``r . (f' - g) + eps <= 0`` for every column ``f'``.
    """
    d = polytope.dim
    k = occupancies.shape[1]
    phi = polytope.phi(n_pairs)
    zeros = np.zeros
    ub_rows = np.vstack([
        np.c_[zeros((polytope.n_constraints, n_pairs)), polytope.a_matrix, zeros(polytope.n_constraints)],
        np.c_[occupancies.T - g, zeros((k, d)), np.ones(k)],
    ])
    eq_rows = np.c_[np.eye(n_pairs), -phi, zeros(n_pairs)]
    return LinearProgram.build(
        np.r_[zeros(n_pairs + d), 1.0],
        ub=(ub_rows, np.r_[polytope.b_vector, zeros(k)]),
        eq=(eq_rows, polytope.base(n_pairs)),
        maximize=True,
    )


def find_witness_reward(
    mdp: Mdp,
    entry: NondominatedEntry,
    s: int,
    a: int,
    gamma_set: NondominatedSet,
    polytope: RewardPolytope,
    counter: Optional[LpCounter] = None,
    adjusted: Optional[np.ndarray] = None,
) -> Optional[np.ndarray]:
    """A parameter where switching ``entry`` to ``a`` at ``s`` beats all of ``gamma_set``.

    Maximizes the smallest value margin of the adjusted policy over every
    member; returns the parameter when that margin exceeds ``WITNESS_EPS``.
    """
    g = local_adjustment(mdp, entry, s, a) if adjusted is None else adjusted
    out = solve_lp(_witness_lp(gamma_set.occupancies, g, polytope, mdp.n_pairs), counter=counter)
    if not out.optimal or out.solution[-1] <= WITNESS_EPS:
        return None
    return out.solution[mdp.n_pairs : mdp.n_pairs + polytope.dim]


def enumerate_pi_witness(
    mdp: Mdp,
    polytope: RewardPolytope,
    budget: Optional[EnumerationBudget] = None,
) -> NondominatedSet:
    """Agenda-driven witness search, processed first-in first-out."""
    budget = budget or EnumerationBudget()
    counter = LpCounter()
    clock = _Clock(budget.max_millis)
    out = NondominatedSet()
    stats = {"regions": 0, "witnesses": 0}

    w0, pol0 = start_point(mdp, polytope)
    first = make_entry(mdp, polytope, pol0, w0)
    out.add(first)
    agenda = deque([first])
    while agenda:
        entry = agenda.popleft()
        stats["regions"] += 1
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                if a == entry.policy[s]:
                    continue
                adjusted = local_adjustment(mdp, entry, s, a)
                while True:
                    if clock.expired() or (budget.max_policies is not None and len(out) >= budget.max_policies):
                        out.stats = _finish_stats(stats, counter, clock, "budget")
                        raise BudgetExceededError("enumeration budget exhausted", out)
                    w = find_witness_reward(mdp, entry, s, a, out, polytope, counter, adjusted)
                    if w is None:
                        break
                    pol, _ = solve_optimal(mdp, to_full_reward(polytope, w), init=entry.policy)
                    new = make_entry(mdp, polytope, pol, w)
                    if not out.add(new):
                        break
                    stats["witnesses"] += 1
                    agenda.append(new)
    out.stats = _finish_stats(stats, counter, clock, "complete")
    return out


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_nondominated(
    mdp: Mdp,
    polytope: RewardPolytope,
    margin: float = 1e-8,
    backend: str = "highs",
) -> NondominatedSet:
    """Every deterministic policy that beats all others by more than ``margin`` somewhere in R.

    Policies with identical occupancy (differing only on unreachable states)
    are merged under their canonical key before the test.
    """
    n, m = mdp.n_states, mdp.n_actions
    if m**n > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(f"{m}^{n} policies exceeds the brute-force limit of {BRUTE_FORCE_LIMIT}")
    phi = polytope.phi(mdp.n_pairs)
    clock = _Clock(None)
    counter = LpCounter()
    candidates: Dict[tuple, np.ndarray] = {}
    for pol in itertools.product(range(m), repeat=n):
        key = canonical_key(mdp, pol)
        if key not in candidates:
            candidates[key] = occupancy_of(mdp, pol)
    keys = list(candidates)
    occ = np.array([candidates[k] for k in keys])
    projected = occ @ phi
    bases = occ @ polytope.base(mdp.n_pairs)
    out = NondominatedSet()
    for i, key in enumerate(keys):
        lp = _margin_lp(
            np.delete(projected, i, axis=0), projected[i], polytope, 1.0, np.delete(bases, i), float(bases[i])
        )
        res = solve_lp(lp, backend=backend, counter=counter)
        if res.optimal and res.solution[-1] > margin:
            w = res.solution[: polytope.dim]
            out.add(NondominatedEntry(np.array(key, dtype=int), occ[i], w, projected[i], float(bases[i])))
    out.stats = _finish_stats({"candidates": len(keys)}, counter, clock, "complete")
    return out

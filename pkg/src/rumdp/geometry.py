"""Reward optimality regions and how to step out of them.

A policy ``pi`` stays optimal for reward ``r0 + Phi w`` while every Bellman
slack ``Q(s, a) - V(s)`` is nonpositive. With ``V = (I - gamma T_pi)^-1 r_pi``
each slack is affine in ``w``, so the region is an intersection of
halfspaces ``c . w <= d`` in parameter space. Without a base reward ``r0``
every ``d`` is zero and regions are cones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import PreconditionError
from .lp import LinearProgram, LpCounter, solve_lp
from .mdp import Mdp
from .rewards import RewardPolytope, contains

PARALLEL_TOL = 1e-12
DEDUP_TOL = 1e-9
FACE_TOL = 1e-12


@dataclass
class Hyperplane:
    c: np.ndarray
    d_h: float
    tags: Tuple[Tuple[int, int], ...]

    @property
    def tag(self):
        return self.tags[0]


@dataclass
class OptRegion:
    """Halfspaces ``normals @ w <= offsets`` plus a point known to lie inside."""

    normals: np.ndarray
    offsets: np.ndarray
    tags: List[Tuple[Tuple[int, int], ...]]
    anchor: np.ndarray
    policy: np.ndarray
    scales: np.ndarray = field(default=None)

    @property
    def hyperplanes(self) -> List[Hyperplane]:
        return [Hyperplane(self.normals[i], float(self.offsets[i]), self.tags[i]) for i in range(len(self))]

    def __len__(self):
        return self.normals.shape[0]

    def slack(self, w: np.ndarray) -> np.ndarray:
        return self.normals @ w - self.offsets


def default_delta(polytope: RewardPolytope) -> float:
    return 1e-6 * (1.0 + float(np.max(np.abs(polytope.b_vector), initial=0.0)))


def value_map(mdp: Mdp, phi: np.ndarray, policy) -> np.ndarray:
    """Matrix ``M`` with ``V^pi(Phi w) = M w``, shape ``(n, d)``."""
    rows = mdp.policy_rows(policy)
    a = np.eye(mdp.n_states) - mdp.gamma * mdp.transition[rows]
    return np.linalg.solve(a, phi[rows])


def slack_matrix(mdp: Mdp, phi: np.ndarray, policy) -> np.ndarray:
    """Rows ``c_sa`` with ``c_sa . w = Q(s, a) - V(s)`` under reward ``Phi w``.

    Passing a 1-d ``phi`` (a fixed reward vector) gives the slacks themselves.
    """
    m_val = value_map(mdp, phi, policy)
    owner = np.repeat(np.arange(mdp.n_states), mdp.n_actions)
    return phi + mdp.gamma * (mdp.transition @ m_val) - m_val[owner]


def reward_opt_region(
    mdp: Mdp,
    polytope: RewardPolytope,
    w: np.ndarray,
    policy,
    check: bool = True,
    tol: float = 1e-7,
) -> OptRegion:
    """Halfspaces in parameter space on which ``policy`` remains optimal."""
    policy = np.asarray(policy, dtype=int)
    w = np.asarray(w, dtype=float)
    phi = polytope.phi(mdp.n_pairs)
    coeffs = slack_matrix(mdp, phi, policy)
    consts = slack_matrix(mdp, polytope.base(mdp.n_pairs), policy) if polytope.offset is not None else None
    chosen = mdp.policy_rows(policy)
    keep = np.ones(mdp.n_pairs, dtype=bool)
    keep[chosen] = False
    idx = np.flatnonzero(keep)
    coeffs = coeffs[idx]
    consts = np.zeros(idx.size) if consts is None else consts[idx]
    if check and idx.size:
        slack = coeffs @ w + consts
        scale = 1.0 + np.abs(consts) + np.abs(coeffs).sum(axis=1) * np.max(np.abs(w), initial=0.0)
        if np.any(slack > tol * scale):
            raise PreconditionError("policy is not optimal at the given reward parameter")
    norms = np.linalg.norm(coeffs, axis=1)
    live = norms >= 1e-12
    idx, coeffs, consts, norms = idx[live], coeffs[live], consts[live], norms[live]
    normals = coeffs / norms[:, None]
    offsets = -consts / norms

    kept_normals: List[np.ndarray] = []
    kept_offsets: List[float] = []
    kept_tags: List[list] = []
    kept_scales: List[float] = []
    for i, c, off, norm in zip(idx, normals, offsets, norms):
        s, a = divmod(int(i), mdp.n_actions)
        for j, other in enumerate(kept_normals):
            if np.max(np.abs(other - c)) <= DEDUP_TOL and abs(kept_offsets[j] - off) <= DEDUP_TOL:
                kept_tags[j].append((s, a))
                break
        else:
            kept_normals.append(c)
            kept_offsets.append(float(off))
            kept_tags.append([(s, a)])
            kept_scales.append(float(norm))
    h = len(kept_normals)
    return OptRegion(
        normals=np.array(kept_normals).reshape(h, polytope.dim),
        offsets=np.array(kept_offsets),
        tags=[tuple(t) for t in kept_tags],
        anchor=w,
        policy=policy,
        scales=np.array(kept_scales),
    )


def _resolve(h, region: OptRegion) -> int:
    if isinstance(h, (int, np.integer)):
        return int(h)
    for i in range(len(region)):
        if region.tags[i] == h.tags or (
            np.max(np.abs(region.normals[i] - h.c)) <= DEDUP_TOL and abs(region.offsets[i] - h.d_h) <= DEDUP_TOL
        ):
            return i
    raise ValueError("hyperplane does not belong to the region")


def adjacent_reward(
    h,
    region: OptRegion,
    polytope: RewardPolytope,
    delta: float,
    counter: Optional[LpCounter] = None,
) -> Optional[np.ndarray]:
    """A parameter just across facet ``h`` of ``region``, or None.

    The returned point satisfies ``A w <= b``, every other halfspace of the
    region, and ``c_h . w >= d_h + delta``. It is placed ``delta`` beyond the
    center of the facet (largest ball inside the facet, found by LP) so that
    it lands in the region sharing that facet rather than at a vertex where
    several regions meet. A face with no inscribed ball means ``h`` is
    redundant and nothing lies across it. When the facet is thinner than
    ``delta`` the reversed-inequality cell is centered directly instead.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    i = _resolve(h, region)
    d = polytope.dim
    a, b, norms = polytope.a_matrix, polytope.b_vector, polytope.row_norms
    others = np.ones(len(region), dtype=bool)
    others[i] = False
    c_h, d_h = region.normals[i], region.offsets[i]
    n_a, n_o = a.shape[0], int(others.sum())

    # rows: polytope, other region halfspaces, and (cell LP only) the reversed h
    rows = np.zeros((n_a + n_o + 1, d + 1))
    rows[:n_a, :d] = a
    rows[:n_a, d] = norms
    rows[n_a : n_a + n_o, :d] = region.normals[others]
    rows[n_a : n_a + n_o, d] = 1.0
    rhs = np.empty(n_a + n_o + 1)
    rhs[:n_a] = b
    rhs[n_a : n_a + n_o] = region.offsets[others]
    objective = np.zeros(d + 1)
    objective[d] = 1.0
    face = np.zeros((1, d + 1))
    face[0, :d] = c_h

    facet_lp = LinearProgram.build(
        objective, ub=(rows[:-1], rhs[:-1]), eq=(face, [d_h]), maximize=True
    )
    out = solve_lp(facet_lp, counter=counter)
    if not out.optimal or out.solution[-1] <= FACE_TOL:
        # h touches the region in less than a facet: nothing lies across it
        return None
    if out.solution[-1] >= delta:
        return out.solution[:d] + delta * c_h

    # facet too thin for a delta step: center the reversed cell
    rows[-1, :d] = -c_h
    rows[-1, d] = 1.0
    rhs[-1] = -d_h - delta
    upper = np.full(d + 1, np.inf)
    upper[d] = 1.0
    out = solve_lp(LinearProgram.build(objective, ub=(rows, rhs), upper=upper, maximize=True), counter=counter)
    if not out.optimal or out.solution[-1] < 0.0:
        return None
    return out.solution[:d]


def _exit_params(normals, offsets, origin, direction):
    denom = normals @ direction
    ok = np.abs(denom) > PARALLEL_TOL
    t = np.full(denom.shape, np.nan)
    t[ok] = (offsets[ok] - normals[ok] @ origin) / denom[ok]
    return t, denom


def line_exits(region: OptRegion, polytope: RewardPolytope, origin, direction, delta: float):
    """Points just past the region boundary along ``origin + t * direction``.

    Returns ``(forward, backward)``; either is None when that side meets the
    boundary of the polytope first, runs parallel to every facet, or the
    stepped point leaves the polytope. The step past a facet is sized so the
    point sits ``delta`` beyond it in normal distance.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    t_reg, denom = _exit_params(region.normals, region.offsets, origin, direction)
    t_box, _ = _exit_params(polytope.a_matrix, polytope.b_vector, origin, direction)
    result = []
    for sign in (1.0, -1.0):
        side = sign * t_reg
        cand = np.flatnonzero(side > PARALLEL_TOL)
        if cand.size == 0:
            result.append(None)
            continue
        j = cand[np.argmin(side[cand])]
        t_hit = t_reg[j]
        box_side = sign * t_box
        box_hits = box_side[box_side > PARALLEL_TOL]
        if box_hits.size and box_hits.min() < abs(t_hit):
            result.append(None)
            continue
        step = delta / abs(denom[j])
        point = origin + (t_hit + sign * step) * direction
        result.append(point if contains(polytope, point, 0.0) else None)
    return result[0], result[1]


def line_exit_points(region: OptRegion, polytope: RewardPolytope, origin, direction, delta: float) -> List[np.ndarray]:
    forward, backward = line_exits(region, polytope, origin, direction, delta)
    return [p for p in (forward, backward) if p is not None]

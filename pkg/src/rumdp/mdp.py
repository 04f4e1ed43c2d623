"""Finite discounted MDPs: evaluation, optimal control and occupancy frequencies.

Rewards and Q-values are flat vectors of length ``n_states * n_actions``
indexed by ``s * n_actions + a``; transitions use the same row order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import InvalidDiscountError, InvalidInstanceError, LinearSolveError
from .lp import LinearProgram, solve_lp

TIE_TOL = 1e-9
ZERO_MASS = 1e-12


@dataclass(eq=False)
class Mdp:
    """States, actions, transition kernel, start distribution and discount.

    ``transition`` has shape ``(n_states * n_actions, n_states)``.
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    alpha: np.ndarray
    gamma: float

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.gamma = float(self.gamma)

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    @cached_property
    def kernel(self) -> np.ndarray:
        """Transition probabilities viewed as ``(n, m, n)``."""
        return self.transition.reshape(self.n_states, self.n_actions, self.n_states)

    def validate(self):
        n, m = self.n_states, self.n_actions
        if n < 1 or m < 1:
            raise InvalidInstanceError("n_states and n_actions must be positive")
        if self.transition.shape != (n * m, n):
            raise InvalidInstanceError(f"transition has shape {self.transition.shape}, expected {(n * m, n)}")
        if self.alpha.shape != (n,):
            raise InvalidInstanceError(f"alpha has length {self.alpha.size}, expected {n}")
        if not (0.0 <= self.gamma < 1.0):
            raise InvalidInstanceError(f"gamma={self.gamma} outside [0, 1)")
        if not np.all(np.isfinite(self.transition)) or np.any(self.transition < 0):
            raise InvalidInstanceError("transition entries must be finite and nonnegative")
        row_err = np.abs(self.transition.sum(axis=1) - 1.0)
        if np.any(row_err > 1e-9):
            bad = int(np.argmax(row_err))
            s, a = divmod(bad, m)
            raise InvalidInstanceError(f"transition row (s={s}, a={a}) sums to {self.transition[bad].sum()!r}")
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > 1e-9:
            raise InvalidInstanceError("alpha must be a probability distribution")
        return self

    def policy_rows(self, policy) -> np.ndarray:
        """Flat indices ``s * m + policy[s]``."""
        return np.arange(self.n_states) * self.n_actions + np.asarray(policy, dtype=int)

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.n_states == other.n_states
            and self.n_actions == other.n_actions
            and self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.alpha, other.alpha)
        )


def build_e_matrix(mdp: Mdp) -> np.ndarray:
    """``E(sa, s') = T(s, a, s') - [s == s'] / gamma``, shape ``(nm, n)``."""
    if mdp.gamma == 0.0:
        raise InvalidDiscountError("E is undefined for gamma = 0")
    e = mdp.transition.copy()
    owner = np.repeat(np.arange(mdp.n_states), mdp.n_actions)
    e[np.arange(mdp.n_pairs), owner] -= 1.0 / mdp.gamma
    return e


def _solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("non-finite solution")
    return x


def evaluate_policy(mdp: Mdp, reward: np.ndarray, policy) -> np.ndarray:
    """Solve ``V = r_pi + gamma T_pi V`` exactly."""
    rows = mdp.policy_rows(policy)
    t_pi = mdp.transition[rows]
    return _solve(np.eye(mdp.n_states) - mdp.gamma * t_pi, np.asarray(reward, dtype=float)[rows])


def q_function(mdp: Mdp, reward: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.asarray(reward, dtype=float) + mdp.gamma * (mdp.transition @ v)


def greedy_policy(mdp: Mdp, q: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Smallest action index whose Q is within ``tol`` of the state's best."""
    q = q.reshape(mdp.n_states, mdp.n_actions)
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tol, axis=1)


def solve_optimal(mdp: Mdp, reward: np.ndarray, init: Optional[np.ndarray] = None, max_iter: int = 10_000):
    """Optimal deterministic policy and its value, by policy iteration.

    The returned policy is canonical: among near-tied actions the smallest
    index wins, so the output does not depend on ``init``. Ties are judged
    relative to the reward magnitude (``TIE_TOL * max |r|``) so that tiny
    rewards, such as points just across a region boundary near the origin,
    keep their genuine preferences.
    """
    reward = np.asarray(reward, dtype=float)
    n, m = mdp.n_states, mdp.n_actions
    policy = np.zeros(n, dtype=int) if init is None else np.array(init, dtype=int)
    idx = np.arange(n)
    for _ in range(max_iter):
        v = evaluate_policy(mdp, reward, policy)
        q = q_function(mdp, reward, v).reshape(n, m)
        current = q[idx, policy]
        best_a = np.argmax(q, axis=1)
        improve = q[idx, best_a] > current + 1e-12 * (1.0 + np.abs(current))
        if not improve.any():
            break
        policy = np.where(improve, best_a, policy)
    canon = greedy_policy(mdp, q, TIE_TOL * float(np.max(np.abs(reward), initial=0.0)))
    if not np.array_equal(canon, policy):
        policy = canon
        v = evaluate_policy(mdp, reward, policy)
    return policy, v


def bellman_slack(mdp: Mdp, reward: np.ndarray, policy, v: Optional[np.ndarray] = None) -> np.ndarray:
    """``Q(s, a) - V(s)`` for every pair, shape ``(n, m)``."""
    if v is None:
        v = evaluate_policy(mdp, reward, policy)
    q = q_function(mdp, reward, v).reshape(mdp.n_states, mdp.n_actions)
    return q - v[:, None]


def occupancy_of(mdp: Mdp, policy) -> np.ndarray:
    """Discounted state-action visit mass of a deterministic policy."""
    rows = mdp.policy_rows(policy)
    t_pi = mdp.transition[rows]
    state_mass = _solve(np.eye(mdp.n_states) - mdp.gamma * t_pi.T, mdp.alpha)
    f = np.zeros(mdp.n_pairs)
    f[rows] = state_mass
    return f


def policy_of(f: np.ndarray, n_states: int, n_actions: int):
    """Stochastic and deterministic policies read off an occupancy vector.

    States whose mass is below ``ZERO_MASS`` get action 0 (one-hot in the
    stochastic matrix as well).
    """
    f = np.asarray(f, dtype=float).reshape(n_states, n_actions)
    mass = f.sum(axis=1)
    live = mass > ZERO_MASS
    stochastic = np.zeros((n_states, n_actions))
    stochastic[live] = f[live] / mass[live, None]
    stochastic[~live, 0] = 1.0
    clipped = np.maximum(f, 0.0)
    best = clipped.max(axis=1, keepdims=True)
    deterministic = np.argmax(clipped >= best - 1e-12 * np.maximum(best, 1.0), axis=1)
    deterministic[~live] = 0
    return stochastic, deterministic


def value_of_occupancy(reward: np.ndarray, f: np.ndarray) -> float:
    return float(np.dot(reward, f))


def occupancy_residual(mdp: Mdp, f: np.ndarray) -> float:
    """``max |gamma E^T f + alpha|``."""
    return float(np.max(np.abs(mdp.gamma * build_e_matrix(mdp).T @ f + mdp.alpha)))


def canonical_key(mdp: Mdp, policy) -> tuple:
    """Action tuple with unreachable states mapped to action 0."""
    _, det = policy_of(occupancy_of(mdp, policy), mdp.n_states, mdp.n_actions)
    return tuple(int(a) for a in det)


def dual_lp_occupancy(mdp: Mdp, reward: np.ndarray, backend: str = "highs"):
    """Optimal occupancy from the dual LP ``max r.f s.t. gamma E^T f + alpha = 0, f >= 0``.

    Kept as an independent oracle for :func:`solve_optimal`.
    """
    e = build_e_matrix(mdp)
    lp = LinearProgram.build(
        reward,
        eq=(mdp.gamma * e.T, -mdp.alpha),
        lower=np.zeros(mdp.n_pairs),
        maximize=True,
    )
    out = solve_lp(lp, backend=backend)
    if not out.optimal:
        raise LinearSolveError(f"dual LP returned {out.status}")
    return out.solution, out.objective_value

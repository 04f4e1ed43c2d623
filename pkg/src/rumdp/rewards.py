"""Feasible reward sets ``{w | A w <= b}`` mapped to full rewards by ``r = Phi w``."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import (
    DegeneratePolytopeError,
    InfeasiblePolytopeError,
    InvalidInstanceError,
    UnboundedPolytopeError,
)
from .lp import LinearProgram, solve_lp


@dataclass(eq=False)
class RewardPolytope:
    """Reward parameter polytope with an optional factored basis.

    Full rewards are ``offset + basis @ w``. ``basis`` is ``(n_pairs, dim)``;
    ``None`` means the identity, so the parameters are the full reward
    vector. ``offset`` is a known base reward and defaults to zero.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray
    basis: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def __post_init__(self):
        self.a_matrix = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        self.b_vector = np.asarray(self.b_vector, dtype=float).ravel()
        if self.basis is not None:
            self.basis = np.asarray(self.basis, dtype=float)
            if self.basis.ndim != 2 or self.basis.shape[1] != self.dim:
                raise InvalidInstanceError("basis must have one column per parameter")
        if self.a_matrix.shape[0] != self.b_vector.size:
            raise InvalidInstanceError("a_matrix and b_vector row counts differ")
        if self.offset is not None:
            self.offset = np.asarray(self.offset, dtype=float).ravel()

    @property
    def dim(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.a_matrix.shape[0]

    @cached_property
    def row_norms(self) -> np.ndarray:
        return np.linalg.norm(self.a_matrix, axis=1)

    def phi(self, n_pairs: int) -> np.ndarray:
        """Dense basis matrix, materializing the identity when needed."""
        if self.basis is None:
            if n_pairs != self.dim:
                raise InvalidInstanceError(f"identity basis needs dim == {n_pairs}, got {self.dim}")
            return np.eye(n_pairs)
        if self.basis.shape[0] != n_pairs:
            raise InvalidInstanceError(f"basis has {self.basis.shape[0]} rows, expected {n_pairs}")
        return self.basis

    def base(self, n_pairs: int) -> np.ndarray:
        """The offset reward as a dense vector (zeros when absent)."""
        if self.offset is None:
            return np.zeros(n_pairs)
        if self.offset.size != n_pairs:
            raise InvalidInstanceError(f"offset has length {self.offset.size}, expected {n_pairs}")
        return self.offset

    @cached_property
    def bounding_box(self):
        """Per-coordinate ``(lower, upper)`` from 2d LPs.

        Raises UnboundedPolytopeError or InfeasiblePolytopeError.
        """
        d = self.dim
        lo, hi = np.empty(d), np.empty(d)
        for j in range(d):
            e = np.zeros(d)
            e[j] = 1.0
            for maximize, store in ((False, lo), (True, hi)):
                out = solve_lp(LinearProgram.build(e, ub=(self.a_matrix, self.b_vector), maximize=maximize))
                if out.status == "infeasible":
                    raise InfeasiblePolytopeError("no w satisfies A w <= b")
                if out.status == "unbounded":
                    raise UnboundedPolytopeError(f"coordinate {j} is unbounded")
                store[j] = out.objective_value
        return lo, hi

    def validate(self, n_pairs: Optional[int] = None):
        """Check nonempty interior, boundedness and basis rank."""
        if not np.all(np.isfinite(self.a_matrix)) or not np.all(np.isfinite(self.b_vector)):
            raise InvalidInstanceError("constraints must be finite")
        if self.basis is not None:
            if np.linalg.matrix_rank(self.basis) < self.dim:
                raise InvalidInstanceError("basis does not have full column rank")
        if self.offset is not None and not np.all(np.isfinite(self.offset)):
            raise InvalidInstanceError("offset must be finite")
        if n_pairs is not None:
            self.phi(n_pairs)
            self.base(n_pairs)
        if self.offset is not None and self.basis is not None and self.offset.size != self.basis.shape[0]:
            raise InvalidInstanceError("offset and basis disagree on the number of state-action pairs")
        self.bounding_box
        interior_point(self)
        return self

    def __eq__(self, other):
        if not isinstance(other, RewardPolytope):
            return NotImplemented
        if (self.basis is None) != (other.basis is None) or (self.offset is None) != (other.offset is None):
            return False
        return (
            np.array_equal(self.a_matrix, other.a_matrix)
            and np.array_equal(self.b_vector, other.b_vector)
            and (self.basis is None or np.array_equal(self.basis, other.basis))
            and (self.offset is None or np.array_equal(self.offset, other.offset))
        )


@dataclass
class RewardPoint:
    w: np.ndarray
    r: np.ndarray


def box_polytope(dim: int, halfwidth: float = 1.0, basis=None, offset=None) -> RewardPolytope:
    a = np.vstack([np.eye(dim), -np.eye(dim)])
    b = np.full(2 * dim, float(halfwidth))
    return RewardPolytope(a, b, basis, offset)


def to_full_reward(polytope: RewardPolytope, w: np.ndarray, n_pairs: Optional[int] = None) -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size != polytope.dim:
        raise ValueError(f"parameter has length {w.size}, expected {polytope.dim}")
    full = w.copy() if polytope.basis is None else polytope.basis @ w
    if polytope.offset is not None:
        full = full + polytope.offset
    return full


def contains(polytope: RewardPolytope, w: np.ndarray, tol: float = 0.0) -> bool:
    return bool(np.max(polytope.a_matrix @ np.asarray(w, dtype=float) - polytope.b_vector) <= tol)


def chebyshev_center(polytope: RewardPolytope):
    """Center and radius of the largest inscribed ball."""
    a, b = polytope.a_matrix, polytope.b_vector
    d = polytope.dim
    lp = LinearProgram.build(
        np.r_[np.zeros(d), 1.0],
        ub=(np.c_[a, polytope.row_norms], b),
        maximize=True,
    )
    out = solve_lp(lp)
    if out.status == "unbounded":
        raise UnboundedPolytopeError("polytope contains arbitrarily large balls")
    if not out.optimal:
        raise InfeasiblePolytopeError("no w satisfies A w <= b")
    radius = out.solution[-1]
    if radius < -1e-9:
        raise InfeasiblePolytopeError("no w satisfies A w <= b")
    return out.solution[:d], float(radius)


def interior_point(polytope: RewardPolytope) -> RewardPoint:
    center, radius = chebyshev_center(polytope)
    if radius <= 1e-12:
        raise DegeneratePolytopeError(f"polytope has empty interior (radius {radius:.3g})")
    return RewardPoint(center, to_full_reward(polytope, center))


def random_interior_point(polytope: RewardPolytope, rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
    """Uniform sample by rejection from the bounding box.

    Falls back to a random point on a random chord through the Chebyshev
    center when rejection keeps failing (thin polytopes).
    """
    lo, hi = polytope.bounding_box
    for _ in range(max_tries):
        w = rng.uniform(lo, hi)
        if contains(polytope, w):
            return w
    center, _ = chebyshev_center(polytope)
    u = rng.normal(size=polytope.dim)
    u /= np.linalg.norm(u)
    step = polytope.a_matrix @ u
    slack = polytope.b_vector - polytope.a_matrix @ center
    with np.errstate(divide="ignore"):
        t_max = np.min(np.where(step > 1e-12, slack / step, np.inf))
    return center + rng.uniform(0.0, t_max) * u

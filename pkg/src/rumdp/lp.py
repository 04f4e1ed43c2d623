"""Small dense linear programming layer.

Every LP in the package goes through :func:`solve_lp`. The default backend is
an embedded two-phase tableau simplex (Dantzig pricing with a switch to
Bland's rule once pivots stall), sized for the few-hundred-row problems the
enumerators create. ``backend="highs"`` routes the same problem through
``scipy.optimize.linprog`` and is used by the brute-force oracles so that the
oracle and the code it checks do not share a solver.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LpNumericalError

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-7
HARRIS_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, EQ, GE = "<=", "==", ">="

_DEFAULT_BACKEND = os.environ.get("RUMDP_LP_BACKEND", "simplex")


@dataclass
class LinearProgram:
    """``min`` or ``max`` of ``objective @ x`` subject to row relations and bounds.

    Rows are stored as a dense matrix with one relation string per row; the
    bounds default to a free variable.
    """

    objective: np.ndarray
    a_matrix: np.ndarray
    relations: Sequence[str]
    rhs: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    maximize: bool = False

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        k = self.objective.size
        self.a_matrix = np.asarray(self.a_matrix, dtype=float).reshape(-1, k)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.relations = tuple(self.relations)
        if len(self.relations) != self.a_matrix.shape[0] or self.rhs.size != self.a_matrix.shape[0]:
            raise ValueError("row count mismatch between a_matrix, relations and rhs")
        if any(r not in (LE, EQ, GE) for r in self.relations):
            raise ValueError(f"unknown relation in {set(self.relations)}")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective must be finite")
        self.lower = np.full(k, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(k, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @classmethod
    def build(cls, objective, *, ub=None, eq=None, ge=None, lower=None, upper=None, maximize=False):
        """Assemble an LP from ``(A, b)`` blocks for ``<=``, ``==`` and ``>=`` rows."""
        objective = np.asarray(objective, dtype=float).ravel()
        k = objective.size
        mats, rels, rhss = [], [], []
        for block, rel in ((ub, LE), (eq, EQ), (ge, GE)):
            if block is None:
                continue
            a, b = block
            a = np.asarray(a, dtype=float).reshape(-1, k)
            b = np.asarray(b, dtype=float).ravel()
            mats.append(a)
            rhss.append(b)
            rels.extend([rel] * a.shape[0])
        a_matrix = np.vstack(mats) if mats else np.zeros((0, k))
        rhs = np.concatenate(rhss) if rhss else np.zeros(0)
        return cls(objective, a_matrix, rels, rhs, lower, upper, maximize)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest row or bound violation of ``x`` (0 when feasible)."""
        lhs = self.a_matrix @ x
        rel = np.asarray(self.relations)
        viol = np.zeros_like(lhs)
        viol = np.where(rel == LE, lhs - self.rhs, viol)
        viol = np.where(rel == GE, self.rhs - lhs, viol)
        viol = np.where(rel == EQ, np.abs(lhs - self.rhs), viol)
        worst = float(viol.max(initial=0.0))
        worst = max(worst, float(np.max(self.lower - x, initial=0.0)), float(np.max(x - self.upper, initial=0.0)))
        return max(worst, 0.0)


@dataclass
class LpOutcome:
    status: str
    solution: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    dual_values: Optional[np.ndarray] = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class LpCounter:
    """Thread-safe tally of LP solves, used for benchmark statistics."""

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, n: int = 1):
        with self._lock:
            self.count += n


def set_default_backend(name: str):
    global _DEFAULT_BACKEND
    if name not in ("simplex", "highs"):
        raise ValueError(f"unknown LP backend {name!r}")
    _DEFAULT_BACKEND = name


def default_backend() -> str:
    return _DEFAULT_BACKEND


def solve_lp(lp: LinearProgram, backend: Optional[str] = None, counter: Optional[LpCounter] = None) -> LpOutcome:
    """Solve ``lp`` and report status, primal solution, objective and row duals.

    Row duals are the sensitivities of the optimal objective to each row's
    right-hand side.
    """
    if counter is not None:
        counter.add()
    backend = backend or _DEFAULT_BACKEND
    if backend == "highs":
        return _solve_highs(lp)
    if backend != "simplex":
        raise ValueError(f"unknown LP backend {backend!r}")
    return _solve_simplex(lp)


# ---------------------------------------------------------------------------
# standard form conversion


@dataclass
class _StandardForm:
    """``min c x`` s.t. ``a x = b``, ``x >= 0`` except on ``free`` columns."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    var_sign: np.ndarray  # x = var_offset + var_sign * x_std[:k]
    var_offset: np.ndarray
    free: np.ndarray  # column indices of unrestricted variables
    row_sign: np.ndarray  # +1/-1 per row (flip applied to make b nonnegative)
    n_orig_rows: int
    infeasible_bounds: bool = False


def _standardize(lp: LinearProgram) -> _StandardForm:
    k = lp.n_vars
    lo, up = lp.lower, lp.upper
    has_lo = np.isfinite(lo)
    has_up = np.isfinite(up)
    offset = np.where(has_lo, lo, np.where(has_up, up, 0.0))
    sign = np.where(~has_lo & has_up, -1.0, 1.0)
    boxed = np.flatnonzero(has_lo & has_up)
    infeasible = bool(np.any(up[boxed] < lo[boxed]))

    a_struct = lp.a_matrix * sign
    rhs = lp.rhs - lp.a_matrix @ offset
    rel = np.asarray(lp.relations)
    if boxed.size:
        extra = np.zeros((boxed.size, k))
        extra[np.arange(boxed.size), boxed] = 1.0
        a_struct = np.vstack([a_struct, extra])
        rhs = np.concatenate([rhs, up[boxed] - lo[boxed]])
        rel = np.concatenate([rel, np.full(boxed.size, LE)])

    m = a_struct.shape[0]
    slack_rows = np.flatnonzero(rel != EQ)
    a = np.zeros((m, k + slack_rows.size))
    a[:, :k] = a_struct
    a[slack_rows, k + np.arange(slack_rows.size)] = np.where(rel[slack_rows] == LE, 1.0, -1.0)
    row_sign = np.where(rhs < 0, -1.0, 1.0)
    a *= row_sign[:, None]
    b = rhs * row_sign

    c = np.zeros(a.shape[1])
    c[:k] = sign * (-lp.objective if lp.maximize else lp.objective)
    return _StandardForm(
        a=a,
        b=b,
        c=c,
        var_sign=sign,
        var_offset=offset,
        free=np.flatnonzero(~has_lo & ~has_up),
        row_sign=row_sign,
        n_orig_rows=lp.a_matrix.shape[0],
        infeasible_bounds=infeasible,
    )


# ---------------------------------------------------------------------------
# tableau simplex


class _Unbounded(Exception):
    pass


def _pivot(t: np.ndarray, row: int, col: int):
    t[row] /= t[row, col]
    factor = t[:, col].copy()
    factor[row] = 0.0
    t -= np.outer(factor, t[row])


REINVERT_EVERY = 40
REINVERT_CHECK = 8  # shorter pivot runs are trusted without a final rebuild


def _reinvert(t, basis, base, cost) -> bool:
    """Rebuild ``t`` from the original rows ``base`` and the current basis.

    Long pivot sequences on a dense tableau accumulate rounding error; a
    fresh ``B^-1 [A | b]`` removes it. Returns False if the basis matrix is
    numerically singular, leaving ``t`` untouched.
    """
    m = t.shape[0] - 1
    try:
        body = np.linalg.solve(base[:, basis], base)
    except np.linalg.LinAlgError:
        return False
    if not np.all(np.isfinite(body)):
        return False
    t[:m] = body
    c_b = cost[basis]
    t[-1, :-1] = cost - c_b @ body[:, :-1]
    t[-1, -1] = -(c_b @ body[:, -1])
    return True


def _iterate(t, basis, allowed, max_iter, iters, base=None, cost=None):
    """Run primal simplex pivots on tableau ``t`` until optimal.

    The last row of ``t`` holds reduced costs and ``-objective``; columns with
    ``allowed`` false never enter. When the original rows ``base`` (``[A | b]``)
    and ``cost`` are given the tableau is periodically rebuilt from them, and
    always once more before optimality or unboundedness is declared.
    Returns the updated iteration count.
    """
    m = t.shape[0] - 1
    bland = False
    stalled = 0
    allowed_idx = np.flatnonzero(allowed)
    fresh = base is None
    since = 0
    while True:
        if not fresh and since >= REINVERT_EVERY:
            _reinvert(t, basis, base, cost)
            since = 0
        red = t[-1, allowed_idx]
        if bland:
            neg = np.flatnonzero(red < -OPT_TOL)
            col = allowed_idx[neg[0]] if neg.size else -1
        else:
            pos = int(np.argmin(red))
            col = allowed_idx[pos] if red[pos] < -OPT_TOL else -1
        if col < 0:
            if fresh or since < REINVERT_CHECK or not _reinvert(t, basis, base, cost):
                return iters
            since = 0
            continue
        column = t[:m, col]
        cand = np.flatnonzero(column > PIVOT_TOL * max(1.0, float(np.abs(column).max())))
        if cand.size == 0:
            if fresh or since < REINVERT_CHECK or not _reinvert(t, basis, base, cost):
                raise _Unbounded()
            since = 0
            continue
        rhs = np.maximum(t[cand, -1], 0.0)
        if bland:
            ratios = rhs / column[cand]
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * (1.0 + best)]
            row = int(ties[np.argmin(basis[ties])])
        else:
            # two-pass (Harris) ratio test: among rows whose ratio fits under a
            # slightly relaxed bound, pivot on the largest entry
            bound = ((rhs + HARRIS_TOL) / column[cand]).min()
            ratios = rhs / column[cand]
            ok = ratios <= bound
            pick = np.flatnonzero(ok)[np.argmax(column[cand][ok])]
            row = int(cand[pick])
            best = ratios[pick]
        if best <= 1e-12:
            stalled += 1
            if stalled > 50:
                bland = True
        else:
            stalled = 0
        _pivot(t, row, col)
        basis[row] = col
        iters += 1
        since += 1
        if iters > max_iter:
            raise LpNumericalError(f"simplex exceeded {max_iter} pivots")


def _solve_simplex(lp: LinearProgram) -> LpOutcome:
    n_bound_rows = int(np.isfinite(lp.lower).sum() + np.isfinite(lp.upper).sum())
    if lp.a_matrix.shape[0] + n_bound_rows > 3 * lp.n_vars:
        out = _solve_via_dual(lp)
        if out is not None:
            return out
    return _solve_primal(lp)


def _with_bounds_as_rows(lp: LinearProgram) -> LinearProgram:
    k = lp.n_vars
    eye = np.eye(k)
    lo_idx = np.flatnonzero(np.isfinite(lp.lower))
    up_idx = np.flatnonzero(np.isfinite(lp.upper))
    a = np.vstack([lp.a_matrix, eye[lo_idx], eye[up_idx]])
    rels = list(lp.relations) + [GE] * lo_idx.size + [LE] * up_idx.size
    rhs = np.concatenate([lp.rhs, lp.lower[lo_idx], lp.upper[up_idx]])
    return LinearProgram(lp.objective, a, rels, rhs, maximize=lp.maximize)


def _solve_via_dual(lp: LinearProgram) -> Optional[LpOutcome]:
    """Solve a tall LP through its dual, which has only ``n_vars`` rows.

    Returns None when the dual does not settle the primal status (dual
    infeasible) or the recovered primal point fails the feasibility check.
    """
    free = _with_bounds_as_rows(lp)
    c = -free.objective if lp.maximize else free.objective
    rel = np.asarray(free.relations)
    lower = np.where(rel == GE, 0.0, -np.inf)
    upper = np.where(rel == LE, 0.0, np.inf)
    k = free.n_vars
    dual = LinearProgram(free.rhs, free.a_matrix.T, [EQ] * k, c, lower, upper, maximize=True)
    out = _solve_primal(dual)
    if out.status == UNBOUNDED:
        return LpOutcome(INFEASIBLE, iterations=out.iterations)
    if out.status != OPTIMAL or out.dual_values is None:
        return None
    x = out.dual_values
    if lp.max_violation(x) > FEAS_TOL:
        return None
    y = out.solution[: lp.a_matrix.shape[0]]
    duals = -y if lp.maximize else y
    return LpOutcome(OPTIMAL, x, float(lp.objective @ x), duals, out.iterations)


def _eliminate_free(a, b, c, free):
    """Pivot each free column into its own row of ``[a | b]``.

    Returns the transformed ``(a, b, c)``, the locked rows (one per free
    column that appears in some row) and whether a free column with nonzero
    cost was absent from every remaining row, which makes a feasible LP
    unbounded.
    """
    m, n = a.shape
    t = np.empty((m + 1, n + 1))
    t[:m, :n] = a
    t[:m, n] = b
    t[m, :n] = c
    t[m, n] = 0.0
    is_open = np.ones(m, dtype=bool)
    locked: list = []
    pivots: list = []
    loose = False
    for j in free:
        col = np.where(is_open, np.abs(t[:m, j]), 0.0)
        row = int(np.argmax(col)) if m else 0
        if m == 0 or col[row] <= PIVOT_TOL * max(1.0, float(np.abs(t[:m, j]).max())):
            if abs(t[m, j]) > OPT_TOL:
                loose = True
            continue
        _pivot(t, row, j)
        is_open[row] = False
        locked.append(row)
        pivots.append(int(j))
    return t[:m, :-1], t[:m, -1], t[-1, :-1], np.array(locked, dtype=int), np.array(pivots, dtype=int), loose


def _phase_solve(a, b, c):
    """Two-phase simplex on ``min c x``, ``a x = b``, ``x >= 0``.

    Rows with negative ``b`` are flipped. Returns ``(status, basis,
    rows_kept, iters)`` with ``basis`` giving the basic column of each kept row.
    """
    flip = np.where(b < 0, -1.0, 1.0)
    a = a * flip[:, None]
    b = b * flip
    m, n = a.shape
    if m == 0:
        status = UNBOUNDED if np.any(c < -OPT_TOL) else OPTIMAL
        return status, np.zeros(0, dtype=int), np.zeros(0, dtype=int), 0

    # columns with a single positive entry can start as basic after scaling
    nz = a != 0.0
    single = np.flatnonzero(nz.sum(axis=0) == 1)
    single_rows = np.argmax(nz[:, single], axis=0)
    good = a[single_rows, single] > 0
    unit = np.full(m, -1)
    # reversed so the lowest column index wins for each row
    unit[single_rows[good][::-1]] = single[good][::-1]
    scale = np.ones(m)
    has_unit = unit >= 0
    scale[has_unit] = 1.0 / a[has_unit, unit[has_unit]]
    a = a * scale[:, None]
    b = b * scale

    need_art = np.flatnonzero(unit < 0)
    n_art = need_art.size
    t = np.zeros((m + 1, n + n_art + 1))
    t[:m, :n] = a
    t[:m, -1] = b
    basis = unit.copy()
    for i, row in enumerate(need_art):
        t[row, n + i] = 1.0
        basis[row] = n + i
    max_iter = 50 * (m + n + n_art) + 1000
    iters = 0

    if n_art:
        t[-1, :] = -t[need_art].sum(axis=0)
        t[-1, n : n + n_art] = 0.0
        base1 = np.hstack([a, np.eye(m)[:, need_art], b[:, None]])
        cost1 = np.zeros(n + n_art)
        cost1[n:] = 1.0
        try:
            iters = _iterate(t, basis, np.ones(n + n_art, dtype=bool), max_iter, iters, base1, cost1)
        except _Unbounded:  # pragma: no cover - phase 1 is bounded below by 0
            raise LpNumericalError("phase 1 reported unbounded")
        if -t[-1, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return INFEASIBLE, None, None, iters
        keep = np.ones(m, dtype=bool)
        for row in range(m):
            if basis[row] >= n:
                cand = np.flatnonzero(np.abs(t[row, :n]) > 1e-9)
                if cand.size:
                    col = int(cand[np.argmax(np.abs(t[row, cand]))])
                    _pivot(t, row, col)
                    basis[row] = col
                else:
                    # redundant equality row
                    keep[row] = False
        rows_kept = np.flatnonzero(keep)
        t = np.vstack([t[rows_kept][:, list(range(n)) + [t.shape[1] - 1]], np.zeros((1, n + 1))])
        basis = basis[rows_kept].copy()
    else:
        rows_kept = np.arange(m)

    t[-1, :] = 0.0
    t[-1, :n] = c
    for row, col in enumerate(basis):
        if t[-1, col] != 0.0:
            t[-1] -= t[-1, col] * t[row]
    base2 = np.hstack([a[rows_kept], b[rows_kept, None]])
    try:
        iters = _iterate(t, basis, np.ones(n, dtype=bool), max_iter, iters, base2, c)
    except _Unbounded:
        return UNBOUNDED, None, None, iters
    return OPTIMAL, basis, rows_kept, iters


def _solve_primal(lp: LinearProgram) -> LpOutcome:
    sf = _standardize(lp)
    if sf.infeasible_bounds:
        return LpOutcome(INFEASIBLE)
    m, n = sf.a.shape
    a, b, c, locked, pivots, loose = _eliminate_free(sf.a, sf.b, sf.c, sf.free)
    row_open = np.ones(m, dtype=bool)
    row_open[locked] = False
    col_rest = np.ones(n, dtype=bool)
    col_rest[sf.free] = False
    open_rows, rest = np.flatnonzero(row_open), np.flatnonzero(col_rest)
    status, basis, kept, iters = _phase_solve(a[open_rows][:, rest], b[open_rows], c[rest])
    if status == INFEASIBLE:
        return LpOutcome(INFEASIBLE, iterations=iters)
    if status == UNBOUNDED or loose:
        return LpOutcome(UNBOUNDED, iterations=iters)
    full_basis = np.concatenate([pivots, rest[basis]]).astype(int)
    full_rows = np.concatenate([locked, open_rows[kept]]).astype(int)
    return _finish(lp, sf, full_basis, full_rows, iters)


def _finish(lp, sf, basis, rows, iters) -> LpOutcome:
    """Primal point and row duals from the final basis, solved against the original rows."""
    n = sf.a.shape[1]
    x_std = np.zeros(n)
    duals = np.zeros(sf.n_orig_rows)
    if basis.size:
        bmat = sf.a[rows][:, basis]
        try:
            x_std[basis] = np.linalg.solve(bmat, sf.b[rows])
            y_rows = np.linalg.solve(bmat.T, sf.c[basis])
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("final basis is singular") from exc
        bounded = np.ones(n, dtype=bool)
        bounded[sf.free] = False
        x_std[bounded] = np.maximum(x_std[bounded], 0.0)
        y = np.zeros(sf.a.shape[0])
        y[rows] = y_rows
        y = y[: sf.n_orig_rows] * sf.row_sign[: sf.n_orig_rows]
        duals = -y if lp.maximize else y
    k = lp.n_vars
    x = sf.var_offset + sf.var_sign * x_std[:k]
    return LpOutcome(OPTIMAL, x, float(lp.objective @ x), duals, iters)


# ---------------------------------------------------------------------------
# scipy / HiGHS adapter


def _solve_highs(lp: LinearProgram) -> LpOutcome:
    from scipy.optimize import linprog

    rel = np.asarray(lp.relations)
    le, ge, eq = rel == LE, rel == GE, rel == EQ
    a_ub = np.vstack([lp.a_matrix[le], -lp.a_matrix[ge]])
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]])
    c = -lp.objective if lp.maximize else lp.objective
    bounds = [
        (None if not np.isfinite(lo) else lo, None if not np.isfinite(up) else up)
        for lo, up in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        c,
        A_ub=a_ub if a_ub.size else None,
        b_ub=b_ub if a_ub.size else None,
        A_eq=lp.a_matrix[eq] if eq.any() else None,
        b_eq=lp.rhs[eq] if eq.any() else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        # HiGHS may report "infeasible or unbounded"; settle it with a zero objective
        if lp.objective.any():
            probe = LinearProgram(np.zeros(lp.n_vars), lp.a_matrix, lp.relations, lp.rhs, lp.lower, lp.upper)
            if _solve_highs(probe).optimal:
                return LpOutcome(UNBOUNDED)
        return LpOutcome(INFEASIBLE)
    if res.status == 3:
        return LpOutcome(UNBOUNDED)
    if res.status != 0:
        raise LpNumericalError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x, dtype=float)
    duals = np.zeros(lp.a_matrix.shape[0])
    n_le = int(le.sum())
    if a_ub.size:
        marg = np.asarray(res.ineqlin.marginals)
        duals[le] = marg[:n_le]
        duals[ge] = -marg[n_le:]
    if eq.any():
        duals[eq] = np.asarray(res.eqlin.marginals)
    if lp.maximize:
        duals = -duals
    return LpOutcome(OPTIMAL, x, float(lp.objective @ x), duals, int(getattr(res, "nit", 0)))

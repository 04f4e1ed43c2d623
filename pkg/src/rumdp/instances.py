"""Seeded random RUMDP instances and their JSON file format.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``. PCG64 is a
documented 128-bit permuted congruential generator whose streams numpy keeps
stable across platforms; the generator only draws uniforms and standard
exponentials from it, so instance files are reproducible byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidInstanceError, MalformedFileError, RumdpError, VersionMismatchError
from .mdp import Mdp
from .rewards import RewardPolytope, box_polytope

FORMAT_VERSION = 1


@dataclass
class GenConfig:
    n_states: int
    n_actions: int
    reward_dim: int
    gamma: float = 0.95
    seed: int = 0
    transition_support: Optional[int] = None
    alpha_mode: str = "uniform"
    polytope_mode: str = "box"
    box_halfwidth: float = 1.0
    base_reward_scale: float = 0.0

    def __post_init__(self):
        if self.transition_support is None:
            self.transition_support = min(self.n_states, 4)
        if self.n_states < 1 or self.n_actions < 1:
            raise ValueError("n_states and n_actions must be positive")
        if self.reward_dim < 1:
            raise ValueError("reward_dim must be at least 1")
        if self.reward_dim > self.n_states * self.n_actions:
            raise ValueError("reward_dim cannot exceed n_states * n_actions")
        if not 1 <= self.transition_support <= self.n_states:
            raise ValueError("transition_support must be in [1, n_states]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.alpha_mode not in ("uniform", "point-mass"):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if self.polytope_mode not in ("box", "random-halfspaces"):
            raise ValueError(f"unknown polytope_mode {self.polytope_mode!r}")
        if self.box_halfwidth <= 0:
            raise ValueError("box_halfwidth must be positive")
        if not (self.base_reward_scale >= 0 and math.isfinite(self.base_reward_scale)):
            raise ValueError("base_reward_scale must be finite and nonnegative")


@dataclass(eq=False)
class RumdpInstance:
    mdp: Mdp
    polytope: RewardPolytope
    meta: dict = field(default_factory=dict)

    def validate(self):
        self.mdp.validate()
        self.polytope.validate(self.mdp.n_pairs)
        return self

    def __eq__(self, other):
        if not isinstance(other, RumdpInstance):
            return NotImplemented
        return self.mdp == other.mdp and self.polytope == other.polytope and self.meta == other.meta


def orthonormalize(raw: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt on columns.

    Elementwise products and sums only, so the result does not depend on
    the BLAS/LAPACK build.
    """
    q = np.array(raw, dtype=float)
    for j in range(q.shape[1]):
        for i in range(j):
            q[:, j] -= np.sum(q[:, i] * q[:, j]) * q[:, i]
        norm = math.sqrt(np.sum(q[:, j] * q[:, j]))
        if norm < 1e-12:
            raise InvalidInstanceError("random basis is rank deficient")
        q[:, j] /= norm
    return q


def generate(config: GenConfig) -> RumdpInstance:
    """Sparse Dirichlet transitions, orthonormal random basis, box-shaped R.

    A positive ``base_reward_scale`` adds a known base reward, which moves
    region boundaries off the origin.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n, m, d, k = config.n_states, config.n_actions, config.reward_dim, config.transition_support

    transition = np.zeros((n * m, n))
    for row in range(n * m):
        succ = np.argsort(rng.random(n), kind="stable")[:k]
        weights = rng.standard_exponential(k)
        transition[row, succ] = weights / weights.sum()

    if config.alpha_mode == "uniform":
        alpha = np.full(n, 1.0 / n)
    else:
        alpha = np.zeros(n)
        alpha[0] = 1.0

    basis = orthonormalize(rng.uniform(-1.0, 1.0, size=(n * m, d)))

    hw = config.box_halfwidth
    if config.polytope_mode == "box":
        polytope = box_polytope(d, hw, basis)
    else:
        cuts = rng.normal(size=(2 * d + 2, d))
        cuts /= np.linalg.norm(cuts, axis=1, keepdims=True)
        offsets = hw * rng.uniform(0.5, 1.0, size=cuts.shape[0])
        box = box_polytope(d, hw)
        polytope = RewardPolytope(np.vstack([box.a_matrix, cuts]), np.r_[box.b_vector, offsets], basis)

    if config.base_reward_scale > 0:
        # drawn last so scale 0 reproduces the purely linear instances exactly
        polytope.offset = config.base_reward_scale * hw * rng.uniform(-1.0, 1.0, n * m) / math.sqrt(n * m)

    meta = {"config": asdict(config), "seed": config.seed, "format_version": FORMAT_VERSION}
    return RumdpInstance(Mdp(n, m, transition, alpha, config.gamma), polytope, meta)


# ---------------------------------------------------------------------------
# JSON format


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("cannot serialize non-finite number")
    return format(float(x), ".17g")


def _emit(value) -> str:
    """JSON text with every float at full precision."""
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_emit(v)}" for k, v in value.items()) + "}"
    if isinstance(value, np.ndarray):
        return _emit(value.tolist())
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_emit(v) for v in value) + "]"
    if isinstance(value, (bool, np.bool_)) or value is None:
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _fmt(value)
    return json.dumps(value)


def dumps_json(value) -> str:
    return _emit(value) + "\n"


def instance_to_dict(inst: RumdpInstance) -> dict:
    mdp, poly = inst.mdp, inst.polytope
    n, m = mdp.n_states, mdp.n_actions
    doc = {
        "format_version": FORMAT_VERSION,
        "n_states": n,
        "n_actions": m,
        "gamma": mdp.gamma,
        "alpha": mdp.alpha,
        "transitions": mdp.transition.reshape(n, m, n),
        "reward_dim": poly.dim,
    }
    if poly.basis is not None:
        doc["basis"] = poly.basis.reshape(n, m, poly.dim)
    if poly.offset is not None:
        doc["reward_offset"] = poly.offset.reshape(n, m)
    doc["constraints"] = {"a": poly.a_matrix, "b": poly.b_vector}
    if inst.meta:
        doc["meta"] = inst.meta
    return doc


def save(inst: RumdpInstance, path) -> None:
    Path(path).write_text(dumps_json(instance_to_dict(inst)))


def _field(doc: dict, name: str, kind):
    if name not in doc:
        raise MalformedFileError(f"missing field '{name}'")
    value = doc[name]
    if kind is int and (not isinstance(value, int) or isinstance(value, bool)):
        raise MalformedFileError(f"field '{name}': expected integer, got {type(value).__name__}")
    if kind is float and (not isinstance(value, (int, float)) or isinstance(value, bool)):
        raise MalformedFileError(f"field '{name}': expected number, got {type(value).__name__}")
    return value


def _array(value, name: str, shape) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedFileError(f"field '{name}': not a numeric array ({exc})") from exc
    if arr.shape != tuple(shape):
        raise MalformedFileError(f"field '{name}': expected shape {tuple(shape)}, got {arr.shape}")
    return arr


def instance_from_dict(doc: dict, validate: bool = True) -> RumdpInstance:
    if not isinstance(doc, dict):
        raise MalformedFileError("top level must be a JSON object")
    version = _field(doc, "format_version", int)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"format_version {version} is not supported (expected {FORMAT_VERSION})")
    n = _field(doc, "n_states", int)
    m = _field(doc, "n_actions", int)
    if n < 1 or m < 1:
        raise MalformedFileError("n_states and n_actions must be positive")
    gamma = float(_field(doc, "gamma", float))
    d = _field(doc, "reward_dim", int)
    alpha = _array(_field(doc, "alpha", list), "alpha", (n,))
    transitions = _array(_field(doc, "transitions", list), "transitions", (n, m, n))
    if "basis" in doc:
        basis = _array(doc["basis"], "basis", (n, m, d)).reshape(n * m, d)
    else:
        if d != n * m:
            raise MalformedFileError(f"field 'basis' omitted but reward_dim {d} != n_states*n_actions {n * m}")
        basis = None
    offset = _array(doc["reward_offset"], "reward_offset", (n, m)).ravel() if "reward_offset" in doc else None
    cons = _field(doc, "constraints", dict)
    if not isinstance(cons, dict) or "a" not in cons or "b" not in cons:
        raise MalformedFileError("field 'constraints': expected object with 'a' and 'b'")
    b = np.array(cons["b"], dtype=float).ravel() if isinstance(cons["b"], list) else None
    if b is None:
        raise MalformedFileError("field 'constraints.b': expected array")
    a = _array(cons["a"], "constraints.a", (b.size, d))
    inst = RumdpInstance(
        Mdp(n, m, transitions.reshape(n * m, n), alpha, gamma),
        RewardPolytope(a, b, basis, offset),
        doc.get("meta", {}),
    )
    if validate:
        inst.validate()
    return inst


def load(path, validate: bool = True) -> RumdpInstance:
    """Read an instance file; malformed input raises MalformedFileError with location."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return instance_from_dict(doc, validate=validate)
    except MalformedFileError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    except InvalidInstanceError:
        raise
    except RumdpError as exc:
        raise InvalidInstanceError(f"{path}: {exc}") from exc

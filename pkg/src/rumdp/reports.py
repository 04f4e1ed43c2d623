"""File formats for enumeration dumps, regret reports and benchmark output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from .errors import MalformedFileError
from .instances import dumps_json
from .mdp import Mdp
from .nondominated import NondominatedEntry, NondominatedSet
from .regret import RegretSolution
from .rewards import RewardPolytope

DUMP_VERSION = 1


def gamma_dump(gamma_set: NondominatedSet, method: str, timing: bool = True) -> dict:
    stats = {k: v for k, v in gamma_set.stats.items() if timing or k != "wall_ms"}
    return {
        "format_version": DUMP_VERSION,
        "method": method,
        "size": len(gamma_set),
        "entries": [
            {"key": list(e.key), "witness_w": e.witness_w, "occupancy": e.occupancy} for e in gamma_set
        ],
        "stats": stats,
    }


def save_gamma(gamma_set: NondominatedSet, path, method: str, timing: bool = True) -> None:
    Path(path).write_text(dumps_json(gamma_dump(gamma_set, method, timing)))


def load_gamma(path, mdp: Mdp, polytope: RewardPolytope) -> NondominatedSet:
    """Rebuild a set from a dump; projections are recomputed for ``polytope``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise MalformedFileError(f"{path}: expected an object with an 'entries' array")
    nm = mdp.n_pairs
    phi, base = polytope.phi(nm), polytope.base(nm)
    out = NondominatedSet()
    for i, item in enumerate(doc["entries"]):
        try:
            key = np.array(item["key"], dtype=int)
            occ = np.array(item["occupancy"], dtype=float)
            w = np.array(item["witness_w"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFileError(f"{path}: entry {i}: {exc}") from exc
        if key.shape != (mdp.n_states,) or occ.shape != (nm,) or w.shape != (polytope.dim,):
            raise MalformedFileError(f"{path}: entry {i}: shapes do not match the instance")
        out.add(NondominatedEntry(key, occ, w, phi.T @ occ, float(base @ occ)))
    out.stats = dict(doc.get("stats", {}))
    return out


def regret_report(solution: RegretSolution, method: str, timing: bool = True) -> dict:
    doc = {
        "method": method,
        "regret": solution.regret,
        "mixture": [{"key": list(k), "weight": c} for k, c in solution.support],
        "iterations": solution.iterations,
        "lp_count": solution.lp_count,
        "wall_ms": solution.wall_ms if timing else 0.0,
    }
    if solution.weights is None:
        # constraint generation returns an occupancy, not weights over the set
        doc["occupancy"] = solution.occupancy
    return doc


def save_regret(solution: RegretSolution, path, method: str, timing: bool = True) -> None:
    Path(path).write_text(dumps_json(regret_report(solution, method, timing)))


@dataclass
class BenchRecord:
    instance_id: str
    n: int
    m: int
    d: int
    gamma: float
    method: str
    gamma_size: int
    wall_ms: float
    mmr: Optional[float] = None
    rel_error: Optional[float] = None
    lp_count: Optional[int] = None


BENCH_HEADER = [f.name for f in fields(BenchRecord)]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


def bench_csv(records: Iterable[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for rec in records:
        writer.writerow([_cell(getattr(rec, name)) for name in BENCH_HEADER])
    return buf.getvalue()


def read_bench_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def scatter_data(records: Iterable[BenchRecord]) -> dict:
    """Per-method ``[gamma_size, wall_ms]`` points (exact methods only)."""
    out: dict = {}
    for rec in records:
        if rec.method in ("gt", "pi-witness", "brute-force"):
            out.setdefault(rec.method, []).append([rec.gamma_size, rec.wall_ms])
    return out

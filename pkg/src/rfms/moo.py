"""Multi-objective utilities: Pareto fronts, dominated hypervolume, ParEGO scalarization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .seeds import as_rng

PAREGO_RHO = 0.05
WEIGHT_LATTICE_STEPS = 10


def _dominates(a: np.ndarray, b: np.ndarray) -> bool:
    """Strict Pareto dominance of a over b, maximization convention."""
    return bool(np.all(a >= b) and np.any(a > b))


@dataclass(frozen=True)
class ParetoFront:
    """A mutually non-dominated set of objective vectors."""

    points: tuple[tuple[float, ...], ...]
    orientation: str = "maximize"

    def __post_init__(self):
        if self.orientation not in ("maximize", "minimize"):
            raise InvalidInputError(f"unknown orientation {self.orientation!r}")
        pts = tuple(tuple(float(v) for v in p) for p in self.points)
        if pts:
            k = len(pts[0])
            if any(len(p) != k for p in pts):
                raise InvalidInputError("front points must share one dimension")
        sign = 1.0 if self.orientation == "maximize" else -1.0
        arr = sign * np.asarray(pts, dtype=np.float64) if pts else np.empty((0, 0))
        for i, j in itertools.combinations(range(len(pts)), 2):
            if _dominates(arr[i], arr[j]) or _dominates(arr[j], arr[i]):
                raise InvalidInputError("front contains a dominated point")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


def non_dominated_mask(points: np.ndarray, orientation: str = "maximize") -> np.ndarray:
    """Boolean mask of rows not strictly dominated by any other row.

    Exact duplicates are all flagged non-dominated; deduplication is the
    caller's concern.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise InvalidInputError("points must form an n-by-k matrix")
    if not np.isfinite(pts).all():
        raise InvalidInputError("points must be finite")
    if orientation == "minimize":
        pts = -pts
    elif orientation != "maximize":
        raise InvalidInputError(f"unknown orientation {orientation!r}")
    ge = (pts[:, None, :] >= pts[None, :, :]).all(axis=2)
    gt = (pts[:, None, :] > pts[None, :, :]).any(axis=2)
    dominated = (ge & gt).any(axis=0)
    return ~dominated


def pareto_front(points: Sequence[Sequence[float]], orientation: str = "maximize") -> ParetoFront:
    """Extract the non-dominated subset; exact duplicates are kept once."""
    pts = [tuple(float(v) for v in p) for p in points]
    if not pts:
        return ParetoFront((), orientation)
    mask = non_dominated_mask(np.asarray(pts), orientation)
    kept, seen = [], set()
    for p, keep in zip(pts, mask):
        if keep and p not in seen:
            kept.append(p)
            seen.add(p)
    return ParetoFront(tuple(kept), orientation)


def _hv2(points: np.ndarray, ref: np.ndarray) -> float:
    """2-d hypervolume by a sorted sweep; handles dominated points."""
    order = np.lexsort((-points[:, 1], -points[:, 0]))
    total, best_y = 0.0, ref[1]
    for i in order:
        x, y = points[i]
        if y > best_y:
            total += (x - ref[0]) * (y - best_y)
            best_y = y
    return total


def hypervolume(front: ParetoFront, reference: Sequence[float]) -> float:
    """Dominated hypervolume of a maximization front w.r.t. a reference point.

    Points that do not strictly dominate the reference contribute nothing and
    are dropped. Supports 2 and 3 objectives.
    """
    if front.orientation != "maximize":
        raise InvalidInputError("hypervolume requires a maximization front")
    ref = np.asarray(reference, dtype=np.float64)
    if ref.ndim != 1:
        raise InvalidInputError("reference must be a vector")
    if len(front) == 0:
        return 0.0
    pts = np.asarray(front.points, dtype=np.float64)
    if pts.shape[1] != ref.size:
        raise InvalidInputError(f"reference has {ref.size} coordinates, front points have {pts.shape[1]}")
    pts = pts[(pts > ref).all(axis=1)]
    if pts.size == 0:
        return 0.0
    if ref.size == 2:
        return _hv2(pts, ref)
    if ref.size == 3:
        levels = np.unique(pts[:, 2])[::-1]
        total = 0.0
        for i, z in enumerate(levels):
            depth = z - (levels[i + 1] if i + 1 < levels.size else ref[2])
            total += depth * _hv2(pts[pts[:, 2] >= z][:, :2], ref[:2])
        return total
    raise InvalidInputError("hypervolume supports 2 or 3 objectives only")


@dataclass(frozen=True)
class ScalarizationWeight:
    """Weight vector on the simplex plus the augmentation coefficient."""

    values: tuple[float, ...]
    rho: float = PAREGO_RHO

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(v < 0 for v in vals):
            raise InvalidInputError("weights must be nonnegative")
        if abs(sum(vals) - 1.0) > 1e-12:
            raise InvalidInputError("weights must sum to 1")
        object.__setattr__(self, "values", vals)


def sample_weight(k: int, seed: int | np.random.Generator) -> ScalarizationWeight:
    """Uniform draw from the simplex lattice with denominator 10."""
    if k < 2:
        raise InvalidInputError("need at least two objectives")
    rng = as_rng(seed)
    if k == 2:
        i = int(rng.integers(0, WEIGHT_LATTICE_STEPS + 1))
        return ScalarizationWeight((i / WEIGHT_LATTICE_STEPS, (WEIGHT_LATTICE_STEPS - i) / WEIGHT_LATTICE_STEPS))
    lattice = [
        tuple(c / WEIGHT_LATTICE_STEPS for c in comp)
        for comp in _compositions(WEIGHT_LATTICE_STEPS, k)
    ]
    return ScalarizationWeight(lattice[int(rng.integers(0, len(lattice)))])


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


def normalize_objectives(objectives: np.ndarray) -> np.ndarray:
    """Rescale each objective column to [0, 1] over the buffer.

    Degenerate columns (max equals min) are set to 0.
    """
    obj = np.asarray(objectives, dtype=np.float64)
    if obj.ndim != 2:
        raise InvalidInputError("objectives must form an n-by-k matrix")
    lo, hi = obj.min(axis=0), obj.max(axis=0)
    span = hi - lo
    out = np.zeros_like(obj)
    ok = span > 0
    out[:, ok] = (obj[:, ok] - lo[ok]) / span[ok]
    return out


def parego_scalarize(objectives: Sequence[float] | np.ndarray, weight: ScalarizationWeight) -> float | np.ndarray:
    """Augmented Tchebycheff scalarization of normalized minimization objectives.

    s = max_j w_j f_j + rho * sum_j w_j f_j, applied row-wise for a matrix.
    """
    f = np.asarray(objectives, dtype=np.float64)
    w = np.asarray(weight.values, dtype=np.float64)
    if f.shape[-1] != w.size:
        raise InvalidInputError("objective arity does not match the weight vector")
    prod = f * w
    s = prod.max(axis=-1) + weight.rho * prod.sum(axis=-1)
    return float(s) if np.ndim(s) == 0 else s

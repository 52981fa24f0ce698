"""Dominance algebra, non-dominated sorting, crowding and front indicators.

Functions accept either :class:`~clscopt.model.ObjectiveVector` values (which
are canonicalized to the all-minimize form ``(cost, co2, -dispatch)``) or
plain numeric triples/arrays, which are taken to be canonical already.
"""

from __future__ import annotations

import bisect
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .model import ObjectiveVector, Solution


def as_canonical(point: Any) -> np.ndarray:
    if isinstance(point, FrontPoint):
        return np.asarray(point.objectives.canonical(), dtype=float)
    if isinstance(point, ObjectiveVector):
        return np.asarray(point.canonical(), dtype=float)
    return np.asarray(point, dtype=float)


def canonical_matrix(points: Iterable[Any]) -> np.ndarray:
    rows = [as_canonical(p) for p in points]
    if not rows:
        return np.empty((0, 3))
    return np.vstack(rows)


def dominates(a: Any, b: Any) -> bool:
    """True iff ``a`` is no worse than ``b`` everywhere and better somewhere."""
    ca, cb = as_canonical(a), as_canonical(b)
    return bool(np.all(ca <= cb) and np.any(ca < cb))


def weakly_dominates(a: Any, b: Any, rel_tol: float = 0.0) -> bool:
    """``a`` no worse than ``b`` in every objective, allowing ``rel_tol * |b|`` slack."""
    ca, cb = as_canonical(a), as_canonical(b)
    return bool(np.all(ca <= cb + rel_tol * np.abs(cb)))


def dominance_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True iff row i dominates row j."""
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        return np.zeros(0, dtype=bool)
    return ~dominance_matrix(F).any(axis=0)


def nondominated_filter(points: Sequence[Any]) -> list[Any]:
    """The points not dominated by any other, in input order."""
    mask = nondominated_mask(canonical_matrix(points))
    return [p for p, keep in zip(points, mask) if keep]


def fast_nondominated_sort(points: Sequence[Any] | np.ndarray) -> tuple[list[list[int]], np.ndarray]:
    """Peel the points into successive non-dominated fronts.

    Returns ``(fronts, rank)`` where ``fronts[r]`` lists the indices of rank
    ``r`` in ascending order and ``rank[i]`` is the front index of point i.
    """
    F = points if isinstance(points, np.ndarray) else canonical_matrix(points)
    n = len(F)
    rank = np.full(n, -1, dtype=int)
    if n == 0:
        return [], rank
    D = dominance_matrix(F)
    dominated_count = D.sum(axis=0)
    fronts: list[list[int]] = []
    current = np.flatnonzero(dominated_count == 0)
    r = 0
    while current.size:
        rank[current] = r
        fronts.append(current.tolist())
        dominated_count = dominated_count - D[current].sum(axis=0)
        dominated_count[rank >= 0] = -1
        current = np.flatnonzero(dominated_count == 0)
        r += 1
    return fronts, rank


def crowding_distance(front: Sequence[Any] | np.ndarray) -> np.ndarray:
    """Sum of normalized neighbour gaps per objective; boundary points get inf."""
    F = front if isinstance(front, np.ndarray) else canonical_matrix(front)
    n = len(F)
    dist = np.zeros(n)
    if n <= 2:
        dist[:] = np.inf
        return dist
    for m in range(F.shape[1]):
        order = np.argsort(F[:, m], kind="stable")
        lo, hi = F[order[0], m], F[order[-1], m]
        dist[order[0]] = dist[order[-1]] = np.inf
        span = hi - lo
        if span <= 0:
            continue
        gaps = (F[order[2:], m] - F[order[:-2], m]) / span
        dist[order[1:-1]] += gaps
    return dist


# --------------------------------------------------------------------------
# Hypervolume (3-D dimension sweep)
# --------------------------------------------------------------------------


class _Staircase:
    """2-D non-dominated set with its dominated area w.r.t. (rx, ry)."""

    def __init__(self, rx: float, ry: float):
        self.rx, self.ry = rx, ry
        self.xs: list[float] = []
        self.ys: list[float] = []
        self.area = 0.0

    def insert(self, x: float, y: float) -> None:
        xs, ys = self.xs, self.ys
        pos = bisect.bisect_left(xs, x)
        if pos > 0 and ys[pos - 1] <= y:
            return
        if pos < len(xs) and xs[pos] == x and ys[pos] <= y:
            return
        # height of the old staircase just right of x
        y_old = ys[pos - 1] if pos > 0 else self.ry
        end = pos
        gained = 0.0
        cursor = x
        while end < len(xs) and ys[end] >= y:
            gained += (xs[end] - cursor) * (y_old - y)
            cursor, y_old = xs[end], ys[end]
            end += 1
        stop = xs[end] if end < len(xs) else self.rx
        gained += (stop - cursor) * (y_old - y)
        del xs[pos:end], ys[pos:end]
        xs.insert(pos, x)
        ys.insert(pos, y)
        self.area += gained


def hypervolume(front: Sequence[Any] | np.ndarray, reference: Sequence[float]) -> float:
    """Exact volume dominated by ``front`` and bounded by ``reference``.

    Every point must strictly dominate the reference point.
    """
    F = front if isinstance(front, np.ndarray) else canonical_matrix(front)
    ref = np.asarray(reference, dtype=float)
    if len(F) == 0:
        return 0.0
    bad = ~np.all(F < ref, axis=1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"point {F[i].tolist()} does not dominate reference {ref.tolist()}")
    order = np.lexsort((F[:, 1], F[:, 0], F[:, 2]))
    F = F[order]
    stair = _Staircase(float(ref[0]), float(ref[1]))
    volume = 0.0
    n = len(F)
    for i in range(n):
        x, y, z = F[i]
        stair.insert(float(x), float(y))
        z_next = F[i + 1, 2] if i + 1 < n else ref[2]
        volume += stair.area * float(z_next - z)
    return volume


def clipped_hypervolume(front: Sequence[Any] | np.ndarray, reference: Sequence[float]) -> float:
    """Hypervolume counting only points that strictly dominate ``reference``.

    Points outside the reference box bound no volume, so dropping them gives
    the same value as clipping.
    """
    F = front if isinstance(front, np.ndarray) else canonical_matrix(front)
    ref = np.asarray(reference, dtype=float)
    if len(F) == 0:
        return 0.0
    return hypervolume(F[np.all(F < ref, axis=1)], ref)


def reference_from_worst(worst: Sequence[float], margin: float = 0.1) -> np.ndarray:
    """Push a coordinate-wise worst point outward by ``margin`` of its magnitude.

    For positive coordinates this is ``(1 + margin) * worst``; negative ones
    (negated maximization objectives) move toward zero instead of away, and
    zero coordinates move by 1.
    """
    worst = np.asarray(worst, dtype=float)
    step = margin * np.abs(worst)
    step[step == 0] = 1.0
    return worst + step


def coverage(A: Sequence[Any], B: Sequence[Any], rel_tol: float = 0.0) -> float:
    """Fraction of ``B`` weakly dominated by at least one member of ``A``."""
    if len(B) == 0:
        raise ValueError("coverage is undefined for an empty second front")
    FA, FB = canonical_matrix(A), canonical_matrix(B)
    if len(FA) == 0:
        return 0.0
    slack = FB + rel_tol * np.abs(FB)
    covered = np.all(FA[:, None, :] <= slack[None, :, :], axis=2).any(axis=0)
    return float(covered.mean())


# --------------------------------------------------------------------------
# Fronts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Provenance:
    """Where a front point came from: a GA generation or a weight vector."""

    method: str  # "ga" or "weighted-sum"
    generation: int | None = None
    weights: tuple[float, float, float] | None = None

    def __str__(self) -> str:
        if self.method == "ga":
            return f"ga(gen={self.generation})"
        w = ",".join(f"{x:.4g}" for x in self.weights or ())
        return f"weighted-sum({w})"

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"method": self.method}
        if self.generation is not None:
            out["generation"] = self.generation
        if self.weights is not None:
            out["weights"] = list(self.weights)
        return out


@dataclass
class FrontPoint:
    objectives: ObjectiveVector
    solution: Solution | None = None
    provenance: tuple[Provenance, ...] = field(default_factory=tuple)


@dataclass
class ParetoFront:
    """Mutually non-dominated points; identical objective vectors are merged."""

    points: list[FrontPoint] = field(default_factory=list)

    @classmethod
    def from_points(cls, points: Iterable[FrontPoint]) -> ParetoFront:
        merged: dict[tuple[float, float, float], FrontPoint] = {}
        for p in points:
            key = tuple(p.objectives.canonical())
            if key in merged:
                head = merged[key]
                extra = tuple(x for x in p.provenance if x not in head.provenance)
                merged[key] = FrontPoint(head.objectives, head.solution, head.provenance + extra)
            else:
                merged[key] = FrontPoint(p.objectives, p.solution, tuple(p.provenance))
        return cls(nondominated_filter(list(merged.values())))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i: int) -> FrontPoint:
        return self.points[i]

    def canonical(self) -> np.ndarray:
        return canonical_matrix(self.points)

    def sorted(self) -> ParetoFront:
        """Points ordered lexicographically by canonical objectives."""
        return ParetoFront(sorted(self.points, key=lambda p: p.objectives.canonical()))

    def is_mutually_nondominated(self) -> bool:
        return bool(nondominated_mask(self.canonical()).all())

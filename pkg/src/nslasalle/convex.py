"""Finitely generated convex sets and closed real intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

# weight of the affine constraint row in the NNLS projection
_SUM_WEIGHT = 1e6


class ConvexSet:
    """Convex hull of a nonempty vertex list in R^k.

    Vertices closer than ``merge_tol`` (max-norm) are merged on construction,
    so a set whose generators all coincide reports itself as a singleton.
    """

    def __init__(self, vertices, merge_tol: float = 1e-9):
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        if pts.size == 0:
            raise ValueError("a ConvexSet needs at least one vertex")
        if not np.all(np.isfinite(pts)):
            raise ValueError("vertices must be finite")
        kept: list[np.ndarray] = []
        for p in pts:
            if not any(np.max(np.abs(p - q)) <= merge_tol for q in kept):
                kept.append(p)
        self.vertices = np.array(kept)
        self.vertices.flags.writeable = False

    @classmethod
    def singleton(cls, point) -> ConvexSet:
        return cls([np.asarray(point, dtype=float)])

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"ConvexSet({self.vertices.tolist()!r})"

    def is_singleton(self) -> bool:
        return len(self.vertices) == 1

    def point(self) -> np.ndarray:
        if not self.is_singleton():
            raise ValueError("set is not a singleton")
        return self.vertices[0].copy()

    def interval(self) -> Interval:
        if self.dimension != 1:
            raise ValueError("interval() needs a one-dimensional set")
        return Interval(float(self.vertices.min()), float(self.vertices.max()))

    def support(self, direction) -> float:
        """max over the set of <direction, v>."""
        return float(np.max(self.vertices @ np.asarray(direction, dtype=float)))

    def radius(self) -> float:
        """Largest Euclidean norm of a point in the set."""
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def projection(self, point) -> np.ndarray:
        p = np.asarray(point, dtype=float)
        V = self.vertices
        if len(V) == 1:
            return V[0].copy()
        if len(V) == 2:
            a, b = V
            d = b - a
            s = np.clip(np.dot(p - a, d) / np.dot(d, d), 0.0, 1.0)
            return a + s * d
        if self.dimension == 1:
            return np.clip(p, V.min(), V.max())
        # min ||V^T w - p|| with w >= 0, sum w = 1 (sum enforced by a heavy row)
        A = np.vstack([V.T, _SUM_WEIGHT * np.ones(len(V))])
        b = np.concatenate([p, [_SUM_WEIGHT]])
        w, _ = nnls(A, b)
        w = w / w.sum()
        return w @ V

    def distance(self, point) -> float:
        p = np.asarray(point, dtype=float)
        return float(np.linalg.norm(p - self.projection(p)))

    def contains(self, point, tol: float = 1e-9) -> bool:
        return self.distance(point) <= tol

    def contains_set(self, other: ConvexSet, tol: float = 1e-9) -> bool:
        return all(self.contains(v, tol) for v in other.vertices)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lower, upper]; empty when lower > upper."""

    lower: float
    upper: float

    @classmethod
    def empty(cls) -> Interval:
        return cls(math.inf, -math.inf)

    @property
    def is_empty(self) -> bool:
        return self.lower > self.upper

    @property
    def width(self) -> float:
        return 0.0 if self.is_empty else self.upper - self.lower

    def is_singleton(self, tol: float = 1e-9) -> bool:
        return not self.is_empty and self.upper - self.lower <= tol

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def intersect(self, other: Interval) -> Interval:
        return Interval(max(self.lower, other.lower), min(self.upper, other.upper))

    def __str__(self):
        if self.is_empty:
            return "{}"
        if self.lower == self.upper:
            return f"{{{self.lower!r}}}"
        return f"[{self.lower!r}, {self.upper!r}]"

"""Piecewise-smooth vector fields and their Filippov set-valued map.

A :class:`PiecewiseField` is described by switching surfaces ``g_i(x, t)``
and one smooth vector field per sign pattern of ``(g_1, ..., g_m)``.  Sign
patterns are tuples over ``{-1, +1}``; inside :func:`region_of` a ``0`` marks a
coordinate lying on its surface.

For such fields the Filippov map at ``(x, t)`` is the convex hull of the
values of the pieces adjacent to ``x``, which is what :func:`filippov_map`
returns.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

import numpy as np

from .convex import ConvexSet
from .expr import Expression, compile_vector, differentiate, gradient, parse

DEFAULT_SURFACE_TOL = 1e-9

RegionKey = tuple  # tuple of -1 / 0 / +1, one entry per surface


class OnDiscontinuityError(ValueError):
    """The point lies on a switching surface; use :func:`filippov_map`."""


class FieldDefinitionError(ValueError):
    pass


def pattern_to_key(pattern: str) -> RegionKey:
    """``"+-"`` -> ``(1, -1)``; ``"0"`` marks on-surface."""
    table = {"+": 1, "-": -1, "0": 0}
    try:
        return tuple(table[c] for c in pattern.strip())
    except KeyError:
        raise FieldDefinitionError(f"bad sign pattern {pattern!r}") from None


def key_to_pattern(key: RegionKey) -> str:
    return "".join({1: "+", -1: "-", 0: "0"}[int(k)] for k in key)


def adjacent_keys(key: RegionKey):
    """All full sign patterns compatible with ``key`` (zeros relaxed to +/-)."""
    choices = [(-1, 1) if k == 0 else (k,) for k in key]
    return [tuple(c) for c in itertools.product(*choices)]


@dataclass(frozen=True)
class SwitchingSurface:
    g: Expression
    grad_g: tuple[Expression, ...]
    dg_dt: Expression
    name: str = ""

    @classmethod
    def from_expression(cls, g: Expression, dimension: int, name: str = "") -> SwitchingSurface:
        return cls(g, gradient(g, dimension), differentiate(g, "t"), name or str(g))


class PiecewiseField:
    """The right-hand side ``f(x, t)``: surfaces plus one piece per region."""

    def __init__(self, dimension: int, surfaces: Sequence[SwitchingSurface],
                 pieces: Mapping[RegionKey, Sequence[Expression]],
                 parameters: Mapping[str, float] | None = None, name: str = ""):
        if dimension < 1:
            raise FieldDefinitionError("dimension must be positive")
        self.dimension = dimension
        self.surfaces = tuple(surfaces)
        self.parameters = dict(parameters or {})
        self.name = name
        m = len(self.surfaces)
        self.pieces: dict[RegionKey, tuple[Expression, ...]] = {}
        for key, exprs in pieces.items():
            key = tuple(int(k) for k in key)
            if len(key) != m or any(k not in (-1, 1) for k in key):
                raise FieldDefinitionError(
                    f"region {key_to_pattern(key)!r} does not match {m} surface(s)")
            exprs = tuple(exprs)
            if len(exprs) != dimension:
                raise FieldDefinitionError(
                    f"region {key_to_pattern(key)!r} has {len(exprs)} components, expected {dimension}")
            self.pieces[key] = exprs
        for key in itertools.product((-1, 1), repeat=m):
            if key not in self.pieces:
                raise FieldDefinitionError(f"missing region {key_to_pattern(key)!r}")
        for e in self._all_expressions():
            if e.max_index() > dimension:
                raise FieldDefinitionError(f"expression {e} exceeds dimension {dimension}")

        p = self.parameters
        self._g_all = compile_vector([s.g for s in self.surfaces], p)
        self._grad_g = [compile_vector(s.grad_g, p) for s in self.surfaces]
        self._dg_dt = [s.dg_dt.compile(p) for s in self.surfaces]
        self._pieces = {k: compile_vector(v, p) for k, v in self.pieces.items()}
        self._pieces_np = {k: [c.compile(p, backend="numpy") for c in v] for k, v in self.pieces.items()}

    @classmethod
    def from_strings(cls, dimension: int, surfaces: Sequence[str],
                     pieces: Mapping[str, Sequence[str] | str],
                     parameters: Mapping[str, float] | None = None, name: str = "") -> PiecewiseField:
        """Build from text, e.g. ``from_strings(1, ["x1"], {"+": ["-1"], "-": ["1"]})``."""
        names = list(parameters or {})
        surf = [SwitchingSurface.from_expression(parse(s, dimension, names), dimension)
                for s in surfaces]
        parsed = {}
        for pattern, comps in pieces.items():
            if isinstance(comps, str):
                comps = [comps]
            key = () if pattern in ("", "*") else pattern_to_key(pattern)
            parsed[key] = [parse(c, dimension, names) for c in comps]
        return cls(dimension, surf, parsed, parameters, name)

    def _all_expressions(self):
        for s in self.surfaces:
            yield s.g
        for exprs in self.pieces.values():
            yield from exprs

    @property
    def provenance_id(self) -> str:
        """Stable digest of the field definition, used to tag trajectories."""
        h = hashlib.sha256()
        h.update(f"n={self.dimension};".encode())
        for s in self.surfaces:
            h.update(f"g={s.g};".encode())
        for key in sorted(self.pieces):
            h.update(f"{key_to_pattern(key)}={','.join(map(str, self.pieces[key]))};".encode())
        for k in sorted(self.parameters):
            h.update(f"{k}={self.parameters[k]!r};".encode())
        return h.hexdigest()[:16]

    # ---- pointwise helpers used across the package ----
    def surface_values(self, x, t) -> np.ndarray:
        return self._g_all(x, t)

    def surface_gradient(self, i: int, x, t) -> np.ndarray:
        return self._grad_g[i](x, t)

    def surface_rate(self, i: int, x, t, velocity) -> float:
        """Rate of change of ``g_i`` along ``velocity``: grad g . v + dg/dt."""
        return float(self.surface_gradient(i, x, t) @ np.asarray(velocity) + self._dg_dt[i](x, t))

    def piece_value(self, key: RegionKey, x, t) -> np.ndarray:
        return self._pieces[tuple(key)](x, t)

    def piece_value_grid(self, key: RegionKey, X, t) -> np.ndarray:
        """Vectorised piece evaluation; ``X`` has shape (n, ...)."""
        return np.stack([c(X, t) for c in self._pieces_np[tuple(key)]])


def region_of(F: PiecewiseField, x, t: float = 0.0,
              surface_tol: float = DEFAULT_SURFACE_TOL) -> RegionKey:
    if surface_tol <= 0:
        raise ValueError("surface_tol must be positive")
    g = F.surface_values(x, t)
    return tuple(0 if abs(v) <= surface_tol else (1 if v > 0 else -1) for v in g)


def evaluate_field(F: PiecewiseField, x, t: float = 0.0,
                   surface_tol: float = DEFAULT_SURFACE_TOL) -> np.ndarray:
    key = region_of(F, x, t, surface_tol)
    if 0 in key:
        raise OnDiscontinuityError(
            f"x={list(np.atleast_1d(x))} lies on surface(s) {[F.surfaces[i].name for i, k in enumerate(key) if k == 0]};"
            " use filippov_map")
    return F.piece_value(key, x, t)


def filippov_map(F: PiecewiseField, x, t: float = 0.0,
                 surface_tol: float = DEFAULT_SURFACE_TOL) -> ConvexSet:
    key = region_of(F, x, t, surface_tol)
    return ConvexSet([F.piece_value(k, x, t) for k in adjacent_keys(key)])


@dataclass
class FieldReport:
    passed: bool
    max_norm: float
    piece_max_norms: dict[str, float]
    origin_radii: list[float]
    growth_bound: float
    findings: list[str] = dc_field(default_factory=list)


def validate_field(F: PiecewiseField, box: Sequence[tuple[float, float]], t_grid: Sequence[float],
                   samples_per_axis: int = 9, growth_bound: float | None = None,
                   surface_tol: float = DEFAULT_SURFACE_TOL) -> FieldReport:
    """Sample every piece on ``box`` x ``t_grid`` and check ``K[f](0, t)`` stays bounded.

    ``growth_bound`` caps the radius of ``filippov_map(F, 0, t)``; by default it
    is twice ``max(1, radius at t_grid[0])``.
    """
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != F.dimension:
        raise ValueError("box dimension does not match the field")
    if any(not lo <= 0 <= hi for lo, hi in box):
        raise ValueError("box must contain the origin")
    axes = [np.linspace(lo, hi, samples_per_axis) for lo, hi in box]
    X = np.stack(np.meshgrid(*axes, indexing="ij")).reshape(F.dimension, -1)

    findings = []
    piece_norms = {}
    for key in F.pieces:
        worst = 0.0
        for t in t_grid:
            values = F.piece_value_grid(key, X, t)
            norms = np.linalg.norm(values, axis=0)
            if not np.all(np.isfinite(norms)):
                findings.append(f"piece {key_to_pattern(key)!r} is not finite on the box at t={t!r}")
                worst = np.inf
                break
            worst = max(worst, float(norms.max()))
        piece_norms[key_to_pattern(key)] = worst
    max_norm = max(piece_norms.values())

    origin = np.zeros(F.dimension)
    radii = [filippov_map(F, origin, t, surface_tol).radius() for t in t_grid]
    bound = growth_bound if growth_bound is not None else 2.0 * max(1.0, radii[0])
    for t, radius in zip(t_grid, radii):
        if radius > bound:
            findings.append(f"K[f](0,t) radius {radius!r} exceeds bound {bound!r} at t={t!r}")
            break
    return FieldReport(not findings, max_norm, piece_norms, radii, bound, findings)

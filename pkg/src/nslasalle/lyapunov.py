"""Nonsmooth Lyapunov candidates.

A candidate ``V(x, t)`` is a :class:`PiecewiseScalar`: its own switching
surfaces plus one smooth expression per sign region, continuous across the
surfaces.  Every piece carries its exact gradient, so the Clarke generalized
gradient at a point is the convex hull of the adjacent pieces' gradients
(space gradient followed by the time partial).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .convex import ConvexSet, Interval
from .expr import Expression, compile_vector, differentiate, gradient, parse
from .field import (DEFAULT_SURFACE_TOL, FieldDefinitionError, PiecewiseField, RegionKey,
                    SwitchingSurface, adjacent_keys, filippov_map, key_to_pattern,
                    pattern_to_key)

REGULARITY_TOL = 1e-6
CONTINUITY_TOL = 1e-8
SINGLETON_TOL = 1e-9
DEFAULT_XI_RESOLUTION = 32

# simplex grids larger than this fall back to seeded random combinations
_MAX_SIMPLEX_GRID = 50_000


class PiecewiseScalar:
    """Piecewise-smooth scalar function with per-piece exact derivatives."""

    def __init__(self, dimension: int, surfaces: Sequence[SwitchingSurface],
                 pieces: Mapping[RegionKey, Expression],
                 parameters: Mapping[str, float] | None = None, name: str = "V"):
        self.dimension = dimension
        self.surfaces = tuple(surfaces)
        self.parameters = dict(parameters or {})
        self.name = name
        m = len(self.surfaces)
        self.pieces = {tuple(k): e for k, e in pieces.items()}
        for key in itertools.product((-1, 1), repeat=m):
            if key not in self.pieces:
                raise FieldDefinitionError(f"{name}: missing region {key_to_pattern(key)!r}")
        if len(self.pieces) != 2 ** m:
            raise FieldDefinitionError(f"{name}: region patterns do not match {m} surface(s)")
        for e in self.pieces.values():
            if e.max_index() > dimension:
                raise FieldDefinitionError(f"{name}: expression {e} exceeds dimension {dimension}")
        self.gradients = {k: gradient(e, dimension) for k, e in self.pieces.items()}
        self.time_partials = {k: differentiate(e, "t") for k, e in self.pieces.items()}

        p = self.parameters
        self._g_all = compile_vector([s.g for s in self.surfaces], p)
        self._g = [s.g.compile(p) for s in self.surfaces]
        self._grad_g = [compile_vector(s.grad_g, p) for s in self.surfaces]
        self._value = {k: e.compile(p) for k, e in self.pieces.items()}
        self._value_np = {k: e.compile(p, backend="numpy") for k, e in self.pieces.items()}
        self._grad = {k: compile_vector(list(g) + [self.time_partials[k]], p)
                      for k, g in self.gradients.items()}

    @classmethod
    def smooth(cls, expression: Expression, dimension: int,
               parameters: Mapping[str, float] | None = None, name: str = "V") -> PiecewiseScalar:
        return cls(dimension, (), {(): expression}, parameters, name)

    @classmethod
    def from_strings(cls, dimension: int, pieces: Mapping[str, str] | str,
                     surfaces: Sequence[str] = (), parameters: Mapping[str, float] | None = None,
                     name: str = "V") -> PiecewiseScalar:
        """``from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"])`` is ``|x1|``."""
        names = list(parameters or {})
        if isinstance(pieces, str):
            pieces = {"": pieces}
        surf = [SwitchingSurface.from_expression(parse(s, dimension, names), dimension)
                for s in surfaces]
        parsed = {(() if p in ("", "*") else pattern_to_key(p)): parse(e, dimension, names)
                  for p, e in pieces.items()}
        return cls(dimension, surf, parsed, parameters, name)

    @property
    def is_smooth(self) -> bool:
        """True for single-piece (C^1 in x) candidates."""
        return not self.surfaces

    def region_of(self, x, t=0.0, surface_tol=DEFAULT_SURFACE_TOL) -> RegionKey:
        return tuple(0 if abs(v) <= surface_tol else (1 if v > 0 else -1)
                     for v in self._g_all(x, t))

    def value(self, x, t: float = 0.0, surface_tol: float = DEFAULT_SURFACE_TOL) -> float:
        key = self.region_of(x, t, surface_tol)
        return self._value[adjacent_keys(key)[0]](x, t)

    def __call__(self, x, t: float = 0.0) -> float:
        return self.value(x, t)

    def value_grid(self, X, t: float = 0.0) -> np.ndarray:
        """Vectorised values at the columns of ``X`` (shape (n, N))."""
        X = np.asarray(X, dtype=float)
        if self.is_smooth:
            return self._value_np[()](X, t)
        out = np.empty(X.shape[1:])
        flat_X = X.reshape(self.dimension, -1)
        flat = out.reshape(-1)
        for j in range(flat_X.shape[1]):
            flat[j] = self.value(flat_X[:, j], t)
        return out

    def piece_gradient(self, key: RegionKey, x, t) -> np.ndarray:
        return self._grad[tuple(key)](x, t)

    def check_continuity(self, samples, t_values: Sequence[float] = (0.0,),
                         tol: float = CONTINUITY_TOL) -> ContinuityReport:
        """Project samples onto each surface and compare the adjacent pieces there."""
        worst, witness = 0.0, None
        for i in range(len(self.surfaces)):
            for x0 in np.atleast_2d(samples):
                for t in t_values:
                    y = _project_to_surface(self._g[i], self._grad_g[i], np.array(x0, float), t)
                    if y is None:
                        continue
                    key = list(self.region_of(y, t))
                    key[i] = 0
                    values = [self._value[k](y, t) for k in adjacent_keys(tuple(key))]
                    gap = max(values) - min(values)
                    if gap > worst:
                        worst, witness = gap, (y.tolist(), t)
        return ContinuityReport(worst <= tol, worst, witness)


@dataclass
class ContinuityReport:
    passed: bool
    worst_gap: float
    witness: tuple | None


def _project_to_surface(g, grad_g, x, t, iterations=20):
    for _ in range(iterations):
        value = g(x, t)
        grad = grad_g(x, t)
        norm2 = grad @ grad
        if norm2 == 0:
            return None
        x = x - value * grad / norm2
        if abs(value) < 1e-14:
            return x
    return x if abs(g(x, t)) < 1e-10 else None


@dataclass
class ComparisonTriple:
    """Comparison functions W1 <= V <= W2 and the decay rate W (all in x only)."""

    W1: Expression
    W2: Expression
    W: Expression
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("W1", "W2", "W"):
            if getattr(self, name).depends_on_time():
                raise ValueError(f"{name} must not depend on t")
        p = self.parameters
        self.w1, self.w2, self.w = (e.compile(p) for e in (self.W1, self.W2, self.W))
        self.w1_np, self.w2_np, self.w_np = (e.compile(p, backend="numpy")
                                             for e in (self.W1, self.W2, self.W))

    @classmethod
    def from_strings(cls, dimension: int, W1: str, W2: str, W: str,
                     parameters: Mapping[str, float] | None = None) -> ComparisonTriple:
        names = list(parameters or {})
        return cls(parse(W1, dimension, names), parse(W2, dimension, names),
                   parse(W, dimension, names), dict(parameters or {}))

    def check_definiteness(self, samples, ball: float = 1e-3, tol: float = 1e-12) -> DefinitenessReport:
        """Sampled check: W1, W2 positive definite, W positive semi-definite.

        All three must vanish at the origin and be >= -tol on the samples;
        W1 and W2 must be strictly positive at samples farther than ``ball``
        from the origin.
        """
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        radii = np.linalg.norm(X, axis=1)
        outside = radii > ball
        origin = np.zeros(X.shape[1])
        failures = []
        for name, fn, fn_np, strict in (("W1", self.w1, self.w1_np, True),
                                        ("W2", self.w2, self.w2_np, True),
                                        ("W", self.w, self.w_np, False)):
            at_origin = fn(origin)
            if abs(at_origin) > tol:
                failures.append((name, "nonzero at origin", origin.tolist(), at_origin))
                continue
            values = fn_np(X.T)
            bad = ~np.isfinite(values) | (values < -tol)
            if strict:
                bad |= outside & (values <= 0)
            if bad.any():
                j = int(np.argmin(np.where(bad, values, np.inf)))
                kind = "not positive definite" if strict else "negative"
                failures.append((name, kind, X[j].tolist(), float(values[j])))
        return DefinitenessReport(not failures, failures)


@dataclass
class DefinitenessReport:
    passed: bool
    failures: list  # (function, reason, witness point, value)


# --------------------------------------------------------------------------
# Generalized gradient and directional derivatives
# --------------------------------------------------------------------------

def clarke_gradient(V: PiecewiseScalar, x, t: float = 0.0,
                    surface_tol: float = DEFAULT_SURFACE_TOL) -> ConvexSet:
    """Hull of the adjacent pieces' (grad_x V, dV/dt) in R^(n+1)."""
    key = V.region_of(x, t, surface_tol)
    return ConvexSet([V.piece_gradient(k, x, t) for k in adjacent_keys(key)],
                     merge_tol=SINGLETON_TOL)


@dataclass(frozen=True)
class DerivativeEstimate:
    value: float
    converged: bool
    tolerance: float
    estimates: tuple[float, ...] = ()

    def __float__(self):
        return self.value


def _richardson(quotients: Sequence[float], tol: float) -> DerivativeEstimate:
    """First-order Richardson on a step-halving sequence, stopping when stable."""
    extrapolated = [2 * b - a for a, b in zip(quotients, quotients[1:])]
    for prev, cur in zip(extrapolated, extrapolated[1:]):
        if abs(cur - prev) <= tol:
            return DerivativeEstimate(cur, True, tol, tuple(extrapolated))
    return DerivativeEstimate(extrapolated[-1], False, tol, tuple(extrapolated))


def _steps(x, h0, levels):
    scale = max(1.0, float(np.max(np.abs(x))) if np.size(x) else 1.0)
    return [h0 * scale / 2 ** k for k in range(levels)]


def directional_derivative(V: PiecewiseScalar, x, t: float = 0.0, v=None, *,
                           h0: float = 1e-3, levels: int = 14, tol: float = 1e-7) -> DerivativeEstimate:
    """Right directional derivative lim_{h->0+} (V(x+hv) - V(x)) / h."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("direction must be nonzero")
    base = V(x, t)
    quotients = [(V(x + h * v, t) - base) / h for h in _steps(x, h0, levels)]
    return _richardson(quotients, tol)


def _base_offsets(n: int) -> np.ndarray:
    if n <= 3:
        axis = np.linspace(-1.0, 1.0, 5)
        return np.array(list(itertools.product(axis, repeat=n)))
    rng = np.random.default_rng(12345)
    pts = rng.uniform(-1.0, 1.0, size=(240, n))
    return np.vstack([np.zeros(n), np.eye(n), -np.eye(n), pts])


def generalized_directional_derivative(V: PiecewiseScalar, x, t: float = 0.0, v=None, *,
                                       h0: float = 1e-3, levels: int = 14, tol: float = 1e-7,
                                       surface_tol: float = DEFAULT_SURFACE_TOL) -> GeneralizedEstimate:
    """Clarke's limsup of (V(y+hv) - V(y)) / h over y -> x, h -> 0+.

    At each scale rho the quotient is maximised over base points on a grid
    of radius rho about x and steps h in {rho, rho/2, rho/4}; the scale
    sequence is then Richardson-extrapolated.  The support function of the
    Clarke gradient in direction (v, 0) is returned alongside as a cross-check.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("direction must be nonzero")
    offsets = _base_offsets(len(x))
    fractions = (1.0, 0.5, 0.25)
    quotients = []
    for rho in _steps(x, h0, levels):
        best = -math.inf
        for u in offsets:
            y = x + rho * u
            vy = V(y, t)
            for s in fractions:
                h = rho * s
                best = max(best, (V(y + h * v, t) - vy) / h)
        quotients.append(best)
    est = _richardson(quotients, tol)
    support = clarke_gradient(V, x, t, surface_tol).support(np.append(v, 0.0))
    return GeneralizedEstimate(est.value, est.converged, est.tolerance, est.estimates, support)


@dataclass(frozen=True)
class GeneralizedEstimate(DerivativeEstimate):
    support: float = math.nan

    @property
    def consistent(self) -> bool:
        return abs(self.value - self.support) <= 10 * REGULARITY_TOL


@dataclass(frozen=True)
class DirectionVerdict:
    direction: tuple[float, ...]
    one_sided: float
    generalized: float
    regular: bool | None  # None when either limit failed to converge


@dataclass(frozen=True)
class RegularityVerdict:
    regular: bool | None
    directions: tuple[DirectionVerdict, ...]

    def __bool__(self):
        return bool(self.regular)


def check_regularity(V: PiecewiseScalar, x, t: float = 0.0, directions=None,
                     tol: float = REGULARITY_TOL) -> RegularityVerdict:
    """Compare f'(x; v) with f°(x; v) for every tested direction.

    Defaults to the coordinate directions and their negatives.  The overall
    verdict is False if any direction disagrees, None if none disagrees but
    some estimate did not converge, and True otherwise.
    """
    x = np.asarray(x, dtype=float)
    if directions is None:
        eye = np.eye(len(x))
        directions = list(eye) + list(-eye)
    directions = [np.atleast_1d(np.asarray(d, dtype=float)) for d in directions]
    if not directions:
        raise ValueError("need at least one direction")
    verdicts = []
    for d in directions:
        one = directional_derivative(V, x, t, d)
        gen = generalized_directional_derivative(V, x, t, d)
        if not (one.converged and gen.converged):
            ok = None
        else:
            ok = abs(one.value - gen.value) <= tol
        verdicts.append(DirectionVerdict(tuple(d.tolist()), one.value, gen.value, ok))
    flags = [d.regular for d in verdicts]
    if any(f is False for f in flags):
        overall = False
    elif any(f is None for f in flags):
        overall = None
    else:
        overall = True
    return RegularityVerdict(overall, tuple(verdicts))


# --------------------------------------------------------------------------
# Set-valued derivative
# --------------------------------------------------------------------------

def _simplex_grid(p: int, resolution: int) -> np.ndarray:
    """Barycentric grid with spacing 1/(resolution-1) on the (p-1)-simplex."""
    N = max(resolution - 1, 1)
    if math.comb(N + p - 1, p - 1) > _MAX_SIMPLEX_GRID:
        rng = np.random.default_rng(2024)
        return rng.dirichlet(np.ones(p), size=_MAX_SIMPLEX_GRID)
    rows = []
    for cut in itertools.combinations(range(N + p - 1), p - 1):
        parts = np.diff(np.concatenate([[-1], cut, [N + p - 1]])) - 1
        rows.append(parts / N)
    return np.array(rows)


def xi_candidates(G: np.ndarray, A: np.ndarray, resolution: int = DEFAULT_XI_RESOLUTION) -> np.ndarray:
    """Candidate elements of conv(G) at which the envelopes can be extremal.

    ``G`` holds generalized-gradient vertices (rows), ``A`` the augmented
    Filippov vertices ``(v, 1)``.  Candidates are the vertices, a barycentric
    grid, and along every edge of conv(G) the points where a coordinate of
    xi vanishes or two augmented vertices tie (the kinks of the envelopes).
    """
    p = len(G)
    if p == 1:
        return G.copy()
    cands = [G, _simplex_grid(p, resolution) @ G]
    edge_points = []
    for i, j in itertools.combinations(range(p), 2):
        a, b = G[i], G[j]
        d = b - a
        numerators = [-a]
        denominators = [d]
        for k, l in itertools.combinations(range(len(A)), 2):
            w = A[k] - A[l]
            numerators.append(np.array([-(a @ w)]))
            denominators.append(np.array([d @ w]))
        num = np.concatenate(numerators)
        den = np.concatenate(denominators)
        ok = np.abs(den) > 1e-300
        s = num[ok] / den[ok]
        s = s[(s >= 0) & (s <= 1)]
        edge_points.extend(a + si * d for si in s)
    if edge_points:
        cands.append(np.array(edge_points))
    return np.vstack(cands)


def setvalued_derivative(V: PiecewiseScalar, F: PiecewiseField, x, t: float = 0.0,
                         surface_tol: float = DEFAULT_SURFACE_TOL,
                         xi_resolution: int = DEFAULT_XI_RESOLUTION) -> Interval:
    """Intersection over xi in dV of the intervals xi . (K[f](x, t); 1).

    For each candidate xi the interval is [min, max] of xi . (v, 1) over the
    Filippov vertices v; the result is [max of lower ends, min of upper ends]
    and is empty when those cross.
    """
    x = np.asarray(x, dtype=float)
    G = clarke_gradient(V, x, t, surface_tol).vertices
    K = filippov_map(F, x, t, surface_tol).vertices
    A = np.hstack([K, np.ones((len(K), 1))])
    xi = xi_candidates(G, A, xi_resolution)
    products = xi @ A.T
    lower = float(np.max(products.min(axis=1)))
    upper = float(np.min(products.max(axis=1)))
    return Interval(lower, upper)


@dataclass
class BoundsReport:
    passed: bool
    worst_lower_margin: float  # min of V - W1
    worst_upper_margin: float  # min of W2 - V
    violations: list  # (which, x, t, margin)


def check_bounds(V: PiecewiseScalar, triple: ComparisonTriple, samples, tol: float = 1e-12) -> BoundsReport:
    """Check W1(x) <= V(x, t) <= W2(x) at every sample ``(x, t)``."""
    worst_lo = worst_hi = math.inf
    violations = []
    for xs, t in samples:
        xs = np.asarray(xs, dtype=float)
        v = V(xs, t)
        lo = v - triple.w1(xs)
        hi = triple.w2(xs) - v
        worst_lo, worst_hi = min(worst_lo, lo), min(worst_hi, hi)
        if lo < -tol:
            violations.append(("W1 <= V", xs.tolist(), float(t), lo))
        if hi < -tol:
            violations.append(("V <= W2", xs.tolist(), float(t), hi))
    return BoundsReport(not violations, worst_lo, worst_hi, violations)


def check_bounds_grid(V: PiecewiseScalar, triple: ComparisonTriple, X, t_grid,
                      tol: float = 1e-12) -> BoundsReport:
    """Vectorised :func:`check_bounds` over grid columns ``X`` (n, N) and times."""
    X = np.asarray(X, dtype=float)
    w1, w2 = triple.w1_np(X), triple.w2_np(X)
    worst_lo = worst_hi = math.inf
    violations = []
    for t in t_grid:
        v = V.value_grid(X, t)
        lo, hi = v - w1, w2 - v
        worst_lo, worst_hi = min(worst_lo, float(lo.min())), min(worst_hi, float(hi.min()))
        for which, margin in (("W1 <= V", lo), ("V <= W2", hi)):
            j = int(np.argmin(margin))
            if margin[j] < -tol:
                violations.append((which, X[:, j].tolist(), float(t), float(margin[j])))
    return BoundsReport(not violations, worst_lo, worst_hi, violations)

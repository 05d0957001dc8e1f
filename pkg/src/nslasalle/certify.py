"""Sampling-based certificates for the nonsmooth LaSalle-Yoshizawa hypotheses.

Two checks are offered:

* :func:`check_corollary2` verifies the pointwise bound ``max Vdot~(x, t) <= -W(x)``
  on a grid over the domain, which covers every Filippov solution started in
  ``{W2 <= c}``;
* :func:`check_corollary1` verifies ``dV/dt <= -W`` along one simulated
  trajectory, away from its switching events.

Both also check the comparison bounds, the choice of ``c`` below the minimum
of ``W1`` on the sphere of radius ``r``, and the chain of sublevel sets used to
trap solutions inside the ball.  A passing certificate means *no violation was
found at the sampled resolution*; the sample counts and tolerances travel with
it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import Expression
from .field import DEFAULT_SURFACE_TOL, PiecewiseField, validate_field
from .lyapunov import (DEFAULT_XI_RESOLUTION, ComparisonTriple, PiecewiseScalar, check_bounds,
                       check_bounds_grid, check_regularity, setvalued_derivative)
from .simulate import Trajectory, _check_provenance

DEFAULT_SAFETY = 0.9


class DegenerateLevelError(ValueError):
    """W1 is not positive on the sphere of radius r, so no level c exists."""


@dataclass(frozen=True)
class DomainSpec:
    """Box ``D = [lower, upper]`` with a ball ``B_r`` inside it, plus sampling density."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    r: float
    samples_per_axis: int = 64
    sphere_samples: int = 256

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("box bounds must have matching, nonzero length")
        if any(lo >= 0 or hi <= 0 for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("the box must contain the origin in its interior")
        if self.r <= 0:
            raise ValueError("r must be positive")
        if self.samples_per_axis < 8:
            raise ValueError("at least 8 samples per axis are required")
        if self.sphere_samples < 2:
            raise ValueError("need at least 2 sphere samples")
        margin = min(min(-lo, hi) for lo, hi in zip(self.lower, self.upper))
        if self.r > margin:
            raise ValueError(f"ball of radius {self.r!r} does not fit in the box (max {margin!r})")

    @classmethod
    def symmetric(cls, half_width: float, dimension: int, r: float, **kw) -> DomainSpec:
        return cls((-half_width,) * dimension, (half_width,) * dimension, r, **kw)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def box(self) -> list[tuple[float, float]]:
        return list(zip(self.lower, self.upper))

    def axes(self) -> list[np.ndarray]:
        """Per-axis samples: an even grid with the origin coordinate added."""
        return [np.union1d(np.linspace(lo, hi, self.samples_per_axis), [0.0])
                for lo, hi in self.box]

    def grid(self) -> np.ndarray:
        """Grid points as an (N, n) array."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def sphere(self) -> np.ndarray:
        """Deterministic points on the sphere of radius r (nested as counts double)."""
        n, S, r = self.dimension, self.sphere_samples, self.r
        if n == 1:
            return np.array([[-r], [r]])
        if n == 2:
            angles = 2 * np.pi * np.arange(S) / S
            return r * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        rng = np.random.default_rng(7)
        pts = rng.standard_normal((S, n))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        axes = np.vstack([np.eye(n), -np.eye(n)])
        return r * np.vstack([axes, pts])


@dataclass
class HypothesisResult:
    name: str
    passed: bool
    worst_margin: float
    witness: dict | None = None
    detail: str = ""


@dataclass
class Certificate:
    kind: str
    hypotheses: list[HypothesisResult]
    r: float
    c: float
    sphere_min: float
    sphere_argmin: list[float] | None
    samples: dict
    tolerances: dict
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(h.passed for h in self.hypotheses)

    def __getitem__(self, name: str) -> HypothesisResult:
        for h in self.hypotheses:
            if h.name == name:
                return h
        raise KeyError(name)

    def failures(self) -> list[HypothesisResult]:
        return [h for h in self.hypotheses if not h.passed]


# --------------------------------------------------------------------------
# Level selection and set containments
# --------------------------------------------------------------------------

def sphere_minimum(W1: Expression, spec: DomainSpec,
                   parameters: Mapping[str, float] | None = None) -> tuple[float, np.ndarray]:
    pts = spec.sphere()
    values = W1.compile(parameters, backend="numpy")(pts.T)
    j = int(np.nanargmin(values))
    return float(values[j]), pts[j]


def compute_c(W1: Expression, spec: DomainSpec, safety: float = DEFAULT_SAFETY,
              parameters: Mapping[str, float] | None = None) -> float:
    """``safety`` times the sampled minimum of W1 on the sphere of radius r."""
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    smin, arg = sphere_minimum(W1, spec, parameters)
    if not smin > 0:
        raise DegenerateLevelError(
            f"min of W1 on |x|={spec.r!r} is {smin!r} at {arg.tolist()}; W1 is not positive definite there")
    return safety * smin


def initial_set_membership(x0, W2: Expression, c: float, r: float,
                           parameters: Mapping[str, float] | None = None) -> bool:
    """True iff W2(x0) <= c and |x0| < r."""
    x0 = np.asarray(x0, dtype=float)
    return bool(W2.compile(parameters)(x0) <= c and np.linalg.norm(x0) < r)


@dataclass
class ContainmentReport:
    passed: bool
    checked: int
    violations: list  # (implication, x, t, margin)

    @property
    def worst_margin(self) -> float:
        return min((v[3] for v in self.violations), default=0.0)


def containment_check(V: PiecewiseScalar, triple: ComparisonTriple, c: float, spec: DomainSpec,
                      t_grid: Sequence[float], tol: float = 1e-12) -> ContainmentReport:
    """Sampled check of {W2<=c} in {V(.,t)<=c} in {W1<=c} in the open ball B_r.

    Samples are the grid points of the closed ball plus the sphere samples.
    Each implication is checked pointwise; a violation records its margin
    (how far the consequent misses).
    """
    grid = spec.grid()
    pts = np.vstack([grid[np.linalg.norm(grid, axis=1) <= spec.r], spec.sphere()])
    X = pts.T
    w1, w2 = triple.w1_np(X), triple.w2_np(X)
    norms = np.linalg.norm(pts, axis=1)
    violations = []

    def worst(mask, margin, label, t):
        if mask.any():
            j = int(np.flatnonzero(mask)[np.argmin(margin[mask])])
            violations.append((label, pts[j].tolist(), t, float(margin[j])))

    for t in t_grid:
        v = V.value_grid(X, t)
        worst((w2 <= c) & (v > c + tol), c - v, "W2<=c => V<=c", float(t))
        worst((v <= c) & (w1 > c + tol), c - w1, "V<=c => W1<=c", float(t))
    # in the open ball: the sublevel set of W1 must stay off the sphere
    worst((w1 <= c) & (norms >= spec.r * (1 - 1e-12)), w1 - c, "W1<=c => |x|<r", math.nan)
    return ContainmentReport(not violations, len(pts) * len(t_grid), violations)


# --------------------------------------------------------------------------
# Shared hypothesis checks
# --------------------------------------------------------------------------

def _witness(x, t=None, **extra) -> dict:
    w = {"x": [float(v) for v in np.atleast_1d(x)]}
    if t is not None and not (isinstance(t, float) and math.isnan(t)):
        w["t"] = float(t)
    w.update(extra)
    return w


def _field_hypothesis(F, spec, t_grid) -> HypothesisResult:
    report = validate_field(F, spec.box, t_grid, samples_per_axis=min(spec.samples_per_axis, 17))
    worst = report.growth_bound - max(report.origin_radii)
    if report.passed:
        return HypothesisResult("field_bounded", True, worst,
                                detail=f"max sampled |f| {report.max_norm!r}")
    k = int(np.argmax(report.origin_radii))
    return HypothesisResult("field_bounded", False, worst,
                            _witness(np.zeros(F.dimension), t_grid[k]), "; ".join(report.findings))


def _definiteness_hypothesis(triple, spec) -> HypothesisResult:
    report = triple.check_definiteness(spec.grid())
    if report.passed:
        return HypothesisResult("definiteness", True, 0.0,
                                detail="W1, W2 positive definite; W positive semi-definite (sampled)")
    name, reason, x, value = report.failures[0]
    return HypothesisResult("definiteness", False, -abs(value), _witness(x, function=name),
                            f"{name} {reason}")


def _regularity_hypothesis(V, points, t) -> HypothesisResult:
    worst, witness, inconclusive = 0.0, None, False
    for x in points:
        verdict = check_regularity(V, x, t)
        for d in verdict.directions:
            gap = abs(d.one_sided - d.generalized)
            if d.regular is None:
                inconclusive = True
            if d.regular is not True and (witness is None or gap > worst):
                worst, witness = gap, _witness(x, t, direction=list(d.direction))
    ok = witness is None
    detail = f"checked {len(points)} point(s) along coordinate directions only"
    if inconclusive:
        detail += "; some limits did not converge"
    return HypothesisResult("regularity", ok, -worst, witness, detail)


def _level_hypothesis(triple, spec, safety):
    smin, arg = sphere_minimum(triple.W1, spec, triple.parameters)
    if not smin > 0:
        return (HypothesisResult("level", False, smin, _witness(arg),
                                 "W1 not positive on the sphere |x| = r"), math.nan, smin, arg)
    c = safety * smin
    return (HypothesisResult("level", True, smin - c,
                             detail=f"c = {safety!r} x min W1 on |x|=r"), c, smin, arg)


def _containment_hypothesis(V, triple, c, spec, t_grid) -> HypothesisResult:
    if math.isnan(c):
        return HypothesisResult("containment", False, math.nan, None, "no valid level c")
    report = containment_check(V, triple, c, spec, t_grid)
    if report.passed:
        return HypothesisResult("containment", True, 0.0,
                                detail=f"{report.checked} sample/time pairs")
    label, x, t, margin = min(report.violations, key=lambda v: v[3])
    return HypothesisResult("containment", False, margin, _witness(x, t), label)


def _bounds_hypothesis(report, where: str) -> HypothesisResult:
    worst = min(report.worst_lower_margin, report.worst_upper_margin)
    if report.passed:
        return HypothesisResult("bounds", True, worst, detail=f"W1 <= V <= W2 {where}")
    which, x, t, margin = min(report.violations, key=lambda v: v[3])
    return HypothesisResult("bounds", False, margin, _witness(x, t), which)


def _regularity_points(spec: DomainSpec) -> list[np.ndarray]:
    n = spec.dimension
    pts = [np.zeros(n)]
    for k in range(n):
        e = np.zeros(n)
        e[k] = 0.5 * spec.r
        pts.append(e)
    pts.append(np.full(n, 0.3 * spec.r / math.sqrt(n)))
    return pts


# --------------------------------------------------------------------------
# Certificates
# --------------------------------------------------------------------------

def check_corollary2(F: PiecewiseField, V: PiecewiseScalar, triple: ComparisonTriple,
                     spec: DomainSpec, t_grid: Sequence[float], *, tol: float = 1e-9,
                     safety: float = DEFAULT_SAFETY, surface_tol: float = DEFAULT_SURFACE_TOL,
                     xi_resolution: int = DEFAULT_XI_RESOLUTION) -> Certificate:
    """Pointwise certificate: every element of Vdot~(x, t) is <= -W(x) on the grid."""
    if not V.is_smooth:
        raise ValueError("the pointwise certificate needs V continuously differentiable in x "
                         "(a single-piece candidate)")
    if F.dimension != spec.dimension or V.dimension != spec.dimension:
        raise ValueError("field, candidate and domain dimensions differ")
    t_grid = [float(t) for t in t_grid]
    grid = spec.grid()
    hyps = [_field_hypothesis(F, spec, t_grid), _definiteness_hypothesis(triple, spec),
            _regularity_hypothesis(V, _regularity_points(spec), t_grid[0]),
            _bounds_hypothesis(check_bounds_grid(V, triple, grid.T, t_grid), "on the grid")]
    level, c, smin, arg = _level_hypothesis(triple, spec, safety)
    hyps += [level, _containment_hypothesis(V, triple, c, spec, t_grid)]

    w = triple.w_np(grid.T)
    worst, witness, empty = math.inf, None, 0
    for t in t_grid:
        for x, wx in zip(grid, w):
            vdot = setvalued_derivative(V, F, x, t, surface_tol, xi_resolution)
            if vdot.is_empty:
                empty += 1
                continue
            margin = -wx - vdot.upper
            if margin < worst:
                worst, witness = margin, _witness(x, t, vdot=[vdot.lower, vdot.upper], W=float(wx))
    worst, ok = float(worst), bool(worst >= -tol)
    detail = f"max of Vdot~ <= -W at {len(grid) * len(t_grid)} sample/time pairs"
    if empty:
        detail += f" ({empty} with empty Vdot~)"
    hyps.append(HypothesisResult("derivative_bound", ok, worst, None if ok else witness, detail))

    return Certificate(
        kind="corollary2", hypotheses=hyps, r=spec.r, c=c, sphere_min=smin,
        sphere_argmin=[float(v) for v in arg],
        samples={"grid_points": len(grid), "samples_per_axis": spec.samples_per_axis,
                 "t_grid": t_grid, "sphere_samples": len(spec.sphere()),
                 "box": [list(b) for b in spec.box]},
        tolerances={"derivative": tol, "surface": surface_tol, "xi_resolution": xi_resolution,
                    "safety": safety},
        notes=["sampling-based: no violation found at this resolution",
               "regularity tested along coordinate directions at a few points only"],
    )


def check_corollary1(F: PiecewiseField, V: PiecewiseScalar, triple: ComparisonTriple,
                     spec: DomainSpec, trajectory: Trajectory, *, tol: float = 1e-5,
                     window: float | None = None, safety: float = DEFAULT_SAFETY) -> Certificate:
    """Certificate along one solution: dV/dt <= -W away from events, x stays in B_r."""
    _check_provenance(F, trajectory)
    times, states = trajectory.times, trajectory.states
    t_grid = [float(times[0]), float(times[-1])]
    hyps = [_field_hypothesis(F, spec, t_grid), _definiteness_hypothesis(triple, spec),
            _regularity_hypothesis(V, [states[0]], float(times[0]))]
    hyps.append(_bounds_hypothesis(
        check_bounds(V, triple, list(zip(states, times))), "along the trajectory"))
    level, c, smin, arg = _level_hypothesis(triple, spec, safety)
    hyps.append(level)

    x0 = states[0]
    if math.isnan(c):
        hyps.append(HypothesisResult("initial_set", False, math.nan, _witness(x0, times[0]),
                                     "no valid level c"))
    else:
        w2 = triple.w2(x0)
        inside = initial_set_membership(x0, triple.W2, c, spec.r, triple.parameters)
        margin = min(c - w2, spec.r - float(np.linalg.norm(x0)))
        hyps.append(HypothesisResult("initial_set", inside, margin,
                                     None if inside else _witness(x0, times[0], W2=w2),
                                     "W2(x0) <= c and |x0| < r"))

    norms = np.linalg.norm(states, axis=1)
    k = int(np.argmax(norms))
    ok = bool(norms[k] < spec.r)
    hyps.append(HypothesisResult("confinement", ok, spec.r - float(norms[k]),
                                 None if ok else _witness(states[k], times[k]), "|x(t)| < r"))

    v_vals = np.array([V(x, t) for x, t in zip(states, times)])
    dv = np.gradient(v_vals, times)
    w_vals = np.array([triple.w(x) for x in states])
    mask = ~trajectory.near_events(window if window is not None else 2.0 * trajectory.config.h)
    mask[0] = mask[-1] = False
    margins = np.where(mask, -w_vals - dv, np.inf)
    k = int(np.argmin(margins))
    worst = float(margins[k]) if mask.any() else math.inf
    ok = bool(worst >= -tol)
    hyps.append(HypothesisResult(
        "derivative_bound", ok, worst,
        None if ok else _witness(states[k], times[k], dVdt=float(dv[k]), W=float(w_vals[k])),
        f"central-difference dV/dt <= -W at {int(mask.sum())} samples outside event windows"))

    return Certificate(
        kind="corollary1", hypotheses=hyps, r=spec.r, c=c, sphere_min=smin,
        sphere_argmin=[float(v) for v in arg],
        samples={"trajectory_samples": len(times), "events": len(trajectory.events),
                 "grid_points": len(spec.grid()), "sphere_samples": len(spec.sphere()),
                 "box": [list(b) for b in spec.box]},
        tolerances={"derivative": tol, "event_window": window if window is not None
                    else 2.0 * trajectory.config.h, "safety": safety},
        notes=["sampling-based: no violation found at this resolution",
               "the a.e. qualifier is realised by excluding samples near switching events"],
    )

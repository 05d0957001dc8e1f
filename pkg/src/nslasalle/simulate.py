"""Event-driven integration of Filippov solutions and convergence diagnostics.

Inside a region the active piece is integrated with classical RK4 on a fixed
grid.  When a step changes the sign of a switching function the crossing
time is located by bisection.  At the surface the one-sided rates

    a+ = grad g . f+ + dg/dt,    a- = grad g . f- + dg/dt

decide between crossing (same sign) and sliding (a- >= 0 >= a+).  While
sliding, the state follows the convex combination of f+ and f- tangent to the
surface and is re-projected onto it after each step; sliding ends when that
combination would need a weight outside [0, 1].

Only codimension-1 sliding is handled: touching a second surface while
sliding, or two surfaces at once, raises :class:`MultiSurfaceContactError`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .expr import Expression
from .field import DEFAULT_SURFACE_TOL, PiecewiseField, filippov_map, region_of
from .lyapunov import PiecewiseScalar

log = logging.getLogger(__name__)

CROSSING = "crossing"
SLIDING_ONSET = "sliding-onset"
SLIDING_EXIT = "sliding-exit"


class IntegratorError(RuntimeError):
    pass


class MaxStepsExceededError(IntegratorError):
    pass


class MultiSurfaceContactError(IntegratorError):
    pass


class ProvenanceError(ValueError):
    """A trajectory was used with a field other than the one that produced it."""


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-3
    event_tol: float = 1e-12
    surface_tol: float = DEFAULT_SURFACE_TOL
    max_steps: int = 10_000_000
    exit_check_period: int = 1

    def __post_init__(self):
        if min(self.h, self.event_tol, self.surface_tol) <= 0 or self.max_steps < 1 \
                or self.exit_check_period < 1:
            raise ValueError("integrator settings must be positive")
        if self.event_tol >= self.h:
            raise ValueError("event_tol must be smaller than h")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str
    surface: int
    note: str = ""


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray           # (N, n)
    regions: list                # RegionKey per sample; 0 marks the sliding surface
    sliding: np.ndarray          # (N, m) bool
    events: list[Event]
    field_id: str
    config: IntegratorConfig
    annotations: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.times)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def event_times(self) -> np.ndarray:
        return np.array([e.t for e in self.events])

    def near_events(self, halfwidth: float | None = None) -> np.ndarray:
        """Mask of samples within ``halfwidth`` (default 2h) of an event."""
        if halfwidth is None:
            halfwidth = 2.0 * self.config.h
        mask = np.zeros(len(self.times), dtype=bool)
        for te in self.event_times():
            mask |= np.abs(self.times - te) <= halfwidth
        return mask

    def velocities(self) -> np.ndarray:
        """Finite-difference velocity (second order, nonuniform grid aware)."""
        return np.gradient(self.states, self.times, axis=0)

    def any_sliding(self) -> np.ndarray:
        return self.sliding.any(axis=1) if self.sliding.size else np.zeros(len(self.times), bool)

    def state_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.states[:, i]) for i in range(self.dimension)])


# --------------------------------------------------------------------------
# Integrator
# --------------------------------------------------------------------------

def _rk4(f: Callable, x: np.ndarray, t: float, tau: float) -> np.ndarray:
    k1 = f(x, t)
    k2 = f(x + 0.5 * tau * k1, t + 0.5 * tau)
    k3 = f(x + 0.5 * tau * k2, t + 0.5 * tau)
    k4 = f(x + tau * k3, t + tau)
    return x + tau / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _with(key: tuple, i: int, value: int) -> tuple:
    key = list(key)
    key[i] = value
    return tuple(key)


class _Solver:
    def __init__(self, F: PiecewiseField, cfg: IntegratorConfig):
        self.F = F
        self.cfg = cfg
        self.events: list[Event] = []
        self.annotations: list[str] = []

    # ---- one-sided rates and the sliding field ----
    def rates(self, i, key, x, t):
        f_plus = self.F.piece_value(_with(key, i, 1), x, t)
        f_minus = self.F.piece_value(_with(key, i, -1), x, t)
        a_plus = self.F.surface_rate(i, x, t, f_plus)
        a_minus = self.F.surface_rate(i, x, t, f_minus)
        return f_plus, f_minus, a_plus, a_minus

    def sliding_field(self, i, key):
        def f(x, t):
            f_plus, f_minus, a_plus, a_minus = self.rates(i, key, x, t)
            denom = a_minus - a_plus
            alpha = 0.5 if denom == 0 else a_minus / denom
            return alpha * f_plus + (1 - alpha) * f_minus
        return f

    def region_field(self, key):
        return lambda x, t: self.F.piece_value(key, x, t)

    def project(self, i, x, t):
        for _ in range(8):
            g = self.F.surface_values(x, t)[i]
            if abs(g) <= 1e-15:
                break
            grad = self.F.surface_gradient(i, x, t)
            x = x - g * grad / (grad @ grad)
        return x

    # ---- decisions at a surface ----
    def decide(self, i, key, x, t, arrival: int | None):
        """Return the new mode ``(kind, key)`` at a point on surface ``i``."""
        _, _, a_plus, a_minus = self.rates(i, key, x, t)
        if a_minus >= 0 >= a_plus:
            return "slide", _with(key, i, 0)
        if a_minus > 0 and a_plus > 0:
            return "region", _with(key, i, 1)
        if a_minus < 0 and a_plus < 0:
            return "region", _with(key, i, -1)
        # a- < 0 < a+: both sides repel, Filippov solutions branch here
        side = arrival if arrival is not None else 1
        self.annotations.append(
            f"non-unique branch at t={t!r} on surface {i}: following side {'+' if side > 0 else '-'}")
        return "region", _with(key, i, side)

    def bisect(self, step: Callable, predicate: Callable, tau: float):
        """Smallest step in (0, tau] where ``predicate`` holds, to event_tol."""
        lo, hi = 0.0, tau
        x_hi = step(hi)
        while hi - lo > self.cfg.event_tol:
            mid = 0.5 * (lo + hi)
            x_mid = step(mid)
            if predicate(x_mid, mid):
                hi, x_hi = mid, x_mid
            else:
                lo = mid
        return lo, hi, step(lo), x_hi


def integrate(F: PiecewiseField, x0, t0: float, tf: float,
              cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate a Filippov solution of x' = f(x, t) from (x0, t0) to tf."""
    cfg = cfg or IntegratorConfig()
    if not tf > t0:
        raise ValueError("tf must exceed t0")
    x = np.array(x0, dtype=float).reshape(-1)
    if len(x) != F.dimension:
        raise ValueError(f"x0 has {len(x)} components, field has dimension {F.dimension}")
    solver = _Solver(F, cfg)
    m = len(F.surfaces)
    t = float(t0)

    times, states, regions, sliding = [], [], [], []

    def record(t, x, mode, key):
        times.append(t)
        states.append(x.copy())
        regions.append(key)
        flags = np.zeros(m, dtype=bool)
        if mode == "slide":
            flags[[j for j, k in enumerate(key) if k == 0]] = True
        sliding.append(flags)

    key = region_of(F, x, t, cfg.surface_tol)
    on = [i for i, k in enumerate(key) if k == 0]
    if len(on) > 1:
        raise MultiSurfaceContactError(f"x0 lies on {len(on)} surfaces at once")
    mode = "region"
    if on:
        i = on[0]
        mode, key = solver.decide(i, key, x, t, None)
        if mode == "slide":
            x = solver.project(i, x, t)
            solver.events.append(Event(t, SLIDING_ONSET, i, "initial state on surface"))
    record(t, x, mode, key)

    n_grid = int(math.ceil((tf - t0) / cfg.h - 1e-9))
    grid_index = 1
    steps = 0
    slide_steps = 0
    min_gap = 1e-3 * cfg.h

    while t < tf:
        steps += 1
        if steps > cfg.max_steps:
            raise MaxStepsExceededError(f"more than {cfg.max_steps} steps before t={tf!r}")
        target = tf if grid_index >= n_grid else t0 + grid_index * cfg.h
        if target - t < min_gap and target < tf:
            grid_index += 1
            continue
        tau = target - t

        if mode == "region":
            f = solver.region_field(key)
            step = lambda s, x=x, t=t, f=f: _rk4(f, x, t, s)
            x_new = step(tau)

            def crossed(xs, s, key=key, t=t):
                g = F.surface_values(xs, t + s)
                return any(key[j] * g[j] < 0 for j in range(m))

            if m and crossed(x_new, tau):
                lo, hi, x_lo, x_hi = solver.bisect(step, crossed, tau)
                t_event = t + hi
                g = F.surface_values(x_hi, t_event)
                hit = [j for j in range(m) if key[j] * g[j] < 0]
                if len(hit) > 1:
                    raise MultiSurfaceContactError(
                        f"surfaces {hit} reached simultaneously at t={t_event!r}")
                i = hit[0]
                new_mode, new_key = solver.decide(i, key, x_hi, t_event, key[i])
                if new_mode == "region" and new_key[i] == key[i] and lo <= 0:
                    # turning back at the very start of the step would stall
                    new_key = _with(key, i, -key[i])
                if new_mode == "slide":
                    x = solver.project(i, x_hi, t_event)
                    solver.events.append(Event(t_event, SLIDING_ONSET, i))
                else:
                    # keep a state lying strictly on the chosen side
                    x = x_hi if new_key[i] != key[i] else x_lo
                    if new_key[i] != key[i]:
                        solver.events.append(Event(t_event, CROSSING, i))
                    else:
                        t_event = t + lo
                mode, key, t = new_mode, new_key, t_event
                record(t, x, mode, key)
                continue
            x, t = x_new, target
            grid_index += 1
            record(t, x, mode, key)
            continue

        # sliding on surface i
        i = key.index(0)
        f = solver.sliding_field(i, key)
        step = lambda s, x=x, t=t, f=f, i=i: solver.project(i, _rk4(f, x, t, s), t + s)

        def left_side(xs, s, key=key, t=t, i=i):
            g = F.surface_values(xs, t + s)
            return any(key[j] * g[j] < 0 for j in range(m) if j != i)

        def exiting(xs, s, key=key, t=t, i=i):
            _, _, a_plus, a_minus = solver.rates(i, key, xs, t + s)
            return a_minus < 0 or a_plus > 0

        x_new = step(tau)
        if m > 1 and left_side(x_new, tau):
            _, hi, _, _ = solver.bisect(step, left_side, tau)
            raise MultiSurfaceContactError(
                f"sliding on surface {i} reached another surface at t={t + hi!r}")
        slide_steps += 1
        if slide_steps % cfg.exit_check_period == 0 and exiting(x_new, tau):
            _, hi, _, x_hi = solver.bisect(step, exiting, tau)
            t_event = t + hi
            _, _, a_plus, a_minus = solver.rates(i, key, x_hi, t_event)
            if a_plus > 0 and a_minus < 0:
                side = 1
                solver.annotations.append(
                    f"non-unique branch at sliding exit t={t_event!r} on surface {i}: following side +")
            else:
                side = 1 if a_plus > 0 else -1
            mode, key, x, t = "region", _with(key, i, side), x_hi, t_event
            solver.events.append(Event(t, SLIDING_EXIT, i))
            record(t, x, mode, key)
            continue
        x, t = x_new, target
        grid_index += 1
        record(t, x, mode, key)

    return Trajectory(np.array(times), np.array(states), regions,
                      np.array(sliding).reshape(len(times), m), solver.events,
                      F.provenance_id, cfg, solver.annotations)


# --------------------------------------------------------------------------
# Diagnostics
# --------------------------------------------------------------------------

def _check_provenance(F: PiecewiseField, traj: Trajectory):
    if traj.field_id != F.provenance_id:
        raise ProvenanceError(
            f"trajectory was produced by field {traj.field_id}, not {F.provenance_id}")


@dataclass
class InclusionReport:
    compliance: float            # fraction of checked samples inside K[f] (to tol)
    checked: int
    worst_distance: float
    worst_time: float
    tol: float


def inclusion_check(F: PiecewiseField, traj: Trajectory, cfg: IntegratorConfig | None = None,
                    tol: float = 1e-3, window: float | None = None) -> InclusionReport:
    """Fraction of interior samples whose finite-difference velocity lies in K[f].

    Samples within ``window`` (default 2h) of an event are skipped, since the
    velocity is undefined at those instants.
    """
    _check_provenance(F, traj)
    cfg = cfg or traj.config
    v = traj.velocities()
    mask = ~traj.near_events(window if window is not None else 2.0 * cfg.h)
    mask[0] = mask[-1] = False
    slide = traj.any_sliding()
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return InclusionReport(1.0, 0, 0.0, math.nan, tol)
    ok = 0
    worst, worst_t = 0.0, math.nan
    for k in idx:
        stol = 2.0 * cfg.surface_tol if slide[k] else cfg.surface_tol
        d = filippov_map(F, traj.states[k], traj.times[k], stol).distance(v[k])
        if d <= tol:
            ok += 1
        if d > worst:
            worst, worst_t = d, float(traj.times[k])
    return InclusionReport(ok / len(idx), len(idx), worst, worst_t, tol)


@dataclass
class ConvergenceReport:
    times: np.ndarray
    V: np.ndarray
    W: np.ndarray
    integral_W: np.ndarray
    monotone: bool               # V non-increasing up to the monotonicity slack
    max_increase: float          # largest V(t_{k+1}) - V(t_k)
    bounded_by_initial: bool     # V(t_k) <= V(t_0) + slack for all k
    integral_bounded: bool       # int W <= V(t_0) + tol
    tail_sup_W: float
    converged: bool              # tail sup of W <= tol
    state_tail_sup: float
    tail_start: float
    notes: list[str] = field(default_factory=list)


def barbalat_report(traj: Trajectory, V: PiecewiseScalar, W: Expression,
                    tail_fraction: float = 0.25, tol: float = 1e-4, monotone_tol: float = 1e-6,
                    parameters: Mapping[str, float] | None = None) -> ConvergenceReport:
    """V monotonicity, the integral bound on W, and the tail of W along ``traj``."""
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    times = traj.times
    tail_start = times[-1] - tail_fraction * (times[-1] - times[0])
    tail = times >= tail_start
    if tail.sum() < 100:
        raise ValueError("tail window holds fewer than 100 samples; lengthen the horizon")
    params = dict(V.parameters)
    params.update(parameters or {})
    w = W.compile(params)
    v_vals = np.array([V(x, t) for x, t in zip(traj.states, times)])
    w_vals = np.array([w(x) for x in traj.states])
    integral = cumulative_trapezoid(w_vals, times, initial=0.0)
    increases = np.diff(v_vals)
    max_inc = float(increases.max()) if len(increases) else 0.0
    tail_sup = float(w_vals[tail].max())
    return ConvergenceReport(
        times=times, V=v_vals, W=w_vals, integral_W=integral,
        monotone=max_inc <= monotone_tol,
        max_increase=max_inc,
        bounded_by_initial=bool(np.all(v_vals <= v_vals[0] + monotone_tol)),
        integral_bounded=bool(integral[-1] <= v_vals[0] + tol),
        tail_sup_W=tail_sup,
        converged=tail_sup <= tol,
        state_tail_sup=float(np.linalg.norm(traj.states[tail], axis=1).max()),
        tail_start=float(tail_start),
        notes=["uniform continuity of W(x(t)) is assumed, not verified"],
    )

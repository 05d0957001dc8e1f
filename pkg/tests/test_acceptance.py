"""Acceptance gate: one check per criterion, each reporting a PASS/FAIL line.

Run with pytest (the lines are repeated in the terminal summary) or directly
with ``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nslasalle.certify import check_corollary2
from nslasalle.cli import main
from nslasalle.expr import parse
from nslasalle.field import PiecewiseField, evaluate_field, filippov_map
from nslasalle.lyapunov import PiecewiseScalar, check_regularity, setvalued_derivative
from nslasalle.scenario import bundled, load_scenario
from nslasalle.simulate import IntegratorConfig, barbalat_report, inclusion_check, integrate

RESULTS: list[str] = []
BUNDLED = ("sign", "adaptive", "frozen")


def report(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] AC{number}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _sign_field():
    return PiecewiseField.from_strings(1, ["x1"], {"+": "-1", "-": "1"})


_trajectories = {}


def bundled_runs():
    if not _trajectories:
        for name in BUNDLED:
            s = load_scenario(bundled(name))
            _trajectories[name] = (s, integrate(s.field, s.x0, s.t0, s.tf, s.integrator))
    return _trajectories


def test_ac1_sign_closed_form():
    F = _sign_field()
    start = time.perf_counter()
    traj = integrate(F, [1.0], 0.0, 2.0, IntegratorConfig(h=1e-3))
    elapsed = time.perf_counter() - start
    err = float(np.max(np.abs(traj.states[:, 0] - np.maximum(1.0 - traj.times, 0.0))))
    report(1, err <= 1e-6 and elapsed < 1.0,
           f"sign system max error {err:.2e} (<= 1e-6), runtime {elapsed:.3f} s (< 1 s)")


def test_ac2_setvalued_derivative_fixtures():
    V = PiecewiseScalar.from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"])
    F = _sign_field()
    at0 = setvalued_derivative(V, F, [0.0])
    at2 = setvalued_derivative(V, F, [2.0])
    ok = (abs(at0.lower) <= 1e-9 and abs(at0.upper) <= 1e-9
          and abs(at2.lower + 1) <= 1e-9 and abs(at2.upper + 1) <= 1e-9)
    report(2, ok, f"Vdot~(|x|, -sign) at 0 = {at0}, at 2 = {at2}")


def test_ac3_corollary2_positive():
    s = load_scenario(bundled("adaptive"))
    assert s.domain.samples_per_axis == 64 and s.domain.box == [(-2, 2), (-2, 2)]
    assert s.t_grid == [float(k) for k in range(11)]
    cert = check_corollary2(s.field, s.V, s.triple, s.domain, s.t_grid)
    traj = integrate(s.field, s.x0, s.t0, s.tf, s.integrator)
    e_tail = float(np.max(np.abs(traj.states[traj.times >= 15.0, 0])))
    bound = np.sqrt(2.0 * s.V(s.x0, s.t0)) + 1e-6
    norm_max = float(np.max(np.linalg.norm(traj.states, axis=1)))
    ok = cert.passed and e_tail <= 1e-2 and norm_max <= bound
    report(3, ok, f"adaptive certificate {'passes' if cert.passed else 'fails'} on 64x64 grid; "
                  f"sup |e| for t >= 15 = {e_tail:.2e}; max |x| = {norm_max:.6f} <= {bound:.6f}")


def test_ac4_corollary2_negative(tmp_path):
    code = main(["check", "bundled:adaptive", "-o", str(tmp_path), "--set", "lyapunov.W=x1^2 + 0.5"])
    s = load_scenario(bundled("adaptive"), {"lyapunov.W": "x1^2 + 0.5"})
    cert = check_corollary2(s.field, s.V, s.triple, s.domain, s.t_grid)
    w = cert["derivative_bound"].witness
    on_surface = w is not None and abs(s.field.surface_values(w["x"], w["t"])[0]) <= 1e-9
    report(4, code == 1 and not cert.passed and on_surface,
           f"W = e^2 + 0.5: exit code {code}, witness x = {w and w['x']} on e = 0: {on_surface}")


def test_ac5_monotone_V():
    worst = {}
    for name, (s, traj) in bundled_runs().items():
        conv = barbalat_report(traj, s.V, s.triple.W, s.tail_fraction, s.convergence_tol)
        worst[name] = (conv.monotone and conv.bounded_by_initial, conv.max_increase)
    ok = all(v[0] for v in worst.values())
    detail = ", ".join(f"{k}: max step increase {v[1]:.1e}" for k, v in worst.items())
    report(5, ok, f"V non-increasing within 1e-6 ({detail})")


def test_ac6_integral_bound():
    parts, ok = [], True
    for name, (s, traj) in bundled_runs().items():
        conv = barbalat_report(traj, s.V, s.triple.W, s.tail_fraction, s.convergence_tol)
        ok &= conv.integral_bounded
        parts.append(f"{name}: {conv.integral_W[-1]:.6f} <= {conv.V[0]:.6f}")
    s, traj = bundled_runs()["sign"]
    third = barbalat_report(traj, s.V, parse("x1^2", 1)).integral_W[-1]
    ok &= abs(third - 1.0 / 3.0) <= 1e-4
    report(6, ok, f"int W <= V(x0) + 1e-4 ({'; '.join(parts)}); "
                  f"sign with W = x^2: {third:.8f} vs 1/3")


def test_ac7_inclusion():
    parts = {name: inclusion_check(s.field, traj).compliance
             for name, (s, traj) in bundled_runs().items()}
    report(7, all(c >= 0.99 for c in parts.values()),
           "inclusion compliance at tol 1e-3: " + ", ".join(f"{k} {v:.4f}" for k, v in parts.items()))


def test_ac8_regularity_classifier():
    abs_v = PiecewiseScalar.from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"])
    neg_abs = PiecewiseScalar.from_strings(1, {"+": "-x1", "-": "x1"}, ["x1"])
    smooth = [PiecewiseScalar.from_strings(1, "x1^2"),
              PiecewiseScalar.from_strings(2, "0.5*(x1^2 + x2^2)"),
              PiecewiseScalar.from_strings(2, "sin(x1) + x1*x2 + exp(-t)*x2^2")]
    a = check_regularity(abs_v, [0.0]).regular
    b = check_regularity(neg_abs, [0.0]).regular
    c = all(check_regularity(V, np.full(V.dimension, 0.3)).regular is True
            and check_regularity(V, np.zeros(V.dimension)).regular is True for V in smooth)
    report(8, a is True and b is False and c,
           f"|x| regular at 0: {a}; -|x| regular at 0: {b}; C1 fixtures regular: {c}")


def test_ac9_filippov_consistency():
    fields = [
        (_sign_field(), 1),
        (load_scenario(bundled("adaptive")).field, 2),
        (PiecewiseField.from_strings(2, ["x1 - sin(t)", "x2"], {
            "++": ["-x1", "-1"], "+-": ["-1", "x1*x2"], "-+": ["1", "-x2"], "--": ["t", "1"]}), 2),
        (PiecewiseField.from_strings(3, ["x1 + x2 - x3"], {
            "+": ["-x2", "x1", "-1"], "-": ["x3", "-x1", "1"]}), 3),
    ]
    rng = np.random.default_rng(20261018)
    worst, checked, singletons = 0.0, 0, True
    for k in range(1000):
        F, n = fields[k % len(fields)]
        x, t = rng.uniform(-2, 2, n), float(rng.uniform(0, 5))
        if np.min(np.abs(F.surface_values(x, t))) <= 1e-6:
            continue
        K = filippov_map(F, x, t)
        singletons &= K.is_singleton()
        worst = max(worst, float(np.max(np.abs(K.vertices[0] - evaluate_field(F, x, t)))))
        checked += 1
    report(9, singletons and worst <= 1e-12 and checked >= 990,
           f"{checked} random smooth points: all singletons {singletons}, max deviation {worst:.1e}")


def test_ac10_regularization():
    eps = 1e-4
    filippov = integrate(_sign_field(), [1.0], 0.0, 2.0).states[-1, 0]
    relaxed = PiecewiseField(1, (), {(): [parse(f"-tanh(x1/{eps!r})", 1)]})
    # explicit RK4 needs h * (1/eps) inside its stability region
    ours = integrate(relaxed, [1.0], 0.0, 2.0, IntegratorConfig(h=1e-4)).states[-1, 0]
    ref = solve_ivp(lambda t, x: -np.tanh(x / eps), (0.0, 2.0), [1.0], method="Radau",
                    rtol=1e-10, atol=1e-12).y[0, -1]
    d1, d2 = abs(ours - filippov), abs(ref - filippov)
    report(10, d1 <= 5e-4 and d2 <= 5e-4,
           f"tanh(x/1e-4) terminal state vs Filippov at t=2: RK4 {d1:.1e}, Radau {d2:.1e} (<= 5e-4)")


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    failed = 0
    tests = [(k, v) for k, v in dict(globals()).items() if k.startswith("test_ac")]
    for name, fn in sorted(tests, key=lambda kv: kv[1].__code__.co_firstlineno):
        try:
            if "tmp_path" in fn.__code__.co_varnames[:fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failed += 1
        except Exception as err:  # noqa: BLE001
            failed += 1
            print(f"[FAIL] {name}: {type(err).__name__}: {err}")
    sys.exit(1 if failed else 0)

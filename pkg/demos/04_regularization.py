"""
Smoothing the switch
====================

Replacing sign(x) by tanh(x/eps) gives a smooth but stiff system.  As eps
shrinks its solutions approach the Filippov solution.  Explicit RK4 needs
a step below about 2.8 eps, so the step shrinks with eps.
"""

from nslasalle import IntegratorConfig, PiecewiseField, integrate
from nslasalle.expr import parse

sign = PiecewiseField.from_strings(1, ["x1"], {"+": "-1", "-": "1"})
target = integrate(sign, [1.0], 0.0, 2.0)

for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    relaxed = PiecewiseField(1, (), {(): [parse(f"-tanh(x1/{eps!r})", 1)]})
    h = min(1e-3, eps)
    traj = integrate(relaxed, [1.0], 0.0, 2.0, IntegratorConfig(h=h))
    mid = abs(traj.state_at(1.0)[0] - target.state_at(1.0)[0])
    end = abs(traj.states[-1, 0] - target.states[-1, 0])
    print(f"eps = {eps:.0e}  h = {h:.0e}  |diff| at t=1: {mid:.2e}  at t=2: {end:.2e}")

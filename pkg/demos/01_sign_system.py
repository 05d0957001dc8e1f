"""
The relay system x' = -sign(x)
==============================

The simplest discontinuous right-hand side.  Starting from x0 = 1 the
solution runs down the line x = 1 - t, hits the switching surface at t = 1
and then stays at the origin.  Classical solutions stop existing there;
the Filippov solution slides.
"""

import numpy as np

from nslasalle import PiecewiseField, filippov_map, integrate, inclusion_check
from nslasalle.expr import parse
from nslasalle.lyapunov import PiecewiseScalar
from nslasalle.simulate import barbalat_report

F = PiecewiseField.from_strings(1, ["x1"], {"+": "-1", "-": "1"}, name="sign")

# At the origin the Filippov map is the whole segment between the two pieces.
print("K[f](0)   =", filippov_map(F, [0.0]).interval())
print("K[f](0.5) =", filippov_map(F, [0.5]).interval())

###############################################################################
# Integrate and compare with the closed form max(1 - t, 0).
traj = integrate(F, [1.0], 0.0, 2.0)
exact = np.maximum(1.0 - traj.times, 0.0)
print("max |x - exact| =", np.max(np.abs(traj.states[:, 0] - exact)))
for event in traj.events:
    print(f"event: {event.kind} at t = {event.t:.12f}")

###############################################################################
# The velocity along the computed solution lies in K[f] almost everywhere.
print("inclusion compliance:", inclusion_check(F, traj).compliance)

###############################################################################
# With V = x^2/2 and W = x^2, the integral of W along the solution is
# the integral of (1 - t)^2 over [0, 1], which is 1/3.
V = PiecewiseScalar.from_strings(1, "0.5*x1^2")
conv = barbalat_report(traj, V, parse("x1^2", 1))
print(f"int W = {conv.integral_W[-1]:.8f}   tail sup W = {conv.tail_sup_W}")

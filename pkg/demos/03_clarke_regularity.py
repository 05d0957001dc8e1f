"""
Generalized gradients and regularity
====================================

|x| and -|x| have the same generalized gradient at the origin, the
segment [-1, 1].  Only |x| is regular: its one-sided directional
derivative matches Clarke's generalized one.  For -|x| the one-sided
derivative is -1 in both directions while the generalized one is +1.
"""

from nslasalle.lyapunov import (PiecewiseScalar, check_regularity, clarke_gradient,
                                directional_derivative, generalized_directional_derivative)

candidates = {
    "|x|": PiecewiseScalar.from_strings(1, {"+": "x1", "-": "-x1"}, ["x1"]),
    "-|x|": PiecewiseScalar.from_strings(1, {"+": "-x1", "-": "x1"}, ["x1"]),
    "x^2": PiecewiseScalar.from_strings(1, "x1^2"),
}

for name, V in candidates.items():
    G = clarke_gradient(V, [0.0])
    one = directional_derivative(V, [0.0], 0.0, [1.0]).value
    gen = generalized_directional_derivative(V, [0.0], 0.0, [1.0]).value
    verdict = check_regularity(V, [0.0]).regular
    print(f"{name:5s} dV(0) x-part = {sorted(G.vertices[:, 0].tolist())}  "
          f"V'(0;1) = {one:+.6f}  V°(0;1) = {gen:+.6f}  regular: {verdict}")

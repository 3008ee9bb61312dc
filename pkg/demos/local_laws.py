"""Recovering integrals and local densities from Stieltjes transforms.

    python3 demos/local_laws.py

Integrates a smooth bump against the semicircle law in two ways: directly,
and from values of the transform off the real axis via the almost-analytic
extension.  Then averages Im m over a shrinking window.
"""

import math

import numpy as np

from freering import measures as ms
from freering.locallaw import smooth_bump, hs_integrate, window_estimate

sc = ms.semicircle(2.0)
m = lambda z: ms.stieltjes(sc, z)

phi = smooth_bump(-1.0, 1.5, p=3)
n = 200_000
x = -1.0 + 2.5 * (np.arange(n) + 0.5) / n   # midpoint rule
direct = np.sum(phi(x) * np.sqrt(4 - x**2) / (2 * math.pi)) * 2.5 / n
for eta_min in (1e-1, 1e-2, 1e-3):
    val, err = hs_integrate(phi, m, eta_min=eta_min)
    print(f"eta_min={eta_min:g}: integral {val:.10f}  bound {err:.2e}  "
          f"actual error {abs(val - direct):.2e}")

for eta in (1e-1, 1e-2, 1e-3):
    est, terms = window_estimate(m, m, 0.5, eta, 10)
    print(f"eta={eta:g}: window density {est:.6f} "
          f"(limit {math.sqrt(4 - 0.25) / (2 * math.pi):.6f}), "
          f"bound terms {', '.join(f'{t:.2g}' for t in terms)}")

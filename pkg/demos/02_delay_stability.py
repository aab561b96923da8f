"""
When does the reporting delay destabilise the endemic state?
============================================================

At an endemic equilibrium the characteristic equation has the form
``Q(z) + B(z) g(z) e^{-zT} = 0`` with ``g`` the window factor of the uniform
kernel.  Purely imaginary roots ``+-iw`` occur at the positive zeros of a
scalar function ``K(w^2)``, and each zero produces a ladder of critical
delays spaced ``2 pi / w`` apart.
"""

import numpy as np

from epiwave import char_coeffs, endemic_points, k_eval, stability_intervals
from epiwave.config import parse_config

cfg = parse_config("")  # baseline: R0 = 2.5, L = 3 months
(eq,) = [e for e in endemic_points(cfg.params) if e.admissible]
coeffs = char_coeffs(cfg.params, eq, cfg.kernel.L)
print(f"endemic I = {eq.I:.4e}")
print(f"A = ({coeffs.A3:.4f}, {coeffs.A2:.4f}, {coeffs.A1:.4f}, {coeffs.A0:.4f})")
print(f"B = ({coeffs.B2:.4f}, {coeffs.B1:.4f}, {coeffs.B0:.4f})")

# %%
# K changes sign twice on (0, 1): one crossing frequency where roots move
# right (K' > 0) and one where they move back (K' < 0).
xs = np.linspace(0.3, 0.6, 7)
for x, k in zip(xs, k_eval(coeffs, xs)):
    print(f"K({x:.2f}) = {k:+.5f}")

# %%
# Counting crossings in order of T gives the stability windows.
summary = stability_intervals(coeffs, T_max=40.0)
for root in summary.roots:
    print(f"w = {root.w:.4f} ({root.direction}): T = "
          + ", ".join(f"{T:.4f}" for T in root.delays))
for iv in summary.intervals:
    print(f"  [{iv.start:7.4f}, {iv.end:7.4f})  {'stable' if iv.stable else 'unstable'}")

# %%
# The two ladders have different spacings, so eventually two left-to-right
# crossings occur in a row and the equilibrium stays unstable for all
# larger delays.

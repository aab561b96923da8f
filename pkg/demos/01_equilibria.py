"""
Endemic equilibria and the cubic A(x)
=====================================

Endemic infection levels are the positive roots of a cubic.  Depending on
the parameters there can be one, two (one of them double) or three of them.
"""

import numpy as np

from epiwave import descartes_table, endemic_cubic, endemic_points, positive_roots
from epiwave.config import parse_config

# %%
# Three parameter sets with very different root structure.  Each one is a
# named preset; the same numbers can be given in an INI file.
for name in ("fig2", "fig3", "fig4"):
    p = parse_config("", preset=name).params
    cubic = endemic_cubic(p)
    report = descartes_table(cubic)
    roots = positive_roots(cubic)
    print(f"{name}: R0 = {p.r0:.4f}, signs {report.signs}, "
          f"possible distinct positive roots {report.admissible_counts}")
    for x, m in roots:
        print(f"    I = {x:.4f}" + ("  (double root)" if m == 2 else ""))

# %%
# The third set sits next to a fold: nudging ``alpha`` merges the two upper
# roots and they disappear.  Tracking the count along ``alpha`` shows the
# window with three endemic states.
base = parse_config("", preset="fig4").params
for alpha in np.linspace(150, 300, 7):
    p = base.replace(alpha=float(alpha))
    pts = [e for e in endemic_points(p) if e.admissible]
    print(f"alpha = {alpha:6.1f}: " + ", ".join(f"{e.I:.4f}" for e in pts))

"""
Two stable endemic states
=========================

With three endemic equilibria the outer two can both attract, and the
outcome depends on how much infection is in the initial history.
"""

from epiwave import endemic_points, multistability_probe
from epiwave.config import parse_config

cfg = parse_config("", preset="fig12")
pts = [e for e in endemic_points(cfg.params) if e.admissible]
print("endemic levels:", ", ".join(f"{e.I:.4f}" for e in pts))

# %%
# Histories ``(b/mu - I0, 0, 0, I0)``.  The stiff quarantine response needs
# a small step; the runs go to a process pool.
levels = [0.01, 0.5, 2.0]
for I0, verdict in zip(levels, multistability_probe(cfg.params, cfg.kernel, levels, cfg.t_end, cfg.dt,
                                                     workers=len(levels))):
    print(f"I0 = {I0}: {verdict.describe()}")

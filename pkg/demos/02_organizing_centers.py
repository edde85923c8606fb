"""Organizing centers and Hopf curves in the (p, r) plane.

Two Bogdanov-Takens points anchor the local bifurcation picture: Q0 on the
diagonal, where P0 has a double zero eigenvalue, and Q1 on the fold line,
where P1 and P2 are born. Hopf curves leave from them: e0 for the origin,
e1 and e2 for the off-origin equilibria. As s shrinks, e1 and e2 fold onto
a single parabola.

Run: python3 demos/02_organizing_centers.py
"""
import numpy as np

from msdyn import FULL3D, ModelParams
from msdyn.local_bifurcations import (
    bt_points,
    e1e2_parabola_r,
    hopf_criticality,
    hopf_e0_full,
    hopf_e1_e2_full,
)

par = ModelParams(1.0, 1.2, 0.8, 0.8)
for oc in bt_points(FULL3D, par):
    print(f"{oc.name}: (p, r) = {np.round(oc.location, 6)}  on {oc.equilibrium}")

for p in (0.8, 1.0, 1.5):
    r = hopf_e0_full(par, p)
    crit = hopf_criticality(FULL3D, par.replace(p=p, r=r), "P0")
    print(f"e0 at p={p}: r={r:.6f}  {crit.value}")

e1, e2 = hopf_e1_e2_full(par)
print(f"e1: {len(e1.samples)} samples, e2: {len(e2.samples)} samples")

print("distance of e1/e2 from the s=0 parabola")
for s in (0.2, 0.1, 0.05, 0.0):
    a, b = hopf_e1_e2_full(par.replace(s=s), n_lines=40)
    dev = max(abs(r - e1e2_parabola_r(1.2, p)) for c in (a, b) for p, r in c.samples)
    print(f"  s={s:<5} max |dr| = {dev:.3g}")

"""Global bifurcations on the critical manifold.

Homoclinic loops are located by bisection on the signed gap between the
stable and unstable manifolds of a saddle; the leading-order Melnikov
prediction gives a good first guess. A fold of limit cycles (SNLC) is found
by bisecting on whether a stable large cycle still exists.

Run: python3 demos/03_homoclinics_and_folds.py
"""
from msdyn import PLANAR_CRITICAL, ModelParams
from msdyn.global_dynamics import HomoclinicSpec, homoclinic_detect, snlc_detect
from msdyn.melnikov import lambda_P0, melnikov_point_at_p


def planar(p, r, s=0.8):
    return ModelParams(p, 10.0, r, s)


print("persistence values at delta=0:", [lambda_P0(0.0, side) for side in ("right", "left", "large")])

spec = HomoclinicSpec("P0", "right")
r_guess, _ = melnikov_point_at_p(spec, 0.8, 0.35)
r = homoclinic_detect(PLANAR_CRITICAL, planar(0.35, 1.4), spec, 1.38, 1.43)
print(f"right P0 loop at p=0.35: Melnikov guess r={r_guess:.5f}, detected r={r:.5f}")

for p, spec, lo, hi in ((1.1, HomoclinicSpec("P1", "right"), 0.98, 1.02),
                        (1.6, HomoclinicSpec("P0", "left"), 1.79, 1.83)):
    r = homoclinic_detect(PLANAR_CRITICAL, planar(p, lo), spec, lo, hi)
    print(f"{spec.saddle} {spec.side} loop at p={p}: r={r:.5f}")

res = snlc_detect(PLANAR_CRITICAL, planar(1.55, 2.5), 2.5, 3.0)
print(f"SNLC at p=1.55: r={res.r:.5f}  (stable period {res.stable.period:.3f}, "
      f"repelling period {res.unstable.period:.3f}, x-range gap {res.amplitude_gap:.4f})")

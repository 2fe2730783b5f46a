"""The planar Bonnesen inequality pi^2 (R_out - R_in)^2 <= L^2 - 4 pi A on a few curves.

Ellipses closing up to the circle show both sides going to zero together.

    python demos/bonnesen_curves.py
"""

from entropyflow import PlanarCurve, bonnesen_check

curves = {"circle": PlanarCurve.circle(), "square": PlanarCurve.square(2.0)}
for b in (0.5, 0.8, 0.95, 0.99):
    curves[f"ellipse 1 x {b}"] = PlanarCurve.ellipse(1.0, b)

print(f"{'curve':16s} {'lhs':>11s} {'rhs':>11s}  holds")
for name, curve in curves.items():
    res = bonnesen_check(curve)
    print(f"{name:16s} {res.lhs:11.6f} {res.rhs:11.6f}  {res.holds}")

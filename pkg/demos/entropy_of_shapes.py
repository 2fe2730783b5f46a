"""How far above the round sphere does the entropy sit for a few closed surfaces?

Every value is compared with lambda_2 = 4/e, the entropy of the round sphere.
Elongating the sphere raises the entropy a little; a thin spike raises it a
lot, even though the spike has almost no area.

    python demos/entropy_of_shapes.py
"""

from entropyflow import entropy, entropy_grid_oracle, lambda_reference
from entropyflow.shapes import generate

SHAPES = [
    "sphere:r=1,level=4",
    "ellipsoid:a=1.2,b=1,c=1,level=4",
    "ellipsoid:a=2,b=1,c=1,level=4",
    "perturbed_sphere:r=2,eps=0.2,level=4",
    "spiked_sphere:l=5,w=0.1,level=4",
]

lam2 = lambda_reference(2)
print(f"{'shape':40s} {'entropy':>9s} {'oracle':>9s} {'delta':>9s}  frame (y, rho)")
for spec in SHAPES:
    mesh = generate(spec)
    res = entropy(mesh)
    oracle = entropy_grid_oracle(mesh)
    y = ", ".join(f"{c:+.2f}" for c in res.argmax.y)
    print(f"{spec:40s} {res.value:9.5f} {oracle:9.5f} {res.value - lam2:9.5f}  ({y}), {res.argmax.rho:.3f}")

"""Distance to the nearest round sphere against the entropy gap.

For two families of near-spheres the normalized Hausdorff distance d is
compared with delta^(1/8), delta the entropy gap.  The largest ratio over
the corpus is stable when the mesh is refined; the fitted log-log slope
is printed for information only.

    python demos/rigidity_sweep.py [level]
"""

import sys

from entropyflow import log_log_slope, rigidity_defect
from entropyflow.shapes import generate

level = int(sys.argv[1]) if len(sys.argv) > 1 else 3
corpus = [f"perturbed_sphere:r=2,eps={e},level={level}" for e in (0.02, 0.05, 0.1, 0.2, 0.3)]
corpus += [f"ellipsoid:a={1 + e},b=1,c=1,level={level}" for e in (0.05, 0.1, 0.2, 0.4)]

rows = []
print(f"{'shape':42s} {'delta':>10s} {'d':>8s} {'d/delta^1/8':>12s}")
for spec in corpus:
    rep = rigidity_defect(generate(spec))
    rows.append(rep)
    print(f"{spec:42s} {rep.delta:10.6f} {rep.distance:8.5f} {rep.ratio:12.5f}")

print(f"\nmax ratio {max(r.ratio for r in rows):.4f}")
print(f"log-log slope of d against delta: {log_log_slope([r.delta for r in rows], [r.distance for r in rows]):.3f}")

"""A larger experiment: 10 -> 5 -> 5 -> 5 -> 20 with tiny weight decay.

We build three reference points (the global minimum, a rank-deficient
spurious minimum, and a saddle near the origin), cut random 2-D slices
through each, and then let gradient descent from small random starts
find its own way down.  Slices are written as CSV next to this script.

Pass --full to run descent to an absolute gradient of 1e-6 (about a minute);
the default stops at the scaled tolerance 1e-6 (1 + ||Y||_F).
"""

import argparse
from pathlib import Path

import numpy as np

from dmf_landscape import Problem, construct, global_specs, root_profile
from dmf_landscape.classify import CritClass, classify, global_min_value
from dmf_landscape.critical import CriticalSpec
from dmf_landscape.io import csv_text, write_atomic
from dmf_landscape.model import loss_F
from dmf_landscape.verify import (
    classify_numerically,
    gradient_descent_batch,
    init_stack,
    landscape_slice,
)

ap = argparse.ArgumentParser()
ap.add_argument("--full", action="store_true")
ap.add_argument("--out", type=Path, default=Path(__file__).with_name("out"))
args = ap.parse_args()
args.out.mkdir(exist_ok=True)

rng = np.random.default_rng(2024)
Y = np.zeros((20, 10))
Y[np.arange(10), np.arange(10)] = rng.uniform(0, 10, 10)
p = Problem((10, 5, 5, 5, 20), [1e-4] * 4, Y)
lam, L = p.lam, p.depth
roots = [root_profile(float(v), lam, L) for v in p.spectrum.y[:5]]
gm = global_min_value(p)
print(f"global minimum of F: {gm:.6f}")

points = {
    "global": global_specs(p)[0],
    "spurious": CriticalSpec([r.x_bar for r in roots[:4]] + [0.0], list(range(10))),
    "saddle": CriticalSpec([roots[0].x_under, 0, 0, 0, 0], list(range(10))),
}
for name, spec in points.items():
    W = construct(p, spec)
    kind = classify(p, spec).kind
    radius = 1.0 if kind is CritClass.STRICT_SADDLE else 0.05
    grid = landscape_slice(p, W, seed=0, half_range=radius, resolution=101)
    path = args.out / f"slice_{name}.csv"
    write_atomic(path, csv_text(["alpha", "beta", "value"], grid.rows()))
    print(f"{name:9s} {kind.value:17s} loss {loss_F(p, W):10.4f}  slice radius {radius}: "
          f"min {grid.values.min():+.3e}, max {grid.values.max():+.3e}  -> {path.name}")

seeds = list(range(10))
runs = gradient_descent_batch(p, [init_stack(p, s) for s in seeds], step=7.5e-3,
                              max_iter=1_000_000 if args.full else 200_000,
                              grad_tol=1e-6, seeds=seeds, scaled=not args.full,
                              record_every=10_000)
print("\nseed  iterations  |grad|     loss        terminal class")
for r in runs:
    kind = classify_numerically(p, r.W, grad_tol=1e-6, scaled=not args.full).kind.value \
        if r.converged else "not converged"
    print(f"{r.seed:4d}  {r.iterations:10d}  {r.grad_norm:.2e}  {r.loss:.8f}  {kind}")
# the trajectories pause at the rank-4 value before the last direction is learned
plateau = sorted({round(v, 3) for r in runs for v in r.trajectory})[:3]
print(f"\nlowest recorded loss levels: {plateau}")

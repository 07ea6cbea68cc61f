"""Where the per-value roots come from.

Each data singular value y contributes a scalar problem: the critical
values x > 0 solve f(x; y) = x^(2L-1) - sqrt(lam) y x^(L-1) + lam x = 0.
Below a threshold y* there is no positive root, above it there are two,
and exactly at y* the two merge into a double root x*.
"""

import numpy as np

from dmf_landscape import lambda_critical, root_profile, scalar_argmin_g, thresholds

L, lam = 3, 1.0
th = thresholds(lam, L)
print(f"depth {L}, lam {lam}: threshold y* = {th.y_star:.12f}, double root x* = {th.x_star:.12f}")

print("\n   y      kind          large root    small root")
for y in np.linspace(1.0, 4.0, 13):
    p = root_profile(y, lam, L)
    big = "" if p.x_bar is None else f"{p.x_bar:.8f}"
    small = "" if p.x_under is None else f"{p.x_under:.8f}"
    print(f"{y:6.3f}  {p.kind.value:12s}  {big:>12s}  {small:>12s}")

# the scalar objective g(x; y) is minimised either at 0 or at the large root
for y in (1.5, 2.0, 3.0):
    res = scalar_argmin_g(y, lam, L)
    print(f"\ny = {y}: argmin of g is {res.argmin_set} with value {res.min_value:.10f}")

# read the threshold the other way round: which lam puts y exactly at y*?
y = 1.0
lc = lambda_critical(y, L)
print(f"\nlam_crit({y}, L={L}) = {lc!r}; check y*(lam_crit) = {thresholds(lc, L).y_star!r}")

"""Every critical point of a small problem, classified and checked.

A 3-layer problem with a 3x3 target has finitely many critical families.
For each one we build a point, check that its gradient vanishes, and
compare the predicted class with what the Hessian actually does there.
"""

import numpy as np

from dmf_landscape import Problem, construct, enumerate_specs, random_dressing
from dmf_landscape.classify import (
    CritClass,
    certificate_direction,
    classify,
    global_min_value,
    spec_loss,
)
from dmf_landscape.model import grad_F, hessian_quadform, stack_norm
from dmf_landscape.verify import probe_min_quadform

rng = np.random.default_rng(0)
Y = np.diag([3.0, 2.2, 1.9])
p = Problem((3, 4, 4, 3), [0.6, 0.7, 0.8], Y)
family = enumerate_specs(p)
dressing = random_dressing(p, seed=1)
print(f"{len(family)} critical families; global minimum value {global_min_value(p):.8f}\n")

print(f"{'sigma':34s} {'class':18s} {'loss':>11s} {'|grad|':>9s}  evidence")
for spec in family:
    c = classify(p, spec)
    W = construct(p, spec, dressing)
    gn = stack_norm(grad_F(p, W))
    if c.kind is CritClass.STRICT_SADDLE:
        cert = certificate_direction(p, spec, dressing=dressing)
        q = hessian_quadform(p, W, cert.direction)
        evidence = f"{cert.kind.value}: quadform {q:.4g} (predicted {cert.expected_quadform:.4g})"
    else:
        rep = probe_min_quadform(p, W, n=200, seed=2)
        evidence = f"min of 200 probed quadforms {rep.min_quadform:.3g}"
    sig = np.array2string(spec.sigma, precision=4, separator=",")
    print(f"{sig:34s} {c.kind.value:18s} {spec_loss(p, spec):11.6f} {gn:9.1e}  {evidence}")

import numpy as np
import pytest

from dmf_landscape import Problem


def haar(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_problem(rng, L=None, max_dim=5, lam_range=(1e-3, 1.0), repeat=0.3,
                   dense=True, y_max=4.0):
    """Random problem with matrix-valued layers and optionally repeated singular values."""
    L = int(rng.integers(2, 6)) if L is None else L
    while True:
        dims = tuple(int(d) for d in rng.integers(1, max_dim + 1, size=L + 1))
        if max(dims) >= 2:
            break
    lams = rng.uniform(*lam_range, size=L)
    k = min(dims[0], dims[-1])
    sv = np.sort(rng.uniform(0, y_max, k))[::-1]
    if k > 1 and rng.random() < repeat:
        sv[1] = sv[0]
    S = np.zeros((dims[-1], dims[0]))
    S[np.arange(k), np.arange(k)] = sv
    Y = haar(rng, dims[-1]) @ S @ haar(rng, dims[0]).T if dense else S
    return Problem(dims, lams, Y)


def random_stack(rng, problem, scale=1.0):
    return [scale * rng.standard_normal(s) for s in problem.shapes]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
